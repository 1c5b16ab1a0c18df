// Trailing-edge debounce: a burst of calls inside the window collapses to
// one invocation with the last arguments, fired after the window closes.

export interface Debounced<A extends unknown[]> {
  (...args: A): void
  flush(): void
  cancel(): void
  pending(): boolean
}

export function debounce<A extends unknown[]>(fn: (...args: A) => void, waitMs = 30): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | null = null
  let lastArgs: A | null = null

  const fire = () => {
    timer = null
    if (lastArgs !== null) {
      const args = lastArgs
      lastArgs = null
      fn(...args)
    }
  }

  const debounced = ((...args: A) => {
    lastArgs = args
    if (timer !== null) clearTimeout(timer)
    timer = setTimeout(fire, waitMs)
  }) as Debounced<A>

  debounced.flush = () => {
    if (timer !== null) {
      clearTimeout(timer)
      fire()
    }
  }
  debounced.cancel = () => {
    if (timer !== null) clearTimeout(timer)
    timer = null
    lastArgs = null
  }
  debounced.pending = () => timer !== null
  return debounced
}
