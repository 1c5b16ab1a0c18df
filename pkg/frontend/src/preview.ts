// Preview tokens are "p<counter>" with a per-session monotonically
// increasing counter. Responses can arrive out of order (one socket, but
// the browser may also refetch); the gate makes sure the pane never goes
// backwards to a stale parameter set.

export function tokenSeq(token: string): number {
  const m = /^p(\d+)$/.exec(token)
  return m ? parseInt(m[1], 10) : NaN
}

export class PreviewGate {
  private shown = 0

  // True when the token is newer than anything displayed so far; the
  // caller should then swap the preview image. Stale or garbage tokens
  // return false and change nothing.
  accept(token: string): boolean {
    const seq = tokenSeq(token)
    if (!(seq > this.shown)) return false
    this.shown = seq
    return true
  }

  get current(): number {
    return this.shown
  }

  reset(): void {
    this.shown = 0
  }
}
