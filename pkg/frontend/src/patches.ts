// Click-to-collect patch coordinates for the colorcheck workflow. The
// export matches the batch CLI's patches JSON exactly:
//   {"patches": [{"name": "...", "coords": [[x, y], ...]}]}

export type Coord = [number, number]

export interface PatchDoc {
  patches: Array<{ name: string; coords: number[][] }>
}

export class PatchPicker {
  private patches = new Map<string, Coord[]>()
  active: string | null = null

  constructor(public width: number, public height: number) {}

  // Creates the patch if new, and makes it the click target.
  start(name: string): void {
    if (!name) return
    if (!this.patches.has(name)) this.patches.set(name, [])
    this.active = name
  }

  // Pixel coordinates; clicks outside the image or with no active patch
  // are ignored.
  click(x: number, y: number): boolean {
    if (this.active === null) return false
    const px = Math.floor(x)
    const py = Math.floor(y)
    if (px < 0 || py < 0 || px >= this.width || py >= this.height) return false
    this.patches.get(this.active)!.push([px, py])
    return true
  }

  count(name: string): number {
    return this.patches.get(name)?.length ?? 0
  }

  names(): string[] {
    return [...this.patches.keys()]
  }

  clear(name: string): void {
    this.patches.delete(name)
    if (this.active === name) this.active = null
  }

  toJSON(): PatchDoc {
    return {
      patches: [...this.patches.entries()].map(([name, coords]) => ({
        name,
        coords: coords.map(c => [c[0], c[1]]),
      })),
    }
  }

  exportText(): string {
    return JSON.stringify(this.toJSON(), null, 2) + '\n'
  }

  static fromJSON(doc: PatchDoc, width: number, height: number): PatchPicker {
    const picker = new PatchPicker(width, height)
    for (const entry of doc.patches ?? []) {
      picker.patches.set(entry.name, entry.coords.map(c => [c[0], c[1]] as Coord))
    }
    return picker
  }
}
