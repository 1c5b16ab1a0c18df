// WebSocket channel to the service's params socket. One socket per
// session; on connection loss it reconnects automatically and re-sends the
// last parameter set so the server session catches up with the sliders.

import { WaterParams, paramsMessage } from './params.js'

export interface SocketLike {
  send(data: string): void
  close(): void
  onopen: (() => void) | null
  onmessage: ((ev: { data: string }) => void) | null
  onclose: (() => void) | null
  onerror: (() => void) | null
}

export type SocketFactory = (url: string) => SocketLike

export interface ChannelEvents {
  // Server acknowledged a params message and rendered a preview.
  onAck(token: string, latencyMs: number): void
  // Server rejected the params (message names the offending field).
  onReject(message: string): void
  // Connection status for the banner.
  onStatus(connected: boolean): void
}

const defaultFactory: SocketFactory = url => new WebSocket(url) as unknown as SocketLike

export class ParamsChannel {
  private socket: SocketLike | null = null
  private open = false
  private closedByUser = false
  private lastSent: WaterParams | null = null
  private retryTimer: ReturnType<typeof setTimeout> | null = null

  constructor(
    private url: string,
    private events: ChannelEvents,
    private factory: SocketFactory = defaultFactory,
    private reconnectDelayMs = 500,
  ) {
    this.connect()
  }

  private connect(): void {
    const socket = this.factory(this.url)
    this.socket = socket
    socket.onopen = () => {
      this.open = true
      this.events.onStatus(true)
      // catch the server up with whatever the sliders last said
      if (this.lastSent !== null) {
        socket.send(JSON.stringify(paramsMessage(this.lastSent)))
      }
    }
    socket.onmessage = ev => {
      let doc: Record<string, unknown>
      try {
        doc = JSON.parse(ev.data)
      } catch {
        return
      }
      if (typeof doc.error === 'string') {
        this.events.onReject(doc.error)
      } else if (typeof doc.preview_token === 'string') {
        this.events.onAck(doc.preview_token, Number(doc.latency_ms))
      }
    }
    socket.onclose = () => {
      this.open = false
      if (this.closedByUser) return
      this.events.onStatus(false)
      this.retryTimer = setTimeout(() => this.connect(), this.reconnectDelayMs)
    }
    socket.onerror = () => {
      // onclose follows; nothing extra to do
    }
  }

  send(params: WaterParams): void {
    this.lastSent = params
    if (this.open && this.socket) {
      this.socket.send(JSON.stringify(paramsMessage(params)))
    }
    // not open: the reconnect path re-sends lastSent on the next onopen
  }

  get connected(): boolean {
    return this.open
  }

  close(): void {
    this.closedByUser = true
    if (this.retryTimer !== null) clearTimeout(this.retryTimer)
    this.socket?.close()
  }
}
