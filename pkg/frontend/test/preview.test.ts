import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest'

import { PreviewGate, tokenSeq } from '../src/preview.js'
import { ParamsChannel } from '../src/transport.js'
import { WaterParams } from '../src/params.js'
import { FakeSocket, makeFactory } from './fakes.js'

describe('tokenSeq', () => {
  it('parses the session counter', () => {
    expect(tokenSeq('p1')).toBe(1)
    expect(tokenSeq('p142')).toBe(142)
  })

  it('is NaN for garbage', () => {
    expect(tokenSeq('nope')).toBeNaN()
    expect(tokenSeq('p')).toBeNaN()
    expect(tokenSeq('12')).toBeNaN()
  })
})

describe('PreviewGate', () => {
  it('accepts strictly newer tokens only', () => {
    const gate = new PreviewGate()
    expect(gate.accept('p1')).toBe(true)
    expect(gate.accept('p3')).toBe(true)
    expect(gate.accept('p2')).toBe(false) // stale
    expect(gate.accept('p3')).toBe(false) // duplicate
    expect(gate.current).toBe(3)
  })

  it('rejects garbage tokens without advancing', () => {
    const gate = new PreviewGate()
    gate.accept('p5')
    expect(gate.accept('bogus')).toBe(false)
    expect(gate.current).toBe(5)
  })
})

describe('stale-response suppression against a mocked service', () => {
  beforeEach(() => vi.useFakeTimers())
  afterEach(() => vi.useRealTimers())

  const params = (r: number): WaterParams => ({
    beta_attn: [r, 0.1, 0.05],
    beta_bs: [0.02, 0.03, 0.035],
    B_inf: [0.05, 0.25, 0.45],
  })

  it('never displays a preview older than the newest acknowledged one', () => {
    // Mocked service: acknowledges each params message, but delivers the
    // replies out of order (a later update renders faster than an earlier
    // one). The UI must end up showing the newest token and must ignore
    // the stale ack that arrives last.
    const sockets: FakeSocket[] = []
    const displayed: string[] = []
    const gate = new PreviewGate()
    const channel = new ParamsChannel(
      'ws://mock/sessions/s/params',
      {
        onAck: token => {
          if (gate.accept(token)) displayed.push(token)
        },
        onReject: () => {},
        onStatus: () => {},
      },
      makeFactory(sockets),
    )
    sockets[0].open()

    channel.send(params(0.3)) // server will answer with p1
    channel.send(params(0.4)) // server will answer with p2
    channel.send(params(0.5)) // server will answer with p3
    expect(sockets[0].sent.length).toBe(3)

    // out-of-order delivery: p2, then p3, then the stale p1
    sockets[0].reply({ preview_token: 'p2', latency_ms: 18.0 })
    sockets[0].reply({ preview_token: 'p3', latency_ms: 7.0 })
    sockets[0].reply({ preview_token: 'p1', latency_ms: 44.0 })

    expect(displayed).toEqual(['p2', 'p3']) // p1 suppressed as stale
    expect(gate.current).toBe(3)
    channel.close()
  })
})
