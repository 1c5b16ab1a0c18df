// Water-column parameter state mirrored between the sliders and the service.

export type Triple = [number, number, number]

export interface WaterParams {
  beta_attn: Triple
  beta_bs: Triple
  B_inf: Triple
}

export type ParamField = keyof WaterParams

export const FIELDS: ParamField[] = ['beta_attn', 'beta_bs', 'B_inf']
export const CHANNELS = ['R', 'G', 'B'] as const

// Slider caps are UI ergonomics, not physics limits: the numeric fields
// next to each slider accept any valid value.
export const SLIDER_MAX: Record<ParamField, number> = {
  beta_attn: 2.0,
  beta_bs: 2.0,
  B_inf: 1.0,
}

export interface SliderState {
  params: WaterParams
  dirty: boolean
  lastLatencyMs: number | null
}

export function cloneParams(p: WaterParams): WaterParams {
  return {
    beta_attn: [...p.beta_attn],
    beta_bs: [...p.beta_bs],
    B_inf: [...p.B_inf],
  }
}

// Parse the params object the service sends (session create / state).
export function parseParams(doc: unknown): WaterParams {
  const obj = doc as Record<string, unknown>
  const out = {} as WaterParams
  for (const field of FIELDS) {
    const v = obj?.[field]
    if (!Array.isArray(v) || v.length !== 3 || v.some(x => typeof x !== 'number' || !isFinite(x))) {
      throw new Error(`bad server params: ${field} must be three numbers`)
    }
    out[field] = [v[0], v[1], v[2]]
  }
  return out
}

// null when acceptable, otherwise a message naming the field.
export function validateValue(field: ParamField, value: number): string | null {
  if (!isFinite(value)) return `${field} must be a number`
  if (value < 0) return `${field} must be >= 0`
  if (field === 'B_inf' && value > 1) return 'B_inf must be <= 1'
  return null
}

// Where the slider thumb sits for a value (caps at the slider range).
export function sliderClamp(field: ParamField, value: number): number {
  return Math.min(Math.max(value, 0), SLIDER_MAX[field])
}

export function withValue(p: WaterParams, field: ParamField, channel: number, value: number): WaterParams {
  const next = cloneParams(p)
  next[field][channel] = value
  return next
}

// Exactly the message schema the service's params socket accepts.
export function paramsMessage(p: WaterParams): { beta_attn: number[]; beta_bs: number[]; B_inf: number[] } {
  return {
    beta_attn: [...p.beta_attn],
    beta_bs: [...p.beta_bs],
    B_inf: [...p.B_inf],
  }
}

export function markEdited(state: SliderState, params: WaterParams): SliderState {
  return { params, dirty: true, lastLatencyMs: state.lastLatencyMs }
}

// After a round trip the state mirrors what the server acknowledged.
export function acknowledged(params: WaterParams, latencyMs: number): SliderState {
  return { params: cloneParams(params), dirty: false, lastLatencyMs: latencyMs }
}
