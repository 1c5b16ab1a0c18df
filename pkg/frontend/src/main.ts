// Page wiring: session creation, nine sliders, live preview, reference
// side-by-side, patch picker, save button. Talks only to the tuning
// service's HTTP/WebSocket endpoints.

import {
  CHANNELS, FIELDS, ParamField, SLIDER_MAX, SliderState, WaterParams,
  acknowledged, cloneParams, markEdited, parseParams, sliderClamp,
  validateValue, withValue,
} from './params.js'
import { debounce } from './debounce.js'
import { PreviewGate } from './preview.js'
import { PatchPicker } from './patches.js'
import { ParamsChannel } from './transport.js'

const $ = (id: string) => document.getElementById(id)!

let sessionId = ''
let state: SliderState = {
  params: { beta_attn: [0.35, 0.08, 0.05], beta_bs: [0.02, 0.03, 0.035], B_inf: [0.05, 0.25, 0.45] },
  dirty: false,
  lastLatencyMs: null,
}
// params in flight, oldest first; each ack consumes one
const inflight: WaterParams[] = []
const gate = new PreviewGate()
let channel: ParamsChannel | null = null
let picker: PatchPicker | null = null

function setBanner(text: string, bad = false) {
  const el = $('banner')
  el.textContent = text
  el.className = bad ? 'banner bad' : 'banner'
}

function showPreview(token: string) {
  const img = $('preview') as HTMLImageElement
  img.src = `/sessions/${sessionId}/preview.png?token=${encodeURIComponent(token)}`
}

function onAck(token: string, latencyMs: number) {
  const acked = inflight.shift() ?? state.params
  if (gate.accept(token)) {
    showPreview(token)
    state = acknowledged(acked, latencyMs)
    $('latency').textContent = `${latencyMs.toFixed(1)} ms`
    syncControls()
  }
}

const sendDebounced = debounce((params: WaterParams) => {
  inflight.push(cloneParams(params))
  channel?.send(params)
}, 30)

function edit(field: ParamField, channelIdx: number, value: number) {
  const problem = validateValue(field, value)
  if (problem) {
    setBanner(problem, true)
    return
  }
  setBanner('')
  state = markEdited(state, withValue(state.params, field, channelIdx, value))
  syncControls()
  sendDebounced(state.params)
}

function syncControls() {
  for (const field of FIELDS) {
    for (let c = 0; c < 3; c++) {
      const value = state.params[field][c]
      const slider = $(`${field}-${c}-slider`) as HTMLInputElement
      const num = $(`${field}-${c}-num`) as HTMLInputElement
      slider.value = String(sliderClamp(field, value))
      if (document.activeElement !== num) num.value = value.toFixed(3)
    }
  }
  $('dirty').textContent = state.dirty ? 'pending…' : ''
}

function buildSliders() {
  const panel = $('sliders')
  panel.innerHTML = ''
  for (const field of FIELDS) {
    const group = document.createElement('fieldset')
    group.innerHTML = `<legend>${field}</legend>`
    for (let c = 0; c < 3; c++) {
      const row = document.createElement('div')
      row.className = 'slider-row'
      const label = document.createElement('span')
      label.textContent = CHANNELS[c]
      const slider = document.createElement('input')
      slider.type = 'range'
      slider.id = `${field}-${c}-slider`
      slider.min = '0'
      slider.max = String(SLIDER_MAX[field])
      slider.step = '0.005'
      slider.addEventListener('input', () => edit(field, c, parseFloat(slider.value)))
      const num = document.createElement('input')
      num.type = 'number'
      num.id = `${field}-${c}-num`
      num.step = '0.01'
      num.addEventListener('change', () => edit(field, c, parseFloat(num.value)))
      row.append(label, slider, num)
      group.appendChild(row)
    }
    panel.appendChild(group)
  }
}

function connectSession(id: string, width: number, height: number, params: WaterParams, token: string | null) {
  sessionId = id
  sessionStorage.setItem('seatrace_session', id)
  state = { params, dirty: false, lastLatencyMs: null }
  picker = new PatchPicker(width, height)
  buildSliders()
  syncControls()
  if (token) {
    gate.accept(token)
    showPreview(token)
  }
  const proto = location.protocol === 'https:' ? 'wss' : 'ws'
  channel = new ParamsChannel(
    `${proto}://${location.host}/sessions/${id}/params`,
    {
      onAck,
      onReject: msg => setBanner(msg, true),
      onStatus: up => setBanner(up ? '' : 'connection lost — reconnecting…', !up),
    },
  )
  $('setup').classList.add('hidden')
  $('workbench').classList.remove('hidden')
  $('size').textContent = `${width}×${height}`
}

async function createSession(body: Record<string, unknown>) {
  const resp = await fetch('/sessions', {
    method: 'POST',
    headers: { 'content-type': 'application/json' },
    body: JSON.stringify(body),
  })
  const doc = await resp.json()
  if (!resp.ok) {
    setBanner(doc.detail ?? 'session creation failed', true)
    return
  }
  connectSession(doc.session_id, doc.width, doc.height, parseParams(doc.params), doc.preview_token)
}

async function rehydrate(id: string): Promise<boolean> {
  const resp = await fetch(`/sessions/${id}/state`)
  if (!resp.ok) return false
  const doc = await resp.json()
  connectSession(doc.session_id, doc.width, doc.height, parseParams(doc.params), doc.preview_token)
  return true
}

function fileToBase64(file: File): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader()
    reader.onload = () => resolve((reader.result as string).split(',', 2)[1])
    reader.onerror = () => reject(reader.error)
    reader.readAsDataURL(file)
  })
}

function wireSetup() {
  $('create-scene').addEventListener('click', () => {
    const scene = ($('scene-path') as HTMLInputElement).value.trim()
    if (scene) void createSession({ scene })
  })
  $('create-upload').addEventListener('click', async () => {
    const rgb = ($('rgb-file') as HTMLInputElement).files?.[0]
    const depth = ($('depth-file') as HTMLInputElement).files?.[0]
    if (!rgb || !depth) {
      setBanner('pick both an RGB PNG and a depth file', true)
      return
    }
    void createSession({
      rgb_png_base64: await fileToBase64(rgb),
      depth_base64: await fileToBase64(depth),
    })
  })
}

function wireWorkbench() {
  ;($('reference-file') as HTMLInputElement).addEventListener('change', ev => {
    const file = (ev.target as HTMLInputElement).files?.[0]
    const img = $('reference') as HTMLImageElement
    if (file) {
      img.src = URL.createObjectURL(file)
      img.classList.remove('hidden')
    }
  })

  $('save').addEventListener('click', async () => {
    const path = ($('save-path') as HTMLInputElement).value.trim()
    if (!path) return
    const resp = await fetch(`/sessions/${sessionId}/save`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ path }),
    })
    const doc = await resp.json()
    setBanner(resp.ok ? `saved ${doc.saved}` : doc.detail, !resp.ok)
  })

  $('patch-new').addEventListener('click', () => {
    const name = ($('patch-name') as HTMLInputElement).value.trim()
    if (name && picker) {
      picker.start(name)
      refreshPatchList()
    }
  })

  ;($('preview') as HTMLImageElement).addEventListener('click', ev => {
    const img = ev.currentTarget as HTMLImageElement
    if (!picker || !img.naturalWidth) return
    const rect = img.getBoundingClientRect()
    const x = ((ev.clientX - rect.left) / rect.width) * img.naturalWidth
    const y = ((ev.clientY - rect.top) / rect.height) * img.naturalHeight
    if (picker.click(x, y)) refreshPatchList()
  })

  $('patch-export').addEventListener('click', () => {
    if (!picker) return
    const blob = new Blob([picker.exportText()], { type: 'application/json' })
    const a = document.createElement('a')
    a.href = URL.createObjectURL(blob)
    a.download = 'patches.json'
    a.click()
    URL.revokeObjectURL(a.href)
  })
}

function refreshPatchList() {
  if (!picker) return
  $('patch-list').textContent = picker
    .names()
    .map(n => `${n} (${picker!.count(n)}${picker!.active === n ? ', active' : ''})`)
    .join('  ')
}

async function boot() {
  wireSetup()
  wireWorkbench()
  const existing = sessionStorage.getItem('seatrace_session')
  if (existing && (await rehydrate(existing))) return
  sessionStorage.removeItem('seatrace_session')
}

void boot()
