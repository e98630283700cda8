/**
 * Session client: validates every inbound frame, updates the view
 * state, and sends at most one input message per tick.
 */

import { validateConfigPayload, validateInputPayload, validateServerMessage } from './schema.js';
import { inputMessage } from './input.js';
import type {
  ConfigPayload,
  Envelope,
  HelloPayload,
  MetricsPayload,
  Point,
  StatePayload,
  ViewState,
} from './types.js';

export function handleServerFrame(view: ViewState, raw: string, nowMs: number): void {
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch {
    view.errorBanner = 'unparseable frame from server';
    return; // last good frame stays on screen
  }
  if (!validateServerMessage(parsed)) {
    view.errorBanner = 'schema-invalid frame from server';
    return;
  }
  const env = parsed as Envelope;
  switch (env.type) {
    case 'hello': {
      view.hello = env.payload as unknown as HelloPayload;
      view.selectedMethod = view.hello.method;
      view.errorBanner = null;
      break;
    }
    case 'state': {
      view.state = env.payload as unknown as StatePayload;
      view.lastStateTick = env.tick;
      view.lastStateAtMs = nowMs;
      view.trail.push([view.state.robot[0], view.state.robot[1]]);
      if (view.trail.length > 2000) view.trail.shift();
      if (view.state.reached_goal) view.trail.length = 0;
      view.errorBanner = null;
      break;
    }
    case 'metrics': {
      view.lastMetrics = env.payload as unknown as MetricsPayload;
      break;
    }
    case 'error': {
      const payload = env.payload as { message?: unknown };
      view.errorBanner = `server: ${String(payload.message ?? 'error')}`;
      break;
    }
  }
}

export function isStale(view: ViewState, nowMs: number): boolean {
  if (view.hello === null || view.lastStateAtMs === 0) return false;
  return nowMs - view.lastStateAtMs > 3 * view.hello.tick_ms;
}

export interface Sender {
  send(text: string): void;
}

export class SessionClient {
  private lastInputTick = -1;

  constructor(private readonly socket: Sender) {}

  /** One input per tick at most; drops schema-invalid vectors outright. */
  sendInput(vector: Point, tick: number): boolean {
    if (tick <= this.lastInputTick) return false;
    const message = inputMessage(tick, vector);
    if (!validateInputPayload(message.payload)) return false;
    this.socket.send(JSON.stringify(message));
    this.lastInputTick = tick;
    return true;
  }

  sendConfig(config: ConfigPayload, tick: number): boolean {
    const payload = { ...config };
    if (!validateConfigPayload(payload)) return false;
    this.socket.send(
      JSON.stringify({ type: 'config', tick: Math.max(0, Math.floor(tick)), payload }),
    );
    return true;
  }
}
