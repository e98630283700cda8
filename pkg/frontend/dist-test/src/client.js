/**
 * Session client: validates every inbound frame, updates the view
 * state, and sends at most one input message per tick.
 */
import { validateConfigPayload, validateInputPayload, validateServerMessage } from './schema.js';
import { inputMessage } from './input.js';
export function handleServerFrame(view, raw, nowMs) {
    let parsed;
    try {
        parsed = JSON.parse(raw);
    }
    catch {
        view.errorBanner = 'unparseable frame from server';
        return; // last good frame stays on screen
    }
    if (!validateServerMessage(parsed)) {
        view.errorBanner = 'schema-invalid frame from server';
        return;
    }
    const env = parsed;
    switch (env.type) {
        case 'hello': {
            view.hello = env.payload;
            view.selectedMethod = view.hello.method;
            view.errorBanner = null;
            break;
        }
        case 'state': {
            view.state = env.payload;
            view.lastStateTick = env.tick;
            view.lastStateAtMs = nowMs;
            view.trail.push([view.state.robot[0], view.state.robot[1]]);
            if (view.trail.length > 2000)
                view.trail.shift();
            if (view.state.reached_goal)
                view.trail.length = 0;
            view.errorBanner = null;
            break;
        }
        case 'metrics': {
            view.lastMetrics = env.payload;
            break;
        }
        case 'error': {
            const payload = env.payload;
            view.errorBanner = `server: ${String(payload.message ?? 'error')}`;
            break;
        }
    }
}
export function isStale(view, nowMs) {
    if (view.hello === null || view.lastStateAtMs === 0)
        return false;
    return nowMs - view.lastStateAtMs > 3 * view.hello.tick_ms;
}
export class SessionClient {
    socket;
    lastInputTick = -1;
    constructor(socket) {
        this.socket = socket;
    }
    /** One input per tick at most; drops schema-invalid vectors outright. */
    sendInput(vector, tick) {
        if (tick <= this.lastInputTick)
            return false;
        const message = inputMessage(tick, vector);
        if (!validateInputPayload(message.payload))
            return false;
        this.socket.send(JSON.stringify(message));
        this.lastInputTick = tick;
        return true;
    }
    sendConfig(config, tick) {
        const payload = { ...config };
        if (!validateConfigPayload(payload))
            return false;
        this.socket.send(JSON.stringify({ type: 'config', tick: Math.max(0, Math.floor(tick)), payload }));
        return true;
    }
}
//# sourceMappingURL=client.js.map