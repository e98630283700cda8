/**
 * Keyboard and pointer capture mapped to a unit-clamped joystick vector.
 * Screen y grows downward; world y grows upward, so vertical keys flip.
 */
const KEY_VECTORS = {
    ArrowUp: [0, 1],
    ArrowDown: [0, -1],
    ArrowLeft: [-1, 0],
    ArrowRight: [1, 0],
    w: [0, 1],
    s: [0, -1],
    a: [-1, 0],
    d: [1, 0],
};
export function freshInput() {
    return { keys: new Set(), pointer: null };
}
export function clampUnit(v) {
    const norm = Math.hypot(v[0], v[1]);
    if (norm <= 1 || norm === 0)
        return [v[0], v[1]];
    return [v[0] / norm, v[1] / norm];
}
export function applyKey(state, kind, key) {
    const name = key.length === 1 ? key.toLowerCase() : key;
    if (!(name in KEY_VECTORS))
        return;
    if (kind === 'down')
        state.keys.add(name);
    else
        state.keys.delete(name);
}
export function applyPointer(state, kind, dxPx = 0, dyPx = 0, radiusPx = 80) {
    if (kind === 'release') {
        state.pointer = null;
        return;
    }
    state.pointer = clampUnit([dxPx / radiusPx, -dyPx / radiusPx]);
}
export function currentVector(state) {
    if (state.pointer)
        return state.pointer;
    let x = 0;
    let y = 0;
    for (const key of state.keys) {
        const [kx, ky] = KEY_VECTORS[key];
        x += kx;
        y += ky;
    }
    return clampUnit([x, y]);
}
export function inputMessage(tick, vector) {
    const clamped = clampUnit(vector);
    return {
        type: 'input',
        tick: Math.max(0, Math.floor(tick)),
        payload: { vector: [clamped[0], clamped[1]] },
    };
}
//# sourceMappingURL=input.js.map