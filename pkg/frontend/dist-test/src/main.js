/**
 * Page wiring: socket lifecycle, side panel controls, the per-tick input
 * sender, and the animation-frame render loop.
 */
import { SessionClient, handleServerFrame } from './client.js';
import { applyKey, applyPointer, currentVector, freshInput } from './input.js';
import { render } from './render.js';
import { freshView } from './types.js';
const view = freshView();
const input = freshInput();
const canvas = document.getElementById('world');
const ctx = canvas.getContext('2d');
const methodSelect = document.getElementById('method');
const gammaSlider = document.getElementById('gamma');
const gammaLabel = document.getElementById('gamma-value');
const samplesSelect = document.getElementById('samples');
const statusLine = document.getElementById('status');
const url = new URL(window.location.href);
const wsUrl = url.searchParams.get('ws') ?? `ws://${url.hostname || 'localhost'}:8765/session`;
const socket = new WebSocket(wsUrl);
const client = new SessionClient(socket);
let inputTimer = null;
socket.onopen = () => {
    view.connection = 'open';
};
socket.onclose = () => {
    view.connection = 'closed';
    if (inputTimer !== null)
        window.clearInterval(inputTimer);
};
socket.onmessage = (event) => {
    handleServerFrame(view, String(event.data), performance.now());
    if (view.hello && inputTimer === null) {
        inputTimer = window.setInterval(() => {
            view.input = currentVector(input);
            client.sendInput(view.input, view.lastStateTick + 1);
        }, view.hello.tick_ms);
    }
};
methodSelect.onchange = () => {
    view.selectedMethod = methodSelect.value;
    client.sendConfig({ method: view.selectedMethod }, view.lastStateTick + 1);
};
gammaSlider.oninput = () => {
    view.gamma = Number(gammaSlider.value);
    gammaLabel.textContent = view.gamma.toFixed(2);
    client.sendConfig({ gamma: view.gamma }, view.lastStateTick + 1);
};
samplesSelect.onchange = () => {
    view.nSamples = Number(samplesSelect.value);
    client.sendConfig({ n_samples: view.nSamples }, view.lastStateTick + 1);
};
window.addEventListener('keydown', (e) => applyKey(input, 'down', e.key));
window.addEventListener('keyup', (e) => applyKey(input, 'up', e.key));
let dragOrigin = null;
canvas.addEventListener('pointerdown', (e) => {
    dragOrigin = [e.offsetX, e.offsetY];
});
canvas.addEventListener('pointermove', (e) => {
    if (dragOrigin)
        applyPointer(input, 'drag', e.offsetX - dragOrigin[0], e.offsetY - dragOrigin[1]);
});
window.addEventListener('pointerup', () => {
    dragOrigin = null;
    applyPointer(input, 'release');
});
function describe() {
    const parts = [`connection: ${view.connection}`];
    if (view.hello)
        parts.push(`scenario: ${view.hello.scenario}`, `v${view.hello.version}`);
    if (view.state) {
        parts.push(`method: ${view.state.method}`, `t=${view.state.time.toFixed(2)}s`, `clearance: ${view.state.min_clearance.toFixed(2)} m`);
        if (view.state.downgraded)
            parts.push('budget downgraded');
    }
    if (view.lastMetrics) {
        parts.push(`last episode: ${view.lastMetrics.collision ? 'collision' : 'clean'}, ` +
            `agreeability ${view.lastMetrics.agreeability_score.toFixed(1)}`);
    }
    return parts.join(' | ');
}
function frame() {
    render(view, ctx, canvas.width, canvas.height, performance.now());
    statusLine.textContent = describe();
    requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
//# sourceMappingURL=main.js.map