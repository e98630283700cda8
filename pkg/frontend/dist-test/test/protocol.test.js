/**
 * Live round trip against the real service: spawns `blendlab serve` on an
 * ephemeral port, streams 100 input frames at 20 Hz, and checks that
 * every server frame validates, that a method switch shows up within a
 * tick, and that input moves the robot within two ticks.
 */
import assert from 'node:assert/strict';
import { spawn } from 'node:child_process';
import { once } from 'node:events';
import path from 'node:path';
import { fileURLToPath } from 'node:url';
import { test } from 'node:test';
import WebSocket from 'ws';
import { validateServerMessage } from '../src/schema.js';
const here = path.dirname(fileURLToPath(import.meta.url));
function startService() {
    const proc = spawn('python3', ['-m', 'blendlab.cli', 'serve', '--port', '0', '--scenario', 'open', '--method', 'lb', '--tick-ms', '50'], { cwd: here, stdio: ['ignore', 'pipe', 'pipe'] });
    const url = new Promise((resolve, reject) => {
        const timer = setTimeout(() => reject(new Error('service did not announce a port')), 30000);
        proc.stdout.on('data', (chunk) => {
            const match = /listening on (ws:\S+)/.exec(chunk.toString());
            if (match) {
                clearTimeout(timer);
                resolve(match[1]);
            }
        });
        proc.on('exit', (code) => reject(new Error(`service exited early: ${code}`)));
    });
    return { proc, url };
}
test('scripted 20 Hz session: validation, switch latency, input latency', async () => {
    const { proc, url } = startService();
    try {
        const ws = new WebSocket(await url);
        await once(ws, 'open');
        const frames = [];
        const states = [];
        let invalid = 0;
        ws.on('message', (data) => {
            const parsed = JSON.parse(data.toString());
            if (!validateServerMessage(parsed)) {
                invalid += 1;
                return;
            }
            const env = parsed;
            frames.push(env);
            if (env.type === 'state') {
                states.push({ tick: env.tick, payload: env.payload });
            }
        });
        const statesAt = (count) => new Promise((resolve, reject) => {
            const started = Date.now();
            const poll = setInterval(() => {
                if (states.length >= count) {
                    clearInterval(poll);
                    resolve();
                }
                else if (Date.now() - started > 60000) {
                    clearInterval(poll);
                    reject(new Error(`timed out waiting for ${count} states (${states.length})`));
                }
            }, 10);
        });
        // Phase 1: a few ticks without input; the world streams anyway.
        await statesAt(4);
        const idleCount = states.length;
        const idleY = states[states.length - 1].payload.robot[1];
        // Phase 2: 100 inputs at 20 Hz steering +y (the autonomy never does).
        let sent = 0;
        await new Promise((resolve) => {
            const pump = setInterval(() => {
                sent += 1;
                ws.send(JSON.stringify({ type: 'input', tick: sent, payload: { vector: [0.0, 1.0] } }));
                if (sent === 40) {
                    ws.send(JSON.stringify({ type: 'config', tick: sent, payload: { method: 'ltb' } }));
                }
                if (sent >= 100) {
                    clearInterval(pump);
                    resolve();
                }
            }, 50);
        });
        await statesAt(idleCount + 8);
        assert.equal(sent, 100);
        assert.equal(invalid, 0, 'every server frame schema-validates');
        const ticks = frames.map((f) => f.tick);
        for (let i = 1; i < ticks.length; i += 1) {
            assert.ok(ticks[i] > ticks[i - 1], 'ticks increase strictly');
        }
        // Input latency: the robot's y pose responds within two states of the
        // first post-input state.
        const moved = states.findIndex((s) => s.payload.robot[1] > idleY + 1e-6);
        assert.ok(moved >= 0, 'input moved the robot');
        assert.ok(moved <= idleCount + 2, `pose responded by state ${moved} (idle ${idleCount})`);
        // Method switch: once an ltb state appears, the previous state is at
        // most one tick older and the method sticks.
        const firstLtb = states.findIndex((s) => s.payload.method === 'ltb');
        assert.ok(firstLtb > 0, 'method switch observed');
        assert.ok(states[firstLtb].tick - states[firstLtb - 1].tick <= 2, 'switch landed on the next tick boundary');
        for (const s of states.slice(firstLtb)) {
            assert.equal(s.payload.method, 'ltb');
        }
        ws.close();
        await once(ws, 'close');
    }
    finally {
        proc.kill('SIGTERM');
    }
});
//# sourceMappingURL=protocol.test.js.map