import assert from 'node:assert/strict';
import { test } from 'node:test';

import {
  validateConfigPayload,
  validateEnvelope,
  validateHello,
  validateInputPayload,
  validateMetrics,
  validateServerMessage,
  validateState,
} from '../src/schema.js';

const goldenHello = {
  version: '0.1.0',
  scenario: 'crossing',
  method: 'psc',
  tick_ms: 50,
  dt: 0.25,
  horizon: 20,
  v_max: 2.0,
  goal: [8, 0],
  obstacles: [
    { type: 'circle', center: [4, 0], radius: 0.9 },
    { type: 'rect', xmin: 1, ymin: 2, xmax: 7, ymax: 2.6 },
  ],
  crowd_size: 3,
};

const goldenState = {
  time: 1.25,
  method: 'psc',
  robot: [1.2, 0.1],
  goal: [8, 0],
  crowd: [[4, 2.4]],
  input_echo: [1, 0],
  chosen: { times: [1.25, 1.5], points: [[1.2, 0.1], [1.5, 0.12]] },
  operator_mean: { times: [1.25, 1.5], points: [[1.2, 0.1], [1.55, 0.1]] },
  operator_modes: [{ weight: 1.0, points: [[1.2, 0.1], [1.5, 0.1]] }],
  autonomy_modes: [
    { weight: 0.6, points: [[1.2, 0.1], [1.5, 0.3]] },
    { weight: 0.4, points: [[1.2, 0.1], [1.5, -0.3]] },
  ],
  diagnostics: { joint_log_density: 12.5, k_h: 0.5 },
  downgraded: false,
  reached_goal: false,
  min_clearance: 1.4,
};

test('golden hello validates', () => {
  assert.ok(validateHello(goldenHello));
});

test('golden state validates', () => {
  assert.ok(validateState(goldenState));
});

test('state rejections', () => {
  assert.ok(!validateState({ ...goldenState, robot: [1.2] }));
  assert.ok(!validateState({ ...goldenState, method: 'teleport' }));
  assert.ok(!validateState({ ...goldenState, diagnostics: { bad: 'text' } }));
  assert.ok(
    !validateState({
      ...goldenState,
      chosen: { times: [0], points: [[0, 0], [1, 1]] }, // length mismatch
    }),
  );
  assert.ok(
    !validateState({
      ...goldenState,
      autonomy_modes: [{ weight: 1.5, points: [[0, 0]] }],
    }),
  );
});

test('envelope shape', () => {
  assert.ok(validateEnvelope({ type: 'state', tick: 3, payload: {} }));
  assert.ok(!validateEnvelope({ type: 'state', tick: -1, payload: {} }));
  assert.ok(!validateEnvelope({ type: 'telemetry', tick: 0, payload: {} }));
  assert.ok(!validateEnvelope({ type: 'state', tick: 0 }));
});

test('metrics payload', () => {
  const metrics = {
    min_clearance: 0.7,
    collision: false,
    path_length: 8.3,
    time_to_goal: null,
    agreeability_score: -12.5,
    reached_goal: false,
    steps: 240,
  };
  assert.ok(validateMetrics(metrics));
  assert.ok(!validateMetrics({ ...metrics, steps: 2.5 }));
});

test('input payload bounds', () => {
  assert.ok(validateInputPayload({ vector: [0.5, -0.5] }));
  assert.ok(validateInputPayload({ vector: [1, 0] }));
  assert.ok(!validateInputPayload({ vector: [1, 1] })); // magnitude sqrt(2)
  assert.ok(!validateInputPayload({ vector: [2, 0] }));
  assert.ok(!validateInputPayload({ vector: [0.1] }));
  assert.ok(!validateInputPayload({ vector: [0, 0], extra: 1 }));
});

test('config payload fields', () => {
  assert.ok(validateConfigPayload({ method: 'ltb', gamma: 0.4 }));
  assert.ok(!validateConfigPayload({ gamma: -1 }));
  assert.ok(!validateConfigPayload({ speed: 3 }));
  assert.ok(!validateConfigPayload({ k_h: 1.2 }));
});

test('server message dispatch', () => {
  assert.ok(validateServerMessage({ type: 'hello', tick: 0, payload: goldenHello }));
  assert.ok(validateServerMessage({ type: 'state', tick: 1, payload: goldenState }));
  assert.ok(
    !validateServerMessage({ type: 'input', tick: 1, payload: { vector: [0, 0] } }),
  );
});
