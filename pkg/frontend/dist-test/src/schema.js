/**
 * Structural validators mirroring the published wire schemas
 * (docs/schemas/ in the repository). Messages that fail validation are
 * never rendered and never sent.
 */
const MESSAGE_TYPES = ['hello', 'config', 'input', 'state', 'metrics', 'error'];
const METHODS = ['lb', 'ltb', 'ltbo', 'ctb', 'psc'];
function isObject(x) {
    return typeof x === 'object' && x !== null && !Array.isArray(x);
}
function isFiniteNumber(x) {
    return typeof x === 'number' && Number.isFinite(x);
}
export function isPoint(x) {
    return Array.isArray(x) && x.length === 2 && x.every(isFiniteNumber);
}
export function isMethod(x) {
    return typeof x === 'string' && METHODS.includes(x);
}
export function isTrajectory(x) {
    if (!isObject(x))
        return false;
    const { times, points } = x;
    if (!Array.isArray(times) || !times.every(isFiniteNumber))
        return false;
    if (!Array.isArray(points) || !points.every(isPoint))
        return false;
    return times.length === points.length;
}
export function isMode(x) {
    if (!isObject(x))
        return false;
    const weight = x.weight;
    return (isFiniteNumber(weight) &&
        weight >= 0 &&
        weight <= 1 &&
        Array.isArray(x.points) &&
        x.points.every(isPoint));
}
export function isObstacle(x) {
    if (!isObject(x))
        return false;
    if (x.type === 'circle') {
        return isPoint(x.center) && isFiniteNumber(x.radius) && x.radius > 0;
    }
    if (x.type === 'rect') {
        return ['xmin', 'ymin', 'xmax', 'ymax'].every((k) => isFiniteNumber(x[k]));
    }
    return false;
}
export function validateEnvelope(x) {
    if (!isObject(x))
        return false;
    if (typeof x.type !== 'string' || !MESSAGE_TYPES.includes(x.type))
        return false;
    if (!Number.isInteger(x.tick) || x.tick < 0)
        return false;
    return isObject(x.payload);
}
export function validateHello(p) {
    if (!isObject(p))
        return false;
    return (typeof p.version === 'string' &&
        typeof p.scenario === 'string' &&
        isMethod(p.method) &&
        isFiniteNumber(p.tick_ms) &&
        p.tick_ms > 0 &&
        isFiniteNumber(p.dt) &&
        p.dt > 0 &&
        Number.isInteger(p.horizon) &&
        p.horizon >= 1 &&
        isFiniteNumber(p.v_max) &&
        p.v_max > 0 &&
        isPoint(p.goal) &&
        Array.isArray(p.obstacles) &&
        p.obstacles.every(isObstacle) &&
        Number.isInteger(p.crowd_size) &&
        p.crowd_size >= 0);
}
export function validateState(p) {
    if (!isObject(p))
        return false;
    const diagnosticsOk = isObject(p.diagnostics) &&
        Object.values(p.diagnostics).every(isFiniteNumber);
    return (isFiniteNumber(p.time) &&
        isMethod(p.method) &&
        isPoint(p.robot) &&
        isPoint(p.goal) &&
        Array.isArray(p.crowd) &&
        p.crowd.every(isPoint) &&
        isPoint(p.input_echo) &&
        isTrajectory(p.chosen) &&
        isTrajectory(p.operator_mean) &&
        Array.isArray(p.operator_modes) &&
        p.operator_modes.every(isMode) &&
        Array.isArray(p.autonomy_modes) &&
        p.autonomy_modes.every(isMode) &&
        diagnosticsOk &&
        typeof p.downgraded === 'boolean' &&
        typeof p.reached_goal === 'boolean' &&
        isFiniteNumber(p.min_clearance));
}
export function validateMetrics(p) {
    if (!isObject(p))
        return false;
    return (isFiniteNumber(p.min_clearance) &&
        typeof p.collision === 'boolean' &&
        isFiniteNumber(p.path_length) &&
        (p.time_to_goal === null || isFiniteNumber(p.time_to_goal)) &&
        isFiniteNumber(p.agreeability_score) &&
        typeof p.reached_goal === 'boolean' &&
        Number.isInteger(p.steps) &&
        p.steps >= 0);
}
export function validateError(p) {
    return isObject(p) && typeof p.message === 'string' && typeof p.code === 'string';
}
/** Outgoing input payloads: components in [-1, 1] and magnitude <= 1. */
export function validateInputPayload(p) {
    if (!isObject(p))
        return false;
    const keys = Object.keys(p);
    if (keys.length !== 1 || keys[0] !== 'vector')
        return false;
    const v = p.vector;
    if (!isPoint(v))
        return false;
    const [x, y] = v;
    if (x < -1 || x > 1 || y < -1 || y > 1)
        return false;
    return Math.hypot(x, y) <= 1 + 1e-9;
}
/** Outgoing config payloads: known fields only, valid ranges. */
export function validateConfigPayload(p) {
    if (!isObject(p))
        return false;
    for (const [key, value] of Object.entries(p)) {
        if (key === 'method' && !isMethod(value))
            return false;
        else if (key === 'gamma' && (!isFiniteNumber(value) || value <= 0))
            return false;
        else if (key === 'n_samples' && (!Number.isInteger(value) || value < 1))
            return false;
        else if (key === 'search_budget' && (!Number.isInteger(value) || value < 0))
            return false;
        else if (key === 'k_h' && (!isFiniteNumber(value) || value < 0 || value > 1))
            return false;
        else if (!['method', 'gamma', 'n_samples', 'search_budget', 'k_h'].includes(key))
            return false;
    }
    return true;
}
export function validateServerMessage(x) {
    if (!validateEnvelope(x))
        return false;
    const env = x;
    switch (env.type) {
        case 'hello':
            return validateHello(env.payload);
        case 'state':
            return validateState(env.payload);
        case 'metrics':
            return validateMetrics(env.payload);
        case 'error':
            return validateError(env.payload);
        default:
            return false; // config/input never arrive from the server
    }
}
//# sourceMappingURL=schema.js.map