export function freshView() {
    return {
        hello: null,
        state: null,
        lastMetrics: null,
        lastStateAtMs: 0,
        lastStateTick: -1,
        selectedMethod: 'psc',
        gamma: 0.5,
        nSamples: 64,
        input: [0, 0],
        connection: 'connecting',
        errorBanner: null,
        trail: [],
    };
}
//# sourceMappingURL=types.js.map