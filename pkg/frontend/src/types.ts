export type MethodName = 'lb' | 'ltb' | 'ltbo' | 'ctb' | 'psc';

export type MessageType = 'hello' | 'config' | 'input' | 'state' | 'metrics' | 'error';

export interface Envelope {
  type: MessageType;
  tick: number;
  payload: Record<string, unknown>;
}

export type Point = [number, number];

export interface TrajectoryMsg {
  times: number[];
  points: Point[];
}

export interface ModeMsg {
  weight: number;
  points: Point[];
}

export interface CircleObstacle {
  type: 'circle';
  center: Point;
  radius: number;
}

export interface RectObstacle {
  type: 'rect';
  xmin: number;
  ymin: number;
  xmax: number;
  ymax: number;
}

export type Obstacle = CircleObstacle | RectObstacle;

export interface HelloPayload {
  version: string;
  scenario: string;
  method: MethodName;
  tick_ms: number;
  dt: number;
  horizon: number;
  v_max: number;
  goal: Point;
  obstacles: Obstacle[];
  crowd_size: number;
}

export interface StatePayload {
  time: number;
  method: MethodName;
  robot: Point;
  goal: Point;
  crowd: Point[];
  input_echo: Point;
  chosen: TrajectoryMsg;
  operator_mean: TrajectoryMsg;
  operator_modes: ModeMsg[];
  autonomy_modes: ModeMsg[];
  diagnostics: Record<string, number>;
  downgraded: boolean;
  reached_goal: boolean;
  min_clearance: number;
}

export interface MetricsPayload {
  min_clearance: number;
  collision: boolean;
  path_length: number;
  time_to_goal: number | null;
  agreeability_score: number;
  reached_goal: boolean;
  steps: number;
}

export interface ErrorPayload {
  message: string;
  code: string;
}

export interface ConfigPayload {
  method?: MethodName;
  gamma?: number;
  n_samples?: number;
  search_budget?: number;
  k_h?: number;
}

export type ConnectionStatus = 'connecting' | 'open' | 'closed';

/** Everything the renderer needs; socket callbacks only mutate this. */
export interface ViewState {
  hello: HelloPayload | null;
  state: StatePayload | null;
  lastMetrics: MetricsPayload | null;
  lastStateAtMs: number;
  lastStateTick: number;
  selectedMethod: MethodName;
  gamma: number;
  nSamples: number;
  input: Point;
  connection: ConnectionStatus;
  errorBanner: string | null;
  trail: Point[];
}

export function freshView(): ViewState {
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
