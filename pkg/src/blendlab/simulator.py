"""2-D world simulation: obstacles, goal-directed crowd, closed-loop episodes.

An episode loop per tick: observe (ground truth plus configured noise),
fit predictive models, arbitrate, step the world.  Collisions are
recorded, never blocking, so different methods see identical crowd
realizations for a given seed.  All randomness is derived from the
scenario seed, the step index, and the agent index, which makes entire
rollouts bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .arbitration import (
    ArbitrationReport,
    BlendGains,
    SharedControl,
    ctb,
    default_gains,
    linear_blend,
    ltb,
    ltbo,
    psc_map,
)
from .errors import ConfigurationError, ContractViolation, InfeasibilityError
from .gaussians import GaussianDensity, GaussianMixture
from .interaction import InteractionParams, agreeability_log
from .prediction import (
    GPPrior,
    OperatorStatistic,
    TrajectoryBelief,
    goal_conditioned_posterior,
    gp_posterior,
)
from .trajectory import OPERATOR, ROBOT, ObservationLog, Trajectory, crowd_agent

METHOD_NAMES = ("lb", "ltb", "ltbo", "ctb", "psc")

# Route-planner constants (documented constructions, not measured values).
DETOUR_MARGIN = 1.1
ROUTE_BLOCK_MARGIN = 1.1
ROUTE_LENGTH_PENALTY = 1.0
ROUTE_SIGMA = 0.25
ROUTE_LENGTHSCALE = 2.0
ROUTE_PIN_STD = 0.05
ROUTE_GROWTH = 0.25
UNINFORMATIVE_NOISE_STD = 25.0
# The operator's desired trajectory may drift from the platform when the
# autonomy overrides; observation noise grows with that drift, since a
# far-off intent trail says little about where the platform itself can
# be next.  The clamp is only a backstop against pathological streams.
OPERATOR_DRIFT_CLAMP = 6.0
OPERATOR_NOISE_SLOPE = 0.65
WARMUP_TICKS = 5


@dataclass(frozen=True)
class Circle:
    center: tuple
    radius: float

    def clearance(self, point):
        """Signed distance to the surface; negative inside."""
        p = np.asarray(point, dtype=float)
        return float(np.linalg.norm(p - np.asarray(self.center)) - self.radius)

    def to_dict(self):
        return {"type": "circle", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def clearance(self, point):
        x, y = float(point[0]), float(point[1])
        dx = max(self.xmin - x, 0.0, x - self.xmax)
        dy = max(self.ymin - y, 0.0, y - self.ymax)
        if dx > 0.0 or dy > 0.0:
            return float(np.hypot(dx, dy))
        return -float(min(x - self.xmin, self.xmax - x, y - self.ymin, self.ymax - y))

    def to_dict(self):
        return {
            "type": "rect",
            "xmin": self.xmin,
            "ymin": self.ymin,
            "xmax": self.xmax,
            "ymax": self.ymax,
        }


def obstacle_from_dict(data):
    if data["type"] == "circle":
        return Circle(tuple(data["center"]), float(data["radius"]))
    if data["type"] == "rect":
        return Rect(data["xmin"], data["ymin"], data["xmax"], data["ymax"])
    raise ConfigurationError(f"unknown obstacle type {data['type']!r}")


def obstacle_clearance(point, obstacles):
    """Smallest signed clearance over all obstacles; +inf when there are none."""
    if not obstacles:
        return float("inf")
    return min(ob.clearance(point) for ob in obstacles)


@dataclass(frozen=True)
class CrowdSpec:
    """A goal-directed pedestrian: constant speed with Gaussian heading noise."""

    start: tuple
    goal: tuple
    speed: float = 1.0
    heading_noise: float = 0.15

    def to_dict(self):
        return {
            "start": list(self.start),
            "goal": list(self.goal),
            "speed": self.speed,
            "heading_noise": self.heading_noise,
        }


OPERATOR_POLICIES = ("optimal", "safe-suboptimal", "unsafe", "bimodal", "interactive")


@dataclass(frozen=True)
class Scenario:
    """World geometry, crowd roster, operator archetype, and run constants."""

    name: str
    robot_start: tuple
    robot_goal: tuple
    obstacles: tuple = ()
    crowd: tuple = ()
    operator_policy: str = "optimal"
    horizon: int = 20
    dt: float = 0.25
    seed: int = 0
    v_max: float = 2.0
    operator_speed: float = 1.2
    goal_tolerance: float = 0.5
    timeout: float = 60.0
    k_autonomy_modes: int = 2
    operator_goals: tuple = ()
    operator_goal_stds: tuple = (0.5, 0.5)
    commit_x: float | None = None
    operator_route_side: int = -1
    obs_noise_operator: float = 0.12
    obs_noise_robot: float = 0.05
    obs_noise_crowd: float = 0.08
    gp_lengthscale: float = 1.6
    gp_signal_var: float = 1.0

    def __post_init__(self):
        if self.operator_policy not in OPERATOR_POLICIES:
            raise ConfigurationError(f"unknown operator policy {self.operator_policy!r}")
        if not self.dt > 0:
            raise ContractViolation("dt must be positive")
        if self.horizon < 1:
            raise ContractViolation("horizon must be at least 1")
        for label, point in (("robot_start", self.robot_start), ("robot_goal", self.robot_goal)):
            if obstacle_clearance(point, self.obstacles) <= 0.0:
                raise ContractViolation(f"{label} lies inside an obstacle")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "crowd", tuple(self.crowd))
        object.__setattr__(self, "operator_goals", tuple(tuple(g) for g in self.operator_goals))
        object.__setattr__(self, "robot_start", tuple(float(v) for v in self.robot_start))
        object.__setattr__(self, "robot_goal", tuple(float(v) for v in self.robot_goal))

    def gp_prior(self):
        return GPPrior(self.gp_lengthscale, self.gp_signal_var)

    def to_dict(self):
        return {
            "name": self.name,
            "robot_start": list(self.robot_start),
            "robot_goal": list(self.robot_goal),
            "obstacles": [ob.to_dict() for ob in self.obstacles],
            "crowd": [c.to_dict() for c in self.crowd],
            "operator_policy": self.operator_policy,
            "horizon": self.horizon,
            "dt": self.dt,
            "seed": self.seed,
            "v_max": self.v_max,
            "operator_speed": self.operator_speed,
            "goal_tolerance": self.goal_tolerance,
            "timeout": self.timeout,
            "k_autonomy_modes": self.k_autonomy_modes,
            "operator_goals": [list(g) for g in self.operator_goals],
            "operator_goal_stds": list(self.operator_goal_stds),
            "commit_x": self.commit_x,
            "operator_route_side": self.operator_route_side,
            "obs_noise_operator": self.obs_noise_operator,
            "obs_noise_robot": self.obs_noise_robot,
            "obs_noise_crowd": self.obs_noise_crowd,
            "gp_lengthscale": self.gp_lengthscale,
            "gp_signal_var": self.gp_signal_var,
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["obstacles"] = tuple(obstacle_from_dict(o) for o in data.get("obstacles", ()))
        data["crowd"] = tuple(
            CrowdSpec(tuple(c["start"]), tuple(c["goal"]), c.get("speed", 1.0), c.get("heading_noise", 0.15))
            for c in data.get("crowd", ())
        )
        data["robot_start"] = tuple(data["robot_start"])
        data["robot_goal"] = tuple(data["robot_goal"])
        data["operator_goals"] = tuple(tuple(g) for g in data.get("operator_goals", ()))
        data["operator_goal_stds"] = tuple(data.get("operator_goal_stds", (0.5, 0.5)))
        return cls(**data)


@dataclass(frozen=True)
class WorldState:
    """Simulation state; noise streams derive from (seed, step_index, agent)."""

    scenario: Scenario
    t: float
    step_index: int
    robot: np.ndarray
    crowd: tuple

    def __post_init__(self):
        robot = np.asarray(self.robot, dtype=float).reshape(2)
        robot.setflags(write=False)
        crowd = tuple(np.asarray(c, dtype=float).reshape(2) for c in self.crowd)
        for c in crowd:
            c.setflags(write=False)
        object.__setattr__(self, "robot", robot)
        object.__setattr__(self, "crowd", crowd)

    def to_dict(self):
        return {
            "t": self.t,
            "step_index": self.step_index,
            "robot": self.robot.tolist(),
            "crowd": [c.tolist() for c in self.crowd],
        }


def initial_world(scenario):
    return WorldState(
        scenario,
        0.0,
        0,
        np.asarray(scenario.robot_start),
        tuple(np.asarray(c.start, dtype=float) for c in scenario.crowd),
    )


def _spec_entropy(spec):
    """Identity-derived entropy for a crowd member's noise streams.

    Keyed on the member's parameters rather than its list index, so
    relabeling the crowd leaves every individual rollout unchanged.
    """
    vals = np.array(
        [*spec.start, *spec.goal, spec.speed, spec.heading_noise], dtype=np.float64
    )
    return [int(x) for x in vals.view(np.uint64)]


def step(world, control, dt=None):
    """Advance one tick: robot follows the command, crowd heads for its goals.

    Crowd heading noise is a pure function of (seed, step index, agent
    index), so rollouts are bit-identical for a fixed scenario seed.
    Collisions never block motion; metrics record them.
    """
    scenario = world.scenario
    dt = scenario.dt if dt is None else float(dt)
    command = np.asarray(control.next_command, dtype=float)
    speed = float(np.linalg.norm(command))
    if speed > scenario.v_max + 1e-9:
        raise ContractViolation(f"control speed {speed:.3f} exceeds v_max {scenario.v_max}")
    new_robot = world.robot + command * dt

    new_crowd = []
    for i, (spec, pos) in enumerate(zip(scenario.crowd, world.crowd)):
        goal = np.asarray(spec.goal, dtype=float)
        offset = goal - pos
        dist = float(np.linalg.norm(offset))
        if dist < 1e-9:
            new_crowd.append(pos)
            continue
        heading = np.arctan2(offset[1], offset[0])
        rng = np.random.default_rng([scenario.seed, 104729, world.step_index, *_spec_entropy(spec)])
        heading += spec.heading_noise * rng.standard_normal()
        stride = min(spec.speed * dt, dist)
        new_crowd.append(pos + stride * np.array([np.cos(heading), np.sin(heading)]))
    return WorldState(scenario, world.t + dt, world.step_index + 1, new_robot, tuple(new_crowd))


def _observation_noise(scenario, step_index, *entropy):
    rng = np.random.default_rng([scenario.seed, 15485863, step_index, *entropy])
    return rng.standard_normal(2)


def _segment_point_distance(a, b, p):
    a, b, p = (np.asarray(v, dtype=float) for v in (a, b, p))
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-12:
        return float(np.linalg.norm(p - a))
    u = np.clip(float((p - a) @ ab) / denom, 0.0, 1.0)
    return float(np.linalg.norm(a + u * ab - p))


def _polyline_points(vertices, arc):
    """Point at arc length `arc` along the polyline (clamped to the end)."""
    pts = [np.asarray(v, dtype=float) for v in vertices]
    remaining = max(arc, 0.0)
    for a, b in zip(pts[:-1], pts[1:]):
        seg = float(np.linalg.norm(b - a))
        if remaining <= seg or seg < 1e-12:
            if seg < 1e-12:
                continue
            return a + (b - a) * (remaining / seg)
        remaining -= seg
    return pts[-1]


def _polyline_length(vertices):
    pts = [np.asarray(v, dtype=float) for v in vertices]
    return float(sum(np.linalg.norm(b - a) for a, b in zip(pts[:-1], pts[1:])))


def plan_routes(start, goal, obstacles, max_routes=4):
    """Candidate detour polylines around blocking circular obstacles.

    Works in corridor levels: every blocking circle contributes a level
    on each side (radius plus margin), every blocker pair with a wide
    enough gap contributes the gap midline, and each passable level
    becomes a route that runs laterally to the level, crosses the
    blocked span, and rejoins the goal line.  Returns (vertices, length)
    sorted by length; rectangles act as walls that filter levels.
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    axis = goal - start
    norm = float(np.linalg.norm(axis))
    if norm < 1e-9:
        return [([start, goal], 0.0)]
    direction = axis / norm
    normal = np.array([-direction[1], direction[0]])

    blockers = []
    for ob in obstacles:
        if isinstance(ob, Circle):
            d = _segment_point_distance(start, goal, ob.center)
            if d < ob.radius + ROUTE_BLOCK_MARGIN:
                center = np.asarray(ob.center, dtype=float)
                along = float((center - start) @ direction)
                lateral = float((center - start) @ normal)
                blockers.append((along, lateral, ob.radius))
    blockers.sort()  # canonical order: results must not depend on listing order
    if not blockers:
        return [([start, goal], norm)]

    levels = []
    for _along, lateral, radius in blockers:
        levels.append(lateral + (radius + DETOUR_MARGIN))
        levels.append(lateral - (radius + DETOUR_MARGIN))
    for i in range(len(blockers)):
        for j in range(i + 1, len(blockers)):
            (_, lat_i, r_i), (_, lat_j, r_j) = blockers[i], blockers[j]
            upper, lower = max(
                (lat_i, r_i), (lat_j, r_j), key=lambda item: item[0]
            ), min((lat_i, r_i), (lat_j, r_j), key=lambda item: item[0])
            gap_lo = lower[0] + lower[1]
            gap_hi = upper[0] - upper[1]
            if gap_hi - gap_lo >= 0.8:
                levels.append(0.5 * (gap_lo + gap_hi))

    span_lo = max(min(a - 0.8 * r for a, _l, r in blockers), 0.25)
    span_hi = min(max(a + 0.8 * r for a, _l, r in blockers), norm - 0.05)
    span_hi = max(span_hi, span_lo + 0.1)

    routes = []
    taken = []
    for level in sorted(levels, key=lambda value: (abs(value), value)):
        if any(abs(level - other) < 0.2 for other in taken):
            continue
        vias = [
            start + span_lo * direction + level * normal,
            start + span_hi * direction + level * normal,
        ]
        vertices = [start, *vias, goal]
        ok = all(obstacle_clearance(v, obstacles) > 0.05 for v in vias)
        if ok:
            for a, b in zip(vertices[:-1], vertices[1:]):
                mids = [a + (b - a) * u for u in np.linspace(0.05, 0.95, 12)]
                if any(obstacle_clearance(m, obstacles) <= 0.02 for m in mids):
                    ok = False
                    break
        if ok:
            taken.append(level)
            routes.append((vertices, _polyline_length(vertices)))
    if not routes:
        routes.append(([start, goal], norm))
    routes.sort(key=lambda item: item[1])
    return routes[:max_routes]


def route_trajectory(vertices, times, cruise_speed):
    """Sample a polyline onto the time grid at cruise speed, parking at the end."""
    times = np.asarray(times, dtype=float)
    total = _polyline_length(vertices)
    span = float(times[-1] - times[0]) if times.shape[0] > 1 else 1.0
    speed = min(cruise_speed, total / span) if span > 0 else cruise_speed
    pts = np.stack([_polyline_points(vertices, speed * (t - times[0])) for t in times])
    return Trajectory(times, pts)


def _route_weight_log(traj, obstacles, params):
    """Length penalty plus obstacle repulsion, on the log scale."""
    clear = np.array([obstacle_clearance(p, obstacles) for p in traj.points])
    clear = np.maximum(clear, 0.0)
    rep = np.sum(
        np.log1p(-params.crowd_alpha * np.exp(-(clear**2) / (2.0 * params.crowd_lengthscale**2)))
    )
    length = float(np.sum(np.linalg.norm(np.diff(traj.points, axis=0), axis=1)))
    return float(rep - ROUTE_LENGTH_PENALTY * length)


def route_mode_mixture(scenario, position, times, params, crowd_means=()):
    """The autonomy's predictive mixture: one mode per surviving route.

    Mode means are detour routes resampled on the grid; covariances are
    a narrow squared-exponential band (widening with lookahead) pinned
    at the current position.  Pedestrian predictions enter twice: their
    point of closest approach becomes a temporary obstacle for route
    enumeration, and every route is reweighted by crowd repulsion.
    Log-weights combine path length, obstacle repulsion, and that crowd
    term.
    """
    obstacles = list(scenario.obstacles)
    if crowd_means:
        straight = route_trajectory(
            [np.asarray(position, dtype=float), np.asarray(scenario.robot_goal, dtype=float)],
            times,
            scenario.operator_speed,
        )
        for ped in crowd_means:
            dists = np.linalg.norm(straight.points - ped.points, axis=1)
            i = int(np.argmin(dists))
            if dists[i] < 1.2:
                # A short capsule along the predicted motion, not a single
                # point: crossing pedestrians sweep through the encounter.
                for j in (max(i - 2, 0), i, min(i + 2, len(ped) - 1)):
                    obstacles.append(
                        Circle((float(ped.points[j, 0]), float(ped.points[j, 1])), 0.3)
                    )
    routes = plan_routes(position, scenario.robot_goal, tuple(obstacles))
    prior = GPPrior(ROUTE_LENGTHSCALE, ROUTE_SIGMA**2)
    growth = (ROUTE_GROWTH * (times - times[0])) ** 2
    cov_time = prior.kernel(times, times) + np.diag(growth) + 1e-8 * np.eye(times.shape[0])
    base_cov = np.kron(cov_time, np.eye(2))
    comps = []
    log_w = []
    for vertices, _length in routes[: scenario.k_autonomy_modes]:
        traj = route_trajectory(vertices, times, scenario.operator_speed)
        density = GaussianDensity(traj.stacked(), base_cov)
        density = goal_conditioned_posterior(
            density, times, np.asarray(position), times[0], ROUTE_PIN_STD
        )
        weight = _route_weight_log(traj, scenario.obstacles, params)
        contributions = []
        for ped_mean in crowd_means:
            d2 = np.sum((traj.points - ped_mean.points) ** 2, axis=1)
            contributions.append(
                float(
                    np.sum(
                        np.log1p(
                            -params.crowd_alpha
                            * np.exp(-d2 / (2.0 * params.crowd_lengthscale**2))
                        )
                    )
                )
            )
        weight += sum(sorted(contributions))  # order-canonical summation
        comps.append(density)
        log_w.append(weight)
    return GaussianMixture(tuple(comps), np.array(log_w))


def route_side(vertices, start, goal):
    """Sign of the first via point relative to the start-goal axis (0: straight)."""
    if len(vertices) <= 2:
        return 0
    start = np.asarray(start, dtype=float)
    axis = np.asarray(goal, dtype=float) - start
    via = np.asarray(vertices[1], dtype=float) - start
    cross = axis[0] * via[1] - axis[1] * via[0]
    return int(np.sign(cross))


def operator_input(scenario, world, virtual=None):
    """Scripted operator archetypes; returns a velocity with |v| <= operator_speed.

    The operator steers their desired position (`virtual`, defaulting to
    the robot pose), so the commanded trajectory parks at its target
    instead of integrating past it.  Side-preferring policies stay
    committed to their side instead of re-ranking routes every tick.
    """
    policy = scenario.operator_policy
    anchor = world.robot if virtual is None else np.asarray(virtual, dtype=float)
    goal = np.asarray(scenario.robot_goal, dtype=float)

    def toward(target, remaining=None):
        offset = np.asarray(target, dtype=float) - anchor
        dist = float(np.linalg.norm(offset))
        if dist < 1e-9:
            return np.zeros(2)
        # Ease off within ~1.5 m of journey's end so the trail parks smoothly.
        slack = dist if remaining is None else remaining
        return offset / dist * min(scenario.operator_speed, slack / (6.0 * scenario.dt))

    if policy == "unsafe":
        return toward(goal)
    if policy == "interactive":
        return np.zeros(2)
    routes = plan_routes(anchor, goal, scenario.obstacles)
    if policy == "optimal":
        vertices, length = routes[0]
        return toward(
            _polyline_points(vertices, scenario.operator_speed * scenario.dt * 4), length
        )
    if policy == "safe-suboptimal":
        chosen = None
        for verts, length in routes:
            if route_side(verts, anchor, goal) == scenario.operator_route_side:
                chosen = (verts, length)
                break
        if chosen is None:
            chosen = routes[1] if len(routes) > 1 else routes[0]
        return toward(
            _polyline_points(chosen[0], scenario.operator_speed * scenario.dt * 4), chosen[1]
        )
    # bimodal: ambiguous straight-ahead input until the commit line, then
    # commit to the first operator goal.
    if scenario.commit_x is not None and anchor[0] >= scenario.commit_x and scenario.operator_goals:
        via = np.asarray(scenario.operator_goals[0], dtype=float)
        if float(np.linalg.norm(via - anchor)) > scenario.operator_speed * scenario.dt * 2 and anchor[0] < via[0]:
            return toward(via)
        return toward(goal)
    return toward(goal)


@dataclass(frozen=True)
class RunParams:
    """Method parameters shared by the CLI, the service, and episodes."""

    interaction: InteractionParams = field(default_factory=InteractionParams)
    k_h: float | None = None
    n_samples: int = 64
    search_budget: int = 2000
    refine_passes: int = 20
    obs_window: int = 6
    ltbo_goal_std: float = 0.75
    log_psc_reference: bool = False

    def gains(self, autonomy):
        if self.k_h is None:
            return default_gains(autonomy, self.interaction)
        return BlendGains(self.k_h)


def build_models(scenario, world, obs_log, params, input_magnitude=None):
    """Per-tick predictive models for operator, autonomy, and crowd.

    The grid starts at the current time (the first waypoint is "now") so
    the next command is the first post-current waypoint displacement.
    """
    times = world.t + scenario.dt * np.arange(scenario.horizon + 1)
    prior = scenario.gp_prior()
    base = gp_posterior(obs_log, OPERATOR, prior, times, last_k=params.obs_window)
    n_obs = obs_log.count(OPERATOR)
    goals_ahead = [
        (g, s)
        for g, s in zip(scenario.operator_goals, scenario.operator_goal_stds)
        if g[0] > world.robot[0] + 0.3
    ]
    if scenario.operator_policy == "bimodal" and len(goals_ahead) == 2:
        # Ambiguity phase: a half/half mix of the side-goal conditionings,
        # each pinned at its projected arrival time within the horizon.
        comps = []
        for goal, goal_std in goals_ahead:
            arrive = world.t + float(np.linalg.norm(np.asarray(goal) - world.robot)) / max(
                scenario.operator_speed, 1e-6
            )
            if arrive > times[-1]:
                comps.append(base)
                continue
            goal_time = times[int(np.argmin(np.abs(times - arrive)))]
            comps.append(goal_conditioned_posterior(base, times, goal, goal_time, goal_std))
        operator = TrajectoryBelief(times, GaussianMixture(tuple(comps), np.log([0.5, 0.5])), n_obs)
    else:
        operator = TrajectoryBelief.unimodal(times, base, n_obs)

    crowd_beliefs = []
    crowd_means = []
    for i in range(len(scenario.crowd)):
        density = gp_posterior(obs_log, crowd_agent(i), prior, times, last_k=params.obs_window)
        belief = TrajectoryBelief.unimodal(times, density)
        crowd_beliefs.append(belief)
        crowd_means.append(belief.mean_trajectory())

    autonomy_mixture = route_mode_mixture(
        scenario, world.robot, times, params.interaction, crowd_means
    )
    autonomy = TrajectoryBelief(times, autonomy_mixture)
    return operator, autonomy, tuple(crowd_beliefs), times


def _hold_position_control(world, times, v_max):
    pts = np.tile(world.robot, (times.shape[0], 1))
    return SharedControl.from_trajectory(Trajectory(times, pts), v_max)


def arbitrate(method, scenario, world, models, params, u_h, tick_seed):
    """Dispatch one arbitration call; returns (report, infeasible_flag)."""
    operator, autonomy, crowd_beliefs, times = models
    gains = params.gains(autonomy)
    if method == "lb":
        f_bar = autonomy.map_trajectory()
        u_r = SharedControl.from_trajectory(f_bar, scenario.v_max).next_command
        blended = linear_blend(u_h, u_r, gains)
        speed = float(np.linalg.norm(blended))
        feasible = speed <= scenario.v_max + 1e-9
        if not feasible:
            blended = blended * (scenario.v_max / speed)
        pts = world.robot[None, :] + (times - times[0])[:, None] * blended[None, :]
        control = SharedControl(Trajectory(times, pts), blended, feasible)
        report = ArbitrationReport(
            "lb",
            control,
            {
                "k_h": gains.k_h,
                "k_r": gains.k_r,
                "autonomy_mode_logpdf": autonomy.mixture.logpdf(f_bar.stacked()),
            },
        )
        return report, False
    if method == "ltb":
        return ltb(operator, autonomy, params.interaction, gains, scenario.v_max), False
    if method == "ltbo":
        h_bar = operator.map_trajectory()
        statistic = OperatorStatistic(
            "goal-point",
            h_bar.points[-1],
            std=params.ltbo_goal_std,
            source_indices=tuple(range(operator.n_observations)),
        )
        return (
            ltbo(operator, statistic, autonomy, params.interaction, gains, scenario.v_max),
            False,
        )
    if method == "ctb":
        return (
            ctb(
                operator,
                autonomy,
                params.interaction,
                params.n_samples,
                seed=tick_seed,
                v_max=scenario.v_max,
            ),
            False,
        )
    if method == "psc":
        try:
            report = psc_map(
                operator,
                autonomy,
                crowd_beliefs,
                params.interaction,
                search_budget=params.search_budget,
                seed=tick_seed,
                refine_passes=params.refine_passes,
                gains=gains,
                v_max=scenario.v_max,
            )
            return report, False
        except InfeasibilityError:
            control = _hold_position_control(world, times, scenario.v_max)
            return ArbitrationReport("psc", control, {"infeasible": 1.0}), True
    raise ConfigurationError(f"unknown method {method!r}; valid methods: {', '.join(METHOD_NAMES)}")


@dataclass
class EpisodeStep:
    world: WorldState
    report: ArbitrationReport
    operator_mean: Trajectory
    extras: dict
    operator_sigmas: np.ndarray = None

    def to_dict(self):
        return {
            "tick": self.world.step_index,
            "world": self.world.to_dict(),
            "report": self.report.to_json_dict(),
            "operator_mean": self.operator_mean.to_dict(),
            "operator_sigmas": None
            if self.operator_sigmas is None
            else [float(s) for s in self.operator_sigmas],
            "extras": {k: (None if v is None else float(v)) for k, v in sorted(self.extras.items())},
        }


@dataclass
class EpisodeLog:
    scenario: Scenario
    method: str
    steps: list
    final_world: WorldState
    reached_goal: bool
    infeasible_ticks: int = 0

    def robot_path(self):
        pts = [s.world.robot for s in self.steps] + [self.final_world.robot]
        return np.stack(pts)

    def to_jsonl_lines(self):
        header = {
            "scenario": self.scenario.to_dict(),
            "method": self.method,
            "reached_goal": bool(self.reached_goal),
            "infeasible_ticks": self.infeasible_ticks,
        }
        yield json.dumps({"header": header}, sort_keys=True)
        for s in self.steps:
            yield json.dumps(s.to_dict(), sort_keys=True)
        yield json.dumps({"final_world": self.final_world.to_dict()}, sort_keys=True)

    def to_jsonl(self):
        return "\n".join(self.to_jsonl_lines()) + "\n"


@dataclass(frozen=True)
class Metrics:
    """Safety, efficiency, and agreeability summary of one episode."""

    min_clearance: float
    collision: bool
    path_length: float
    time_to_goal: float | None
    agreeability_score: float
    reached_goal: bool
    steps: int

    def to_dict(self):
        return {
            "min_clearance": self.min_clearance,
            "collision": self.collision,
            "path_length": self.path_length,
            "time_to_goal": self.time_to_goal,
            "agreeability_score": self.agreeability_score,
            "reached_goal": self.reached_goal,
            "steps": self.steps,
        }


def compute_metrics(log, params=None):
    """Pure function of the episode log; recomputable offline, exactly."""
    params = params if params is not None else InteractionParams()
    scenario = log.scenario
    worlds = [s.world for s in log.steps] + [log.final_world]
    min_clear = float("inf")
    for w in worlds:
        clear = obstacle_clearance(w.robot, scenario.obstacles)
        for ped in w.crowd:
            clear = min(clear, float(np.linalg.norm(w.robot - ped)))
        min_clear = min(min_clear, clear)
    path = np.stack([w.robot for w in worlds])
    path_length = float(np.sum(np.linalg.norm(np.diff(path, axis=0), axis=1)))
    agree = [s.extras["agreeability_step"] for s in log.steps if "agreeability_step" in s.extras]
    agree_score = float(np.mean(agree)) if agree else 0.0
    time_to_goal = float(log.final_world.t) if log.reached_goal else None
    return Metrics(
        min_clearance=min_clear,
        collision=bool(min_clear < params.safety_radius),
        path_length=path_length,
        time_to_goal=time_to_goal,
        agreeability_score=agree_score,
        reached_goal=bool(log.reached_goal),
        steps=len(log.steps),
    )


class EpisodeRunner:
    """One episode as a resettable state machine; the service drives it live."""

    def __init__(self, scenario, method, params=None):
        if method not in METHOD_NAMES:
            raise ConfigurationError(
                f"unknown method {method!r}; valid methods: {', '.join(METHOD_NAMES)}"
            )
        self.scenario = scenario
        self.method = method
        self.params = params if params is not None else RunParams()
        self.world = initial_world(scenario)
        self.obs_log = ObservationLog()
        self.steps = []
        self.reached_goal = False
        self.infeasible_ticks = 0
        self.last_models = None
        # The operator's desired trajectory: their commands integrated from
        # the start.  It may diverge from the platform when overridden;
        # observation noise grows with that divergence, since a far-off
        # joystick trail says less about platform-adjacent trajectories.
        self.operator_virtual = np.asarray(scenario.robot_start, dtype=float)
        _prefill_warmup(scenario, self.obs_log)

    @property
    def done(self):
        return self.reached_goal or self.world.t >= self.scenario.timeout - 1e-9

    def tick(self, operator_velocity=None):
        """Advance one tick; operator_velocity overrides the scripted policy."""
        scenario = self.scenario
        world = self.world
        quiet = False
        if operator_velocity is None:
            u_h = operator_input(scenario, world, self.operator_virtual)
        else:
            u_h = np.asarray(operator_velocity, dtype=float).reshape(2)
            speed = float(np.linalg.norm(u_h))
            if speed > scenario.v_max:
                u_h = u_h * (scenario.v_max / speed)
            quiet = float(np.linalg.norm(u_h)) < 0.05

        k = world.step_index
        self.operator_virtual = self.operator_virtual + u_h * scenario.dt
        offset = self.operator_virtual - world.robot
        drift = float(np.linalg.norm(offset))
        if drift > OPERATOR_DRIFT_CLAMP:
            self.operator_virtual = world.robot + offset * (OPERATOR_DRIFT_CLAMP / drift)
        divergence = min(drift, OPERATOR_DRIFT_CLAMP)
        if quiet:
            op_noise_std = UNINFORMATIVE_NOISE_STD
        else:
            op_noise_std = scenario.obs_noise_operator + OPERATOR_NOISE_SLOPE * divergence
        self.obs_log.add(OPERATOR, world.t, self.operator_virtual, op_noise_std)
        robot_noise = _observation_noise(scenario, k, 0) * scenario.obs_noise_robot
        self.obs_log.add(ROBOT, world.t, world.robot + robot_noise, scenario.obs_noise_robot)
        for i, (spec, pos) in enumerate(zip(scenario.crowd, world.crowd)):
            noise = (
                _observation_noise(scenario, k, 1, *_spec_entropy(spec))
                * scenario.obs_noise_crowd
            )
            self.obs_log.add(crowd_agent(i), world.t, pos + noise, scenario.obs_noise_crowd)

        models = build_models(scenario, world, self.obs_log, self.params)
        self.last_models = models
        operator, autonomy, crowd_beliefs, times = models
        report, infeasible = arbitrate(
            self.method, scenario, world, models, self.params, u_h, [scenario.seed, k]
        )
        if infeasible:
            self.infeasible_ticks += 1

        op_mean = operator.mean_trajectory()
        extras = {
            "agreeability_step": agreeability_log(
                report.control.trajectory, op_mean, self.params.interaction
            ),
            "u_h_x": float(u_h[0]),
            "u_h_y": float(u_h[1]),
            "operator_divergence": divergence,
        }
        sigmas = _waypoint_sigmas(operator)
        first = operator.mixture.means()[
            int(np.argmax(operator.mixture.log_weights))
        ].reshape(-1, 2)[1]
        next_pos = world.robot + report.control.next_command * scenario.dt
        extras["operator_dev"] = float(np.linalg.norm(next_pos - first))
        extras["operator_sigma"] = float(sigmas[1])
        if self.params.log_psc_reference and self.method != "psc":
            ref = psc_map(
                operator,
                autonomy,
                crowd_beliefs,
                self.params.interaction,
                search_budget=self.params.search_budget,
                seed=[scenario.seed, k],
                refine_passes=self.params.refine_passes,
                v_max=scenario.v_max,
                extra_candidates=[report.control.trajectory.stacked()],
            )
            extras["jld_psc_reference"] = ref.diagnostics.get("joint_log_density")
            extras["jld_executed"] = _fixed_joint_value(
                models, report.control.trajectory, self.params.interaction
            )

        self.steps.append(EpisodeStep(world, report, op_mean, extras, sigmas))
        self.world = step(world, report.control)
        goal = np.asarray(scenario.robot_goal)
        if float(np.linalg.norm(self.world.robot - goal)) <= scenario.goal_tolerance:
            self.reached_goal = True
        return self.steps[-1]

    def finish(self):
        log = EpisodeLog(
            self.scenario,
            self.method,
            self.steps,
            self.world,
            self.reached_goal,
            self.infeasible_ticks,
        )
        return log, compute_metrics(log, self.params.interaction)


def _waypoint_sigmas(operator):
    """Per-waypoint tail widths of the operator belief's dominant mode.

    sigma_w is the square root of the largest eigenvalue of waypoint w's
    2x2 covariance block.
    """
    top = int(np.argmax(operator.mixture.log_weights))
    cov = operator.mixture.components[top].cov
    n_way = cov.shape[0] // 2
    sigmas = np.empty(n_way)
    for w in range(n_way):
        block = cov[2 * w : 2 * w + 2, 2 * w : 2 * w + 2]
        sigmas[w] = np.sqrt(max(float(np.linalg.eigvalsh(block)[-1]), 0.0))
    return sigmas


def _fixed_joint_value(models, f_traj, params):
    """Joint value of a trajectory under the fixed (mode) operator and crowd."""
    from .interaction import JointModels, joint_log_density

    operator, autonomy, crowd_beliefs, times = models
    jm = JointModels(
        times,
        operator.mixture,
        autonomy.mixture,
        tuple(c.mixture for c in crowd_beliefs),
    )
    h = operator.map_trajectory()
    crowd = [c.mean_trajectory() for c in crowd_beliefs]
    return joint_log_density(h, f_traj, crowd, jm, params)


def run_episode(scenario, method, params=None):
    """Closed loop (observe, fit, arbitrate, step) until goal or timeout."""
    runner = EpisodeRunner(scenario, method, params)
    while not runner.done:
        runner.tick()
    return runner.finish()


# ---------------------------------------------------------------------------
# Scenario constructions.  Geometry is schematic by design: each builder
# realizes one operator/autonomy archetype with concrete coordinates.
# ---------------------------------------------------------------------------


def scenario_open(seed=0):
    """Obstacle-free straight run; any method should reach the goal."""
    return Scenario(
        name="open",
        robot_start=(0.0, 0.0),
        robot_goal=(6.0, 0.0),
        operator_policy="optimal",
        k_autonomy_modes=1,
        seed=seed,
    )


def scenario_fig2(seed=0):
    """Two safe autonomy modes around a pillar; the operator tracks the
    longer (suboptimal) one.  A half/half trajectory blend drives between
    the modes, straight at the pillar."""
    return Scenario(
        name="fig2",
        robot_start=(0.0, 0.0),
        robot_goal=(8.0, 0.6),
        obstacles=(Circle((4.0, 0.0), 0.9),),
        operator_policy="safe-suboptimal",
        k_autonomy_modes=2,
        seed=seed,
    )


def scenario_fig3(seed=0):
    """The operator drives straight through a pillar (unsafe archetype)."""
    return Scenario(
        name="fig3",
        robot_start=(0.0, 0.0),
        robot_goal=(8.0, 0.0),
        obstacles=(Circle((4.0, -0.15), 0.9),),
        operator_policy="unsafe",
        k_autonomy_modes=2,
        operator_speed=1.0,
        gp_signal_var=2.25,
        seed=seed,
    )


def scenario_fig4(seed=0):
    """Bimodal operator (ambiguous side choice) with three autonomy modes
    through a two-pillar field; the scripted operator commits to the
    upper side at the commit line."""
    return Scenario(
        name="fig4",
        robot_start=(0.0, 0.0),
        robot_goal=(9.0, 0.4),
        obstacles=(Circle((4.5, 1.3), 0.8), Circle((4.5, -1.3), 0.8)),
        operator_policy="bimodal",
        k_autonomy_modes=3,
        operator_goals=((4.5, 2.85), (4.5, -2.85)),
        operator_goal_stds=(0.45, 0.9),
        commit_x=1.5,
        seed=seed,
    )


def scenario_crossing(seed=0):
    """Open plane with pedestrians crossing the robot's path."""
    return Scenario(
        name="crossing",
        robot_start=(0.0, 0.0),
        robot_goal=(8.0, 0.0),
        crowd=(
            CrowdSpec((4.0, 3.0), (4.0, -3.0), speed=0.8),
            CrowdSpec((6.0, -3.0), (6.0, 3.0), speed=0.6),
            CrowdSpec((2.5, -2.5), (5.5, 2.5), speed=0.6),
        ),
        operator_policy="optimal",
        k_autonomy_modes=2,
        seed=seed,
    )


def scenario_corridor(seed=0):
    """Corridor walls with a central pillar: two individually safe routes
    whose average is unsafe."""
    return Scenario(
        name="corridor",
        robot_start=(0.0, 0.0),
        robot_goal=(8.0, 0.0),
        obstacles=(
            Rect(1.0, 2.0, 7.0, 2.6),
            Rect(1.0, -2.6, 7.0, -2.0),
            Circle((4.0, 0.0), 0.9),
        ),
        operator_policy="safe-suboptimal",
        k_autonomy_modes=2,
        seed=seed,
    )


SCENARIOS = {
    "open": scenario_open,
    "fig2": scenario_fig2,
    "fig3": scenario_fig3,
    "fig4": scenario_fig4,
    "crossing": scenario_crossing,
    "corridor": scenario_corridor,
}


def load_scenario(name_or_path, seed=None):
    """Scenario by registry name or from a JSON file."""
    if name_or_path in SCENARIOS:
        scenario = SCENARIOS[name_or_path](seed=seed if seed is not None else 0)
    else:
        try:
            with open(name_or_path, "r", encoding="utf-8") as fh:
                scenario = Scenario.from_dict(json.load(fh))
        except FileNotFoundError:
            raise ConfigurationError(
                f"unknown scenario {name_or_path!r}; built-ins: {', '.join(sorted(SCENARIOS))}"
            ) from None
        if seed is not None:
            scenario = replace(scenario, seed=seed)
    return scenario


def _prefill_warmup(scenario, obs_log, include_t0=False):
    """Short walking-in operator trail so the first-tick model is not cold."""
    world = initial_world(scenario)
    start = np.asarray(scenario.robot_start, dtype=float)
    intent = operator_input(scenario, world, start)
    lead = scenario.dt * float(np.linalg.norm(intent))
    noise = scenario.obs_noise_operator + OPERATOR_NOISE_SLOPE * lead
    last = 0 if include_t0 else 1
    for j in range(WARMUP_TICKS, last - 1, -1):
        t = -j * scenario.dt
        point = start + (t + scenario.dt) * intent  # leads the pose by one step
        obs_log.add(OPERATOR, t, point, noise)
        obs_log.add(ROBOT, t, start + t * intent, scenario.obs_noise_robot)
    return intent


def archetype_models(scenario, params=None):
    """Deterministic models at the initial state, for the named property checks.

    Synthesizes a short operator warmup (the scripted policy integrated
    into the start) and builds the same models the episode loop would
    see on its first tick.
    """
    params = params if params is not None else RunParams()
    world = initial_world(scenario)
    obs = ObservationLog()
    _prefill_warmup(scenario, obs, include_t0=True)
    for i, ped in enumerate(world.crowd):
        obs.add(crowd_agent(i), 0.0, ped, scenario.obs_noise_crowd)
    return build_models(scenario, world, obs, params)


def fig2_models(params=None):
    return archetype_models(scenario_fig2(), params)


def fig4_models(params=None):
    return archetype_models(scenario_fig4(), params)


def unsafe_average_witness(params=None):
    """Two clearance-safe corridor trajectories whose 0.5/0.5 blend is unsafe.

    Returns (upper, lower, blend, clearances) with clearances computed
    against the corridor obstacles.
    """
    params = params if params is not None else InteractionParams()
    scenario = scenario_corridor()
    times = scenario.dt * np.arange(scenario.horizon + 1)
    upper = route_trajectory(
        [np.array(scenario.robot_start), np.array([4.0, 1.45]), np.array(scenario.robot_goal)],
        times,
        scenario.operator_speed,
    )
    lower = route_trajectory(
        [np.array(scenario.robot_start), np.array([4.0, -1.45]), np.array(scenario.robot_goal)],
        times,
        scenario.operator_speed,
    )
    blend = Trajectory(times, 0.5 * upper.points + 0.5 * lower.points)
    clearances = {
        "upper": min(obstacle_clearance(p, scenario.obstacles) for p in upper.points),
        "lower": min(obstacle_clearance(p, scenario.obstacles) for p in lower.points),
        "blend": min(obstacle_clearance(p, scenario.obstacles) for p in blend.points),
    }
    return upper, lower, blend, clearances
