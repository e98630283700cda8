"""Command-line entry point.

blendlab run     closed-loop episodes, JSONL logs plus a metrics CSV
blendlab check   named property suites (t1 | t2 | t3 | lemma1)
blendlab serve   the live teleop WebSocket service
blendlab report  render figures from a run directory

Exit codes: 0 success, 1 configuration error, 2 infeasibility occurred
during a run.  BLENDLAB_SEED supplies the default seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .errors import BlendlabError, ConfigurationError
from .interaction import InteractionParams
from .simulator import (
    METHOD_NAMES,
    SCENARIOS,
    RunParams,
    load_scenario,
    run_episode,
)

METRICS_FIELDS = (
    "scenario",
    "method",
    "seed",
    "steps",
    "reached_goal",
    "collision",
    "min_clearance",
    "path_length",
    "time_to_goal",
    "agreeability_score",
)


def _parse_seeds(text):
    seeds = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if ".." in chunk:
            lo, hi = chunk.split("..")
            seeds.extend(range(int(lo), int(hi) + 1))
        elif chunk:
            seeds.append(int(chunk))
    if not seeds:
        raise ValueError(f"no seeds in {text!r}")
    return seeds


def _format_cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _atomic_write(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _run_params(args, config):
    def pick(name, default=None):
        cli = getattr(args, name.replace("-", "_"), None)
        if cli is not None:
            return cli
        return config.get(name, default)

    interaction = InteractionParams(
        gamma=float(pick("gamma", 0.5)),
        crowd_alpha=float(pick("crowd_alpha", 0.9)),
        crowd_lengthscale=float(pick("crowd_lengthscale", 0.6)),
        safety_radius=float(pick("safety_radius", 0.4)),
    )
    k_h = pick("kh")
    return RunParams(
        interaction=interaction,
        k_h=None if k_h is None else float(k_h),
        n_samples=int(pick("n_samples", 64)),
        search_budget=int(pick("search_budget", 2000)),
    )


def _episode_job(job):
    scenario, method, params = job
    log, metrics = run_episode(scenario, method, params)
    return log.to_jsonl(), metrics, log.infeasible_ticks


def cmd_run(args):
    config = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = json.load(fh)

    scenario_name = args.scenario or config.get("scenario")
    if not scenario_name:
        print("a scenario is required (--scenario or config file)", file=sys.stderr)
        return 1
    methods_text = args.method or ",".join(config.get("methods", [])) or "psc"
    methods = [m.strip() for m in methods_text.split(",") if m.strip()]
    for m in methods:
        if m not in METHOD_NAMES:
            print(
                f"unknown method {m!r}; valid methods: {', '.join(METHOD_NAMES)}",
                file=sys.stderr,
            )
            return 1
    seeds_text = args.seeds or config.get("seeds") or os.environ.get("BLENDLAB_SEED", "0")
    if isinstance(seeds_text, list):
        seeds = [int(s) for s in seeds_text]
    else:
        try:
            seeds = _parse_seeds(str(seeds_text))
        except ValueError as exc:
            print(str(exc), file=sys.stderr)
            return 1
    out_dir = args.out or config.get("out", "runs")

    try:
        params = _run_params(args, config)
    except BlendlabError as exc:
        print(str(exc), file=sys.stderr)
        return 1

    try:
        base = load_scenario(scenario_name)
    except ConfigurationError as exc:
        print(str(exc), file=sys.stderr)
        return 1

    os.makedirs(out_dir, exist_ok=True)
    jobs = [(replace(base, seed=seed), method) for seed in seeds for method in methods]
    if args.jobs and args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_episode_job, [(s, m, params) for s, m in jobs]))
    else:
        outcomes = [_episode_job((s, m, params)) for s, m in jobs]

    rows = []
    infeasible = 0
    for (scenario, method), (jsonl, metrics, bad_ticks) in zip(jobs, outcomes):
        infeasible += bad_ticks
        name = f"episode_{scenario.name}_{method}_seed{scenario.seed}.jsonl"
        _atomic_write(os.path.join(out_dir, name), jsonl)
        rows.append(
            {
                "scenario": scenario.name,
                "method": method,
                "seed": scenario.seed,
                "steps": metrics.steps,
                "reached_goal": metrics.reached_goal,
                "collision": metrics.collision,
                "min_clearance": metrics.min_clearance,
                "path_length": metrics.path_length,
                "time_to_goal": metrics.time_to_goal,
                "agreeability_score": metrics.agreeability_score,
            }
        )
    rows.sort(key=lambda r: (r["scenario"], r["method"], r["seed"]))
    lines = [",".join(METRICS_FIELDS)]
    for row in rows:
        lines.append(",".join(_format_cell(row[f]) for f in METRICS_FIELDS))
    _atomic_write(os.path.join(out_dir, "metrics.csv"), "\n".join(lines) + "\n")
    print(f"wrote {len(rows)} episodes to {out_dir}")

    if args.render:
        from .report import render_run_directory

        for path in render_run_directory(out_dir):
            print(f"rendered {path}")
    return 2 if infeasible else 0


def cmd_check(args):
    from .checks import SUITES, run_suite

    if args.suite not in SUITES:
        print(
            f"unknown suite {args.suite!r}; valid suites: {', '.join(sorted(SUITES))}",
            file=sys.stderr,
        )
        return 1
    results = run_suite(args.suite)
    all_ok = True
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} - {r.detail}")
        all_ok &= r.passed
    return 0 if all_ok else 1


def cmd_serve(args):
    from .service import serve

    if args.scenario not in SCENARIOS and not os.path.exists(args.scenario):
        print(
            f"unknown scenario {args.scenario!r}; built-ins: {', '.join(sorted(SCENARIOS))}",
            file=sys.stderr,
        )
        return 1
    if args.method not in METHOD_NAMES:
        print(
            f"unknown method {args.method!r}; valid methods: {', '.join(METHOD_NAMES)}",
            file=sys.stderr,
        )
        return 1
    try:
        serve(args.port, args.scenario, args.method, args.tick_ms)
    except OSError as exc:
        print(f"cannot bind port {args.port}: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        pass
    return 0


def cmd_report(args):
    from .report import render_run_directory

    if not os.path.isdir(args.run_dir):
        print(f"{args.run_dir} is not a directory", file=sys.stderr)
        return 1
    written = render_run_directory(args.run_dir, args.out)
    for path in written:
        print(f"rendered {path}")
    if not written:
        print("nothing to render (no .jsonl episodes found)", file=sys.stderr)
        return 1
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="blendlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run closed-loop episodes")
    p_run.add_argument("--scenario", help=f"name ({', '.join(sorted(SCENARIOS))}) or JSON file")
    p_run.add_argument("--method", help="comma-separated methods (lb,ltb,ltbo,ctb,psc)")
    p_run.add_argument("--seeds", help="e.g. 0..19 or 0,3,7 (default: BLENDLAB_SEED or 0)")
    p_run.add_argument("--out", help="output directory (default runs/)")
    p_run.add_argument("--config", help="JSON config file; flags override it")
    p_run.add_argument("--gamma", type=float, help="operator-autonomy coupling (m^2)")
    p_run.add_argument("--kh", type=float, help="operator gain for the blend methods")
    p_run.add_argument("--n-samples", type=int, dest="n_samples", help="ctb sample count")
    p_run.add_argument(
        "--search-budget", type=int, dest="search_budget", help="psc candidate draws"
    )
    p_run.add_argument("--render", action="store_true", help="also render figures")
    p_run.add_argument(
        "--jobs", type=int, default=1, help="episodes run in parallel processes"
    )
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="run a named property suite")
    p_check.add_argument("suite", help="t1 | t2 | t3 | lemma1")
    p_check.set_defaults(func=cmd_check)

    p_serve = sub.add_parser("serve", help="start the teleop WebSocket service")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--scenario", default="crossing")
    p_serve.add_argument("--method", default="psc")
    p_serve.add_argument("--tick-ms", type=float, default=50.0, dest="tick_ms")
    p_serve.set_defaults(func=cmd_serve)

    p_report = sub.add_parser("report", help="render figures from a run directory")
    p_report.add_argument("run_dir", help="directory produced by `blendlab run`")
    p_report.add_argument("--out", help="output directory (default: the run directory)")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
