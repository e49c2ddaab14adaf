"""Command-line front end: run, compare, sweep, validate, list.

Scenario names resolve against (in order) an explicit path, the directories
in TMDC_SCENARIO_PATH, and the scenarios bundled with the package.  Exit
codes: 0 success, 2 usage/scenario errors, 3 run aborted by the free-fall
guard.
"""

from __future__ import annotations

import argparse
import importlib.resources
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import kernels
from .controllers import VARIANTS
from .metrics import metrics_to_csv
from .scenario import (
    SWEEP_STAGES,
    Scenario,
    ScenarioError,
    SweepOrderError,
    compare_variants,
    gains_fragment,
    load_scenario,
    loads_scenario,
    run_scenario,
    sweep_stage,
)

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_ABORTED = 3

SCENARIO_SUFFIX = ".scn"
SCENARIO_PATH_ENV = "TMDC_SCENARIO_PATH"


def _search_dirs() -> list[Path]:
    dirs = []
    env = os.environ.get(SCENARIO_PATH_ENV, "")
    for part in env.split(os.pathsep):
        if part:
            dirs.append(Path(part))
    return dirs


def bundled_scenarios() -> dict[str, str]:
    """Name -> text of every scenario shipped inside the package."""
    out = {}
    root = importlib.resources.files("tmdc") / "scenarios"
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(SCENARIO_SUFFIX):
            out[entry.name[: -len(SCENARIO_SUFFIX)]] = entry.read_text(encoding="utf-8")
    return out


def resolve_scenario(name: str) -> Scenario:
    """Accept a filesystem path, a name on TMDC_SCENARIO_PATH, or a bundled name."""
    p = Path(name)
    if p.suffix == SCENARIO_SUFFIX or p.exists():
        return load_scenario(p)
    for d in _search_dirs():
        candidate = d / (name + SCENARIO_SUFFIX)
        if candidate.exists():
            return load_scenario(candidate)
    bundled = bundled_scenarios()
    if name in bundled:
        return loads_scenario(bundled[name], name=f"bundled:{name}")
    raise ScenarioError(
        f"scenario {name!r} not found (not a file, not on {SCENARIO_PATH_ENV}, "
        f"not bundled; bundled names: {', '.join(sorted(bundled))})"
    )


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    s = scenario
    if getattr(args, "variant", None):
        s = s.with_variant(args.variant)
    if getattr(args, "seed", None) is not None:
        s = replace(s, seed=args.seed)
    if getattr(args, "duration", None) is not None:
        if args.duration <= 0:
            raise ScenarioError("--duration must be positive")
        s = replace(s, duration=args.duration)
    return s


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    scenario = _apply_overrides(resolve_scenario(args.scenario), args)
    result = run_scenario(scenario)
    out = _out_dir(args)
    trace_path = out / f"{scenario.name}_trace.csv"
    metrics_path = out / f"{scenario.name}_metrics.csv"
    result.record.write_csv(trace_path, precision=args.csv_precision)
    metrics_path.write_text(
        metrics_to_csv(result.metrics, precision=args.csv_precision), encoding="utf-8"
    )
    m = result.metrics
    print(f"scenario: {scenario.name} (variant {scenario.controller.variant}, seed {scenario.seed})")
    print(f"trace:    {trace_path} ({len(result.record.rows)} rows)")
    print(f"metrics:  {metrics_path}")
    print(
        "rmse: x=%.4f y=%.4f z=%.4f m, peak z=%.4f m, yaw rmse=%.4f rad"
        % (m.rmse.x, m.rmse.y, m.rmse.z, m.peak.z, m.yaw_rmse)
    )
    if result.aborted:
        print(
            f"ABORTED at t={result.record.abort_time:.3f}: {result.record.abort_reason}",
            file=sys.stderr,
        )
        return EXIT_ABORTED
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario = _apply_overrides(resolve_scenario(args.scenario), args)
    variants = args.variants or list(VARIANTS)
    table = compare_variants(scenario, variants, jobs=args.jobs)
    out = _out_dir(args)
    path = out / f"{scenario.name}_compare.csv"
    path.write_text(table.to_csv(precision=args.csv_precision), encoding="utf-8")
    print(table.to_text())
    print(f"written: {path}")
    if any(r.aborted for r in table.rows):
        return EXIT_ABORTED
    return EXIT_OK


def _parse_range(spec: str) -> tuple[str, list[float]]:
    # name=lo:hi:n (geometric if lo>0 else linear) or name=v1,v2,...
    if "=" not in spec:
        raise ScenarioError(f"range {spec!r}: expected name=lo:hi:n or name=v1,v2,...")
    name, _, rest = spec.partition("=")
    name = name.strip()
    try:
        if ":" in rest:
            lo_s, hi_s, n_s = rest.split(":")
            lo, hi, n = float(lo_s), float(hi_s), int(n_s)
            if n < 1:
                raise ValueError("need at least one point")
            if n == 1:
                return name, [lo]
            if lo > 0 and hi > 0:
                ratio = (hi / lo) ** (1.0 / (n - 1))
                return name, [lo * ratio**i for i in range(n)]
            step = (hi - lo) / (n - 1)
            return name, [lo + step * i for i in range(n)]
        return name, [float(v) for v in rest.split(",") if v.strip()]
    except (ValueError, ZeroDivisionError) as e:
        raise ScenarioError(f"range {spec!r}: {e}") from None


def _pinned_sections(path: str | None) -> set[str]:
    if not path:
        return set()
    try:
        import tomllib as toml
    except ImportError:
        import tomli as toml
    try:
        with open(path, "rb") as fh:
            doc = toml.load(fh)
    except (OSError, toml.TOMLDecodeError) as e:
        raise ScenarioError(f"--gains-file {path}: {e}") from None
    ctrl = doc.get("controller", doc)
    return {k for k, v in ctrl.items() if isinstance(v, dict)}


def _merge_gains(scenario: Scenario, path: str | None) -> Scenario:
    """Overlay a tuned-gains TOML fragment onto the scenario's controller."""
    if not path:
        return scenario
    from .scenario import _load_controller  # internal reuse, same schema

    try:
        import tomllib as toml
    except ImportError:
        import tomli as toml
    with open(path, "rb") as fh:
        doc = toml.load(fh)
    frag = doc.get("controller", doc)
    base = scenario.controller
    merged = dict(frag)
    merged.setdefault("variant", base.variant)
    # Loader defaults come from CascadeConfig(); rebuild then backfill from the
    # scenario for sections the fragment does not pin.
    m0 = scenario.vehicle.mass + sum(p.mass for p in scenario.attachments)
    cfg = _load_controller(merged, scenario.vehicle, m0)
    updates = {}
    if "tmaf" not in frag:
        updates["tmaf_alpha"] = base.tmaf_alpha
        updates["tmaf_beta"] = base.tmaf_beta
    if "da" not in frag:
        updates["da_mu"] = base.da_mu
        updates["da_lambda"] = base.da_lambda
        updates["da_integral_limit"] = base.da_integral_limit
    if "pid_position" not in frag:
        updates["position_gains"] = base.position_gains
    if "pid_velocity" not in frag:
        updates["velocity_gains"] = base.velocity_gains
    if "pid_lateral" not in frag:
        updates["lateral_gains"] = base.lateral_gains
    if "pid_yaw" not in frag:
        updates["yaw_gains"] = base.yaw_gains
    updates["tilt_limit"] = base.tilt_limit
    updates["u_min"] = base.u_min
    updates["u_max"] = base.u_max
    updates["mi_mass"] = base.mi_mass
    updates["mi_f_max"] = base.mi_f_max
    updates["mi_external_force"] = base.mi_external_force
    cfg = replace(cfg, **updates)
    return replace(scenario, controller=cfg)


def cmd_sweep(args) -> int:
    scenario = _apply_overrides(resolve_scenario(args.scenario), args)
    pinned = _pinned_sections(args.gains_file)
    scenario = _merge_gains(scenario, args.gains_file)
    grids = {}
    for spec in args.range:
        name, values = _parse_range(spec)
        grids[name] = values
    result = sweep_stage(scenario, args.stage, grids, pinned_sections=pinned, jobs=args.jobs)
    out = _out_dir(args)
    table_path = out / f"{scenario.name}_sweep_{args.stage}.csv"
    table_path.write_text(result.to_csv(precision=args.csv_precision), encoding="utf-8")
    best = result.best
    if best is None:
        print("sweep: every candidate aborted or produced no rankable metric", file=sys.stderr)
        print(f"table: {table_path}")
        return EXIT_ABORTED
    from .scenario import _apply_stage

    tuned = _apply_stage(scenario.controller, args.stage, best.params)
    fragment = gains_fragment(args.stage, tuned)
    frag_path = out / f"{scenario.name}_gains_{args.stage}.toml"
    frag_path.write_text(fragment, encoding="utf-8")
    print(f"stage {args.stage}: {len(result.rows)} candidates")
    print("best: " + ", ".join(f"{k}={v:g}" for k, v in sorted(best.params.items())) + f" (rank {best.rank:.6g})")
    print(f"table:    {table_path}")
    print(f"fragment: {frag_path}")
    print(fragment, end="")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        scenario = resolve_scenario(args.scenario)
    except ScenarioError as e:
        print(f"invalid: {e}", file=sys.stderr)
        return EXIT_ERROR
    n_ev = len(scenario.events)
    n_seg = len(scenario.segments)
    print(
        f"ok: {scenario.name} (duration {scenario.duration:g} s, seed {scenario.seed}, "
        f"variant {scenario.controller.variant}, {n_seg} segments, {n_ev} events)"
    )
    return EXIT_OK


def cmd_list(args) -> int:
    names = bundled_scenarios()
    rows = []
    for name, text in names.items():
        try:
            s = loads_scenario(text, name=f"bundled:{name}")
            rows.append((name, f"{s.duration:g} s", s.controller.variant, len(s.events)))
        except ScenarioError as e:  # bundled files should never be broken
            rows.append((name, "?", f"error: {e}", 0))
    width = max((len(r[0]) for r in rows), default=4)
    print(f"{'name':<{width}}  {'duration':>8}  {'variant':<9}  events")
    for name, dur, variant, n_ev in rows:
        print(f"{name:<{width}}  {dur:>8}  {variant:<9}  {n_ev}")
    external = _search_dirs()
    if external:
        print(f"\nsearch path ({SCENARIO_PATH_ENV}): " + os.pathsep.join(str(d) for d in external))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tmdc",
        description="Deterministic quadrotor flight-control simulator",
    )
    parser.add_argument(
        "--backend",
        choices=("cython", "python"),
        help="force a physics kernel backend (default: best available)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, variants=True):
        p.add_argument("scenario", help="scenario name or .scn path")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--duration", type=float, default=None, help="override duration (s)")
        p.add_argument("--out", default=".", help="output directory (default: cwd)")
        p.add_argument(
            "--csv-precision", type=int, default=9, choices=range(3, 18),
            metavar="[3-17]", help="significant digits in CSV output (default 9)",
        )
        if variants:
            p.add_argument("--variant", default=None, help="override controller variant")

    p_run = sub.add_parser("run", help="run one scenario, write trace + metrics CSVs")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run several variants on one scenario")
    common(p_cmp, variants=False)
    p_cmp.add_argument(
        "--variants", nargs="+", metavar="V", default=None,
        help=f"variants to compare (default: all of {', '.join(VARIANTS)})",
    )
    p_cmp.add_argument("--jobs", type=int, default=1, help="parallel runs (threads)")
    p_cmp.set_defaults(func=cmd_compare)

    p_swp = sub.add_parser("sweep", help="grid-search one tuning stage")
    common(p_swp)
    p_swp.add_argument("--stage", required=True, choices=SWEEP_STAGES)
    p_swp.add_argument(
        "--range", action="append", required=True, metavar="NAME=LO:HI:N",
        help="parameter range (geometric when lo,hi>0) or NAME=v1,v2,...; repeatable",
    )
    p_swp.add_argument(
        "--gains-file", default=None,
        help="TOML fragment pinning earlier stages' tuned gains",
    )
    p_swp.add_argument("--jobs", type=int, default=1, help="parallel runs (threads)")
    p_swp.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="parse and validate a scenario file")
    p_val.add_argument("scenario", help="scenario name or .scn path")
    p_val.set_defaults(func=cmd_validate)

    p_lst = sub.add_parser("list", help="list bundled scenarios")
    p_lst.set_defaults(func=cmd_list)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.backend:
        try:
            kernels.use(args.backend)
        except ValueError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_ERROR
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except (ScenarioError, SweepOrderError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    if args.command in ("run", "compare", "sweep"):
        print(f"elapsed: {time.perf_counter() - t0:.2f} s")
    return code


if __name__ == "__main__":
    sys.exit(main())
