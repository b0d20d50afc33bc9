"""Command-line driver: band-edge sweeps, dispersion scans and one-shot
point diagnostics.

Exit codes: 0 on success, 1 on configuration errors, 2 when a sweep
completed but recorded per-point failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, LatmemError
from .kernel import ControlPulse, KernelGrids, build_kernel, export_result, optimal_efficiency
from .observables import compute_observables
from .pde import dump_fields, propagate
from .scenario import Scenario, derive_params
from .sweep import (
    SweepConfig,
    compute_point,
    locate_band_edge,
    run_band_scan,
    run_sweep,
)


def _load_scenario(args) -> Scenario:
    if args.preset is None and args.config is None:
        raise ConfigError("give --preset and/or --config")
    if args.config is not None and args.preset is None:
        return Scenario.from_json(args.config)
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
        if not isinstance(overrides, dict):
            raise ConfigError("config file must contain a JSON object")
        return Scenario.preset(args.preset, **overrides)
    return Scenario.preset(args.preset)


def _add_scenario_args(sub):
    sub.add_argument("--preset", choices=["raman", "eit"], help="built-in parameter set")
    sub.add_argument("--config", type=Path, help="scenario JSON (full file, or overrides for --preset)")
    sub.add_argument("--json", action="store_true", help="print a JSON summary to stdout")


def _cmd_sweep(args) -> int:
    scenario = _load_scenario(args)
    if args.a_nm is not None:
        scenario = scenario.with_lattice_constant(args.a_nm * 1e-9)
    label = args.preset or "custom"
    run_pde = None
    if args.no_pde:
        run_pde = False
    elif args.pde_all:
        run_pde = True
    cfg = SweepConfig(
        scenario=scenario,
        label=label,
        n_points=args.n,
        a_min=args.a_min_nm * 1e-9 if args.a_min_nm is not None else None,
        a_max=args.a_max_nm * 1e-9 if args.a_max_nm is not None else None,
        run_pde=run_pde,
        pde_every=args.pde_every,
        workers=args.workers,
    )
    result = run_sweep(cfg, out_dir=args.out)
    if args.band_scan:
        run_band_scan(scenario, label=label, out_dir=args.out, workers=args.workers)
    summary = result.summary()
    summary["csv"] = str(Path(args.out) / f"sweep_{label}.csv")
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        print(
            f"{label}: {summary['n_points']} points, "
            f"{summary['n_errors']} errors, a_edge = {summary['a_edge_nm']:.4f} nm "
            f"-> {summary['csv']}"
        )
    return 2 if result.has_errors else 0


def _cmd_bands(args) -> int:
    scenario = _load_scenario(args)
    if args.a_nm is not None:
        scenario = scenario.with_lattice_constant(args.a_nm * 1e-9)
    label = args.preset or "custom"
    paths = run_band_scan(
        scenario,
        label=label,
        out_dir=args.out,
        span=args.span,
        n_points=args.n,
        include_empty=not args.no_empty,
        workers=args.workers,
    )
    if args.json:
        print(json.dumps({name: str(p) for name, p in paths.items()}, indent=2))
    else:
        for name, p in paths.items():
            print(f"bands[{name}] -> {p}")
    return 0


def _cmd_point(args) -> int:
    scenario = _load_scenario(args)
    if args.a_nm is not None:
        scenario = scenario.with_lattice_constant(args.a_nm * 1e-9)
    x_edge, _ = locate_band_edge(scenario)
    row = compute_point(scenario, x_edge=x_edge, run_pde=args.pde)
    payload = {name: getattr(row, name) for name in row.__dataclass_fields__}
    payload["a_edge_nm"] = x_edge / derive_params(scenario).k_s * 1e9
    if args.out is not None and not row.error and not row.in_gap:
        p = derive_params(scenario)
        from .scenario import build_cell
        from .bloch import solve_bloch

        grid, m, v, _ = build_cell(scenario)
        mode = solve_bloch(v, p.k_s, scenario.a, grid=grid)
        obs = compute_observables(mode, m, p)
        pulse = ControlPulse.for_scenario(scenario)
        grids = KernelGrids.for_scenario(scenario)
        K = build_kernel(p, obs, pulse, grids)
        result = optimal_efficiency(K)
        paths = export_result(result, args.out, "optimal")
        payload["exports"] = {k: str(v) for k, v in paths.items()}
        if args.dump_fields:
            state, _, _ = propagate(p, obs, pulse, result.A_in, grids)
            dumps = dump_fields(state, args.out)
            payload["field_dumps"] = {k: str(v) for k, v in dumps.items()}
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        for key, value in payload.items():
            print(f"{key}: {value}")
    return 2 if row.error else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latmem",
        description="Photonic band structure and storage efficiency of lattice quantum memories",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sweep = subs.add_parser("sweep", help="band-edge approach sweep")
    _add_scenario_args(sweep)
    sweep.add_argument("--out", type=Path, required=True, help="output directory")
    sweep.add_argument("--n", type=int, default=40, help="number of sweep points")
    sweep.add_argument("--a-nm", type=float, help="override the base lattice constant (nm)")
    sweep.add_argument("--a-min-nm", type=float, help="explicit sweep range start (nm)")
    sweep.add_argument("--a-max-nm", type=float, help="explicit sweep range end (nm)")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--no-pde", action="store_true", help="skip the propagation cross-check")
    sweep.add_argument("--pde-all", action="store_true", help="cross-check every point")
    sweep.add_argument("--pde-every", type=int, default=5, help="cross-check cadence on large sweeps")
    sweep.add_argument("--band-scan", action="store_true", help="also write dispersion tables")
    sweep.set_defaults(func=_cmd_sweep)

    bands = subs.add_parser("bands", help="dispersion scan around the zone edge")
    _add_scenario_args(bands)
    bands.add_argument("--out", type=Path, required=True)
    bands.add_argument("--n", type=int, default=241)
    bands.add_argument("--span", type=float, default=0.1, help="half-width of the scan in units of pi/a")
    bands.add_argument("--a-nm", type=float, help="override the lattice constant (nm)")
    bands.add_argument("--no-empty", action="store_true", help="skip the empty-lattice reference")
    bands.add_argument("--workers", type=int, default=1)
    bands.set_defaults(func=_cmd_bands)

    point = subs.add_parser("point", help="one-shot diagnostics at a single lattice constant")
    _add_scenario_args(point)
    point.add_argument("--a-nm", type=float, help="lattice constant (nm)")
    point.add_argument("--out", type=Path, help="directory for optimal-mode exports")
    point.add_argument("--pde", action="store_true", help="also run the propagation solver")
    point.add_argument("--dump-fields", action="store_true", help="dump |A|^2 and |B|^2 matrices")
    point.set_defaults(func=_cmd_point)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except LatmemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
