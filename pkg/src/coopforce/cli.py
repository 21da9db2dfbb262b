"""Command-line interface for the sweep harness.

Subcommands mirror the sweep modes; every flag can also be supplied
through a plain-text ``key=value`` file via ``--config``, with explicit
command-line flags taking precedence.
"""

from __future__ import annotations

import argparse
import sys

from . import geometry as geo
from . import sweeps as sw


def load_config_file(path) -> dict:
    """Parse a key=value run file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {raw!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


_FLAG_TYPES = {
    "n": int,
    "rbar_min": float,
    "rbar_max": float,
    "rbar_points": int,
    "omega0": float,
    "gammac": float,
    "omega0_min": float,
    "omega0_max": float,
    "omega0_points": int,
    "gammac_min": float,
    "gammac_max": float,
    "gammac_points": int,
    "rbar": float,
    "r12": float,
    "configs": int,
    "trajectories": int,
    "seed": int,
    "tier": str,
    "workers": int,
    "out": str,
    "save_positions": str,
    "override_gate": lambda s: s.lower() in ("1", "true", "yes"),
}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value run file; flags override it")
    p.add_argument("--n", type=int)
    p.add_argument("--omega0", type=float, help="drive Rabi frequency (units of the linewidth)")
    p.add_argument("--gammac", type=float, help="collective dephasing rate")
    p.add_argument("--configs", type=int, help="random configurations per grid point")
    p.add_argument("--trajectories", type=int, help="trajectories per configuration")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--tier", choices=["auto", "exact", "rate_equation", "trajectory", "analytic_n2"])
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--override-gate", action="store_true", default=None,
                   dest="override_gate",
                   help="run the trajectory tier outside its validity window")
    p.add_argument("--dump-config", help="write the resolved key=value run file here")


def _add_rbar_grid(p: argparse.ArgumentParser):
    p.add_argument("--rbar-min", type=float, dest="rbar_min")
    p.add_argument("--rbar-max", type=float, dest="rbar_max")
    p.add_argument("--rbar-points", type=int, dest="rbar_points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopforce",
        description="Steady-state sweeps of driven, dipole-coupled emitter ensembles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep-separation", help="mean enhancement vs separation")
    _add_common(p)
    _add_rbar_grid(p)

    p = sub.add_parser("contour-n2", help="pair enhancement map over drive and dephasing")
    _add_common(p)
    p.add_argument("--omega0-min", type=float, dest="omega0_min")
    p.add_argument("--omega0-max", type=float, dest="omega0_max")
    p.add_argument("--omega0-points", type=int, dest="omega0_points")
    p.add_argument("--gammac-min", type=float, dest="gammac_min")
    p.add_argument("--gammac-max", type=float, dest="gammac_max")
    p.add_argument("--gammac-points", type=int, dest="gammac_points")
    p.add_argument("--r12", type=float, help="pair separation (wavelength units)")

    p = sub.add_parser("sweep-drive", help="enhancement vs drive strength")
    _add_common(p)
    p.add_argument("--omega0-min", type=float, dest="omega0_min")
    p.add_argument("--omega0-max", type=float, dest="omega0_max")
    p.add_argument("--omega0-points", type=int, dest="omega0_points")
    p.add_argument("--rbar", type=float, help="fixed separation")

    p = sub.add_parser("sweep-circle", help="circular arrangements vs separation")
    _add_common(p)
    _add_rbar_grid(p)

    p = sub.add_parser("single", help="one configuration, one row")
    _add_common(p)
    p.add_argument("--rbar", type=float)
    p.add_argument("--save-positions", dest="save_positions",
                   help="archive the sampled emitter positions to this path")

    return parser


_DEFAULTS = {
    "n": 6,
    "rbar_min": 0.03,
    "rbar_max": 3.0,
    "rbar_points": 12,
    "omega0": 1e3,
    "gammac": 1.3e4,
    "omega0_min": 1.0,
    "omega0_max": 1e4,
    "omega0_points": 9,
    "gammac_min": 1.0,
    "gammac_max": 1e6,
    "gammac_points": 9,
    "rbar": 0.2,
    "r12": 0.2,
    "configs": 100,
    "trajectories": 200,
    "seed": 0,
    "tier": "auto",
    "workers": 1,
    "out": "sweep.csv",
    "save_positions": None,
    "override_gate": False,
}


def resolve_options(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags."""
    opts = dict(_DEFAULTS)
    if getattr(args, "config", None):
        for key, value in load_config_file(args.config).items():
            if key not in _FLAG_TYPES:
                raise ValueError(f"unknown config key {key!r}")
            opts[key] = _FLAG_TYPES[key](value)
    for key in _DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    return opts


def _spec_from_options(command: str, o: dict) -> sw.SweepSpec:
    common = dict(
        n=o["n"],
        omega0=o["omega0"],
        gamma_c=o["gammac"],
        r_bar=o["rbar"],
        r12=o["r12"],
        n_configs=o["configs"],
        n_traj=o["trajectories"],
        master_seed=o["seed"],
        tier_policy=o["tier"],
        workers=o["workers"],
        gate_override=o["override_gate"],
    )
    if command == "sweep-separation":
        return sw.SweepSpec(
            mode=sw.MODE_SEPARATION,
            r_bar_grid=sw.log_spaced(o["rbar_min"], o["rbar_max"], o["rbar_points"]),
            **common,
        )
    if command == "sweep-circle":
        return sw.SweepSpec(
            mode=sw.MODE_CIRCLE,
            r_bar_grid=sw.log_spaced(o["rbar_min"], o["rbar_max"], o["rbar_points"]),
            **common,
        )
    if command == "sweep-drive":
        return sw.SweepSpec(
            mode=sw.MODE_DRIVE,
            omega_grid=sw.log_spaced(o["omega0_min"], o["omega0_max"], o["omega0_points"]),
            **common,
        )
    if command == "contour-n2":
        common["n"] = 2
        return sw.SweepSpec(
            mode=sw.MODE_CONTOUR,
            omega_grid=sw.log_spaced(o["omega0_min"], o["omega0_max"], o["omega0_points"]),
            gamma_c_grid=sw.log_spaced(o["gammac_min"], o["gammac_max"], o["gammac_points"]),
            **common,
        )
    if command == "single":
        return sw.SweepSpec(mode=sw.MODE_SINGLE, **common)
    raise ValueError(command)


def _dump_config(o: dict, path: str) -> None:
    with open(path, "w") as fh:
        for key in sorted(o):
            if o[key] is None:
                continue
            fh.write(f"{key}={o[key]}\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    opts = resolve_options(args)
    spec = _spec_from_options(args.command, opts)
    if getattr(args, "dump_config", None):
        _dump_config(opts, args.dump_config)

    out = opts["out"]
    if args.command == "contour-n2":
        rows, contour = sw.run_contour_n2(spec)
        sw.rows_to_csv(rows, out)
        sw.contour_to_csv(contour, out + ".contour.csv")
    elif args.command == "single":
        rows = sw.run_single(spec)
        sw.rows_to_csv(rows, out)
        if opts["save_positions"]:
            seed = geo.derive_seed(spec.master_seed, 0, 0)
            cfg = geo.sample_random_configuration(spec.n, spec.r_bar, seed=seed)
            geo.save_positions(cfg, opts["save_positions"])
    else:
        runner = {
            "sweep-separation": sw.run_separation_sweep,
            "sweep-circle": sw.run_circle_sweep,
            "sweep-drive": sw.run_drive_sweep,
        }[args.command]
        rows, summary = runner(spec)
        sw.rows_to_csv(rows, out)
        sw.summary_to_csv(summary, out + ".summary.csv")
    sw.write_metadata(spec, out + ".meta")
    n_failed = sum(1 for r in (rows or []) if r.tier.startswith("failed:"))
    print(f"{len(rows)} rows -> {out}" + (f" ({n_failed} failed)" if n_failed else ""))
    return 0


if __name__ == "__main__":
    sys.exit(main())
