"""Command-line front end: flags and config files to sweeps, CSV and figures.

All rates are read in units of the emitter-cavity coupling g; the common
transition frequency never appears because the simulation works in the frame
rotating at it.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .errors import ConfigError
from .sweep import METHODS, SweepSpec, emit_csv, parse_sweep_token, run_sweep

# key -> (converter, description); config files share these keys with the flags
_KEYS = {
    "n-emitters": (int, "number of emitters N"),
    "kappa": (float, "cavity decay rate in units of g"),
    "gamma": (float, "individual emitter decay rate in units of g"),
    "pump": (float, "incoherent pump rate P_x in units of g"),
    "dephasing": (float, "pure dephasing rate in units of g"),
    "nmax": (int, "photon-number cutoff (omit to auto-converge with the direct method)"),
    "method": (str, f"solution method, one of {METHODS}"),
    "trajectories": (int, "trajectory count for the mcwf method"),
    "t-total": (float, "total simulated time per trajectory"),
    "t-burn-in": (float, "time discarded before sampling"),
    "sample-interval": (float, "spacing of trajectory samples"),
    "seed": (int, "random seed for trajectory streams"),
    "sweep": (str, "swept axis as param:log|linear:lo:hi:count or param:list:v1,v2,..."),
    "output": (str, "CSV output path"),
    "workers": (int, "process count for sweep points"),
    "figures": (str, "directory for rendered figures (optional)"),
}

_RATE_KEYS = ("kappa", "gamma", "pump", "dephasing")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opentc",
        description="Steady states and photon statistics of incoherently pumped "
                    "emitters in a lossy cavity.",
    )
    for key, (conv, help_text) in _KEYS.items():
        parser.add_argument(f"--{key}", type=conv, default=None, help=help_text,
                            dest=key.replace("-", "_"))
    parser.add_argument("--config", type=str, default=None,
                        help="flat key = value file; flags override file values")
    return parser


def read_config_file(path: str) -> dict:
    """Parse a flat ``key = value`` file with # comments."""
    values: dict = {}
    try:
        with open(path) as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"malformed line {lineno} in {path!r}: expected key = value")
        key, _, text = line.partition("=")
        key = key.strip().replace("_", "-")
        text = text.strip()
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r} at line {lineno} in {path!r}")
        conv, _ = _KEYS[key]
        try:
            values[key] = conv(text)
        except ValueError as exc:
            raise ConfigError(
                f"malformed value for key {key!r} at line {lineno} in {path!r}: {exc}"
            ) from exc
    return values


def parse_config(flags: Sequence[str] | None = None) -> SweepSpec:
    """Build a sweep from command-line flags and an optional config file."""
    namespace = build_parser().parse_args(flags)
    merged: dict = {}
    if namespace.config is not None:
        merged.update(read_config_file(namespace.config))
    for key in _KEYS:
        flag_value = getattr(namespace, key.replace("-", "_"))
        if flag_value is not None:
            merged[key] = flag_value

    for key in _RATE_KEYS:
        if merged.get(key) is not None and merged[key] < 0:
            raise ConfigError(f"rate {key!r} must be nonnegative, got {merged[key]}")
    if merged.get("n-emitters") is None:
        raise ConfigError("missing required field 'n-emitters'")
    if merged.get("n-emitters") < 1:
        raise ConfigError(f"'n-emitters' must be >= 1, got {merged['n-emitters']}")

    if merged.get("sweep") is not None:
        parameter, grid = parse_sweep_token(merged["sweep"])
    elif merged.get("kappa") is not None:
        parameter, grid = "kappa", (merged["kappa"],)  # single-point run
    else:
        raise ConfigError("missing required field 'kappa' (set it or sweep it)")

    return SweepSpec(
        parameter=parameter,
        grid=grid,
        n_emitters=merged["n-emitters"],
        kappa=merged.get("kappa"),
        gamma=merged.get("gamma") or 0.0,
        pump_px=merged.get("pump") or 0.0,
        dephasing=merged.get("dephasing") or 0.0,
        n_max=merged.get("nmax"),
        method=merged.get("method") or "direct",
        trajectories=merged.get("trajectories") or 1000,
        t_total=merged.get("t-total"),
        t_burn_in=merged.get("t-burn-in"),
        sample_interval=merged.get("sample-interval"),
        seed=merged.get("seed") or 0,
        workers=merged.get("workers") or 1,
        output=merged.get("output"),
        figures=merged.get("figures"),
    )


def main(argv: Sequence[str] | None = None) -> int:
    try:
        spec = parse_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if spec.output is None:
        print("error: missing required field 'output'", file=sys.stderr)
        return 2

    rows = run_sweep(spec)
    emit_csv(rows, spec.output)
    failed = [row for row in rows if row.get("error")]
    print(f"wrote {len(rows)} rows to {spec.output}"
          + (f" ({len(failed)} failed)" if failed else ""))

    if spec.figures is not None:
        from .report import render_figures

        for path in render_figures(rows, spec.parameter, spec.figures):
            print(f"wrote {path}")

    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
