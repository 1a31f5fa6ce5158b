"""Line-based ``key = value`` experiment configuration.

Grammar: one ``key = value`` pair per line, ``#`` starts a comment,
blank lines ignored.  Unknown keys, duplicate keys, type mismatches and
range violations are all collected (with line numbers) and reported
together, not one at a time.
"""

from __future__ import annotations

import dataclasses

from .errors import ConfigError

EXPERIMENT_KINDS = (
    "barenblatt-fit",
    "halfspace-fsp",
    "fluid2d-taylor-green",
    "fluid2d-halfplane",
    "energy-ledger",
    "stampacchia-suite",
    "interpolation-suite",
    "exponent-identities",
)

# kinds that exercise the degenerate free boundary and hence need p > 2
_FINITE_SPEED_KINDS = (
    "barenblatt-fit",
    "halfspace-fsp",
    "fluid2d-halfplane",
    "energy-ledger",
)


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_ints(s: str) -> tuple[int, ...]:
    return tuple(int(tok.strip()) for tok in s.split(","))


def _parse_floats(s: str) -> tuple[float, ...]:
    return tuple(float(tok.strip()) for tok in s.split(","))


def _parse_bounds(s: str) -> tuple[tuple[float, float], ...]:
    out = []
    for tok in s.split(","):
        lo, hi = tok.split(":")
        out.append((float(lo), float(hi)))
    return tuple(out)


_COERCE = {
    "str": lambda s: s.strip(),
    "float": float,
    "int": int,
    "bool": _parse_bool,
    "ints": _parse_ints,
    "floats": _parse_floats,
    "bounds": _parse_bounds,
}

# key -> (type name, default, help)
SCHEMA: dict[str, tuple[str, object, str]] = {
    "experiment": ("str", None, "experiment kind (required)"),
    "outdir": ("str", "out", "output directory"),
    "seed": ("int", 0, "random seed for seeded suites"),
    "svg": ("bool", True, "emit SVG plots"),
    # model
    "p": ("float", 3.0, "stress growth exponent"),
    "mu1": ("float", 1.0, "viscosity coefficient, > 0"),
    "dimension": ("int", 1, "spatial dimension, 1 or 2"),
    # grid
    "cells": ("ints", (4096,), "cells per axis"),
    "bounds": ("bounds", ((-8.0, 8.0),), "box per axis as lo:hi[,lo:hi]"),
    "bc": ("str", "dirichlet-zero", "boundary kind per axis (comma separated)"),
    # time
    "t0": ("float", 1.0, "profile birth time / data shape parameter"),
    "t_end": ("float", 100.0, "final absolute time"),
    "snapshots_per_decade": ("int", 32, "log-schedule snapshot density"),
    "snapshot_count": ("int", 0, "if > 0, use this many uniform snapshots"),
    # solver
    "stepper": ("str", "implicit", "explicit or implicit"),
    "eps_reg": ("float", 0.0, "gradient regularization (0 = exact support)"),
    "cfl_safety": ("float", 0.9, "explicit CFL safety factor in (0, 1]"),
    "tol_inner": ("float", 1e-10, "proximal optimality tolerance"),
    "max_inner": ("int", 60, "proximal Newton iteration cap"),
    "substeps": ("int", 1, "implicit substeps per snapshot interval"),
    "dt_max": ("float", 1.0, "upper bound on adaptive steps"),
    "sentinel": ("bool", True, "boundary-proximity sentinel on/off"),
    "sentinel_margin": ("float", 0.1, "sentinel margin as a fraction of width"),
    "sentinel_tau_frac": ("float", 1e-8, "sentinel support threshold / max|u0|"),
    "audit_locality": ("bool", True, "per-step support-locality audit"),
    # fronts
    "threshold_frac": ("float", 1e-6, "front threshold / max|u0|"),
    "fit_drop_frac": ("float", 0.1, "fraction of samples dropped at each end"),
    "t_ref": ("float", 0.1, "envelope calibration time"),
    "tol_env": ("float", 0.02, "allowed relative envelope excess"),
    "envelope": ("str", "both", "which envelope(s) to check: l2, l1, both"),
    "height_c": ("float", 1.0, "profile height constant"),
    "exponent_tol": ("float", 0.05, "relative tolerance on the fitted exponent"),
    "convergence_study": ("bool", False, "run the explicit accuracy study"),
    "study_cells": ("ints", (2048, 4096, 8192), "grids of the accuracy study"),
    "study_t1": ("float", 16.0, "accuracy study: compare at this absolute time"),
    "order_min": ("float", 0.8, "minimum acceptable empirical order"),
    # fluid
    "advection": ("str", "central", "advection scheme: central or upwind"),
    "fluid_cfl_safety": ("float", 0.4, "fluid CFL safety factor"),
    "ke_rate_tol": ("float", 0.02, "relative tolerance on the KE decay rate"),
    "div_tol": ("float", 1e-10, "post-projection divergence bound"),
    "weak_residual_check": ("bool", False, "run the weak-form refinement study"),
    "weak_fields": ("int", 20, "number of random test fields"),
    "dt_fixed": ("float", 0.0, "fixed fluid step (0 = adaptive CFL)"),
    "band_center": ("float", -1.5, "vorticity band center (x_N)"),
    "band_halfwidth": ("float", 0.8, "vorticity band halfwidth"),
    "band_amplitude": ("float", 1.0, "vorticity band amplitude"),
    "locality_cells": ("int", 3, "allowed support advance in cells per step"),
    # energetics
    "s_count": ("int", 33, "s-grid size for ledgers"),
    "s_min": ("float", 0.0, "s-grid lower end"),
    "s_max": ("float", float("nan"), "s-grid upper end (nan = auto)"),
    "delta_count": ("int", 8, "number of delta values in local-energy scans"),
    "eps_iter": ("float", 0.5, "contraction factor of the iteration check"),
    "ctilde": ("float", 1.0, "calibration constant in the jump function"),
    "refine_check": ("bool", True, "repeat on a coarser grid for stability"),
    # suites
    "export_trajectory": ("bool", False, "write one CSV per snapshot plus index"),
    "a1_cases": ("int", 200, "number of seeded iteration-lemma cases"),
    "gn_p": ("float", 3.0, "exponent p of the interpolation suite"),
    "bump_count": ("int", 100, "random bumps per interpolation case"),
    "lambda_set": ("floats", (0.25, 4.0), "dilation factors"),
    "gn_cells": ("int", 192, "base grid of the interpolation suite"),
    "identity_tol": ("float", 1e-12, "tolerance of the identity suite"),
}


@dataclasses.dataclass
class ExperimentConfig:
    """Validated configuration: ``kind`` plus resolved values per key."""

    kind: str
    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str, default=None):
        return self.values.get(key, default)


def _validate(values: dict, lines: dict) -> list:
    """Range checks against module preconditions; returns (line, msg) pairs."""
    errs = []

    def line_of(key):
        return lines.get(key)

    kind = values.get("experiment")
    if kind is None:
        errs.append((None, "missing required key 'experiment'"))
        return errs
    if kind not in EXPERIMENT_KINDS:
        errs.append((line_of("experiment"),
                     f"unknown experiment {kind!r}; valid: {', '.join(EXPERIMENT_KINDS)}"))
        return errs

    def need(cond, key, msg):
        if not cond:
            errs.append((line_of(key), f"{key}: {msg}"))

    p = values["p"]
    need(values["mu1"] > 0, "mu1", "must be > 0")
    need(values["dimension"] in (1, 2), "dimension", "must be 1 or 2")
    if kind in _FINITE_SPEED_KINDS:
        need(p > 2, "p", f"finite-speed experiments require p > 2, got {p}")
    if kind.startswith("fluid2d"):
        need(values["dimension"] == 2, "dimension", "fluid experiments are 2-D")
        need(values["advection"] in ("central", "upwind"), "advection",
             "must be 'central' or 'upwind'")
    need(values["stepper"] in ("explicit", "implicit"), "stepper",
         "must be 'explicit' or 'implicit'")
    need(0 < values["cfl_safety"] <= 1, "cfl_safety", "must lie in (0, 1]")
    need(values["tol_inner"] > 0, "tol_inner", "must be > 0")
    need(values["eps_reg"] >= 0, "eps_reg", "must be >= 0")
    need(values["t_end"] > 0, "t_end", "must be > 0")
    need(values["t0"] >= 0, "t0", "must be >= 0")
    need(values["threshold_frac"] > 0, "threshold_frac", "must be > 0")
    need(0 <= values["fit_drop_frac"] < 0.5, "fit_drop_frac", "must lie in [0, 0.5)")
    need(values["envelope"] in ("l2", "l1", "both"), "envelope",
         "must be 'l2', 'l1' or 'both'")
    need(0 < values["eps_iter"] < 1, "eps_iter", "must lie in (0, 1)")
    need(all(c >= 1 for c in values["cells"]), "cells", "must be positive")
    need(all(hi > lo for lo, hi in values["bounds"]), "bounds",
         "upper must exceed lower")
    dim = values["dimension"]
    if len(values["cells"]) not in (1, dim):
        errs.append((line_of("cells"),
                     f"cells: need 1 or {dim} entries for dimension {dim}"))
    if len(values["bounds"]) not in (1, dim):
        errs.append((line_of("bounds"),
                     f"bounds: need 1 or {dim} entries for dimension {dim}"))
    need(values["height_c"] > 0, "height_c", "must be > 0")
    need(values["snapshots_per_decade"] > 0, "snapshots_per_decade", "must be > 0")
    need(values["substeps"] >= 1, "substeps", "must be >= 1")
    return errs


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse config text, apply defaults and overrides, validate everything.

    ``overrides`` maps keys to raw string values (command-line flags win
    over the file).  Raises :class:`ConfigError` carrying *all* problems.
    """
    errs: list = []
    raw: dict[str, str] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            errs.append((lineno, f"expected 'key = value', got {stripped!r}"))
            continue
        key, val = (part.strip() for part in stripped.split("=", 1))
        if key not in SCHEMA:
            errs.append((lineno, f"unknown key {key!r}"))
            continue
        if key in raw:
            errs.append((lineno, f"duplicate key {key!r} (first set on line "
                                 f"{lines[key]})"))
            continue
        raw[key] = val
        lines[key] = lineno

    for key, val in (overrides or {}).items():
        if key not in SCHEMA:
            errs.append((None, f"unknown key {key!r} (flag)"))
            continue
        raw[key] = val if isinstance(val, str) else str(val)
        lines[key] = None  # flags win; no line number

    values: dict = {}
    for key, (typ, default, _help) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = _COERCE[typ](raw[key])
            except (ValueError, TypeError):
                errs.append((lines.get(key),
                             f"{key}: cannot parse {raw[key]!r} as {typ}"))
        elif default is not None:
            values[key] = default

    if "experiment" not in values and not any("experiment" in str(e) for e in errs):
        errs.append((None, "missing required key 'experiment'"))

    if not errs:
        errs.extend(_validate(values, lines))
    if errs:
        raise ConfigError(errs)
    return ExperimentConfig(values["experiment"], values)


def default_config(kind: str, **overrides) -> ExperimentConfig:
    """Programmatic config: defaults for ``kind`` plus keyword overrides."""
    text = f"experiment = {kind}\n"
    ov = {k: (",".join(f"{lo}:{hi}" for lo, hi in v) if k == "bounds" and not isinstance(v, str)
              else ",".join(str(x) for x in v) if isinstance(v, (tuple, list))
              else str(v))
          for k, v in overrides.items()}
    return parse_config(text, ov)


def describe_schema() -> str:
    out = []
    for key, (typ, default, help_) in SCHEMA.items():
        out.append(f"{key} ({typ}, default {default!r}): {help_}")
    return "\n".join(out)
