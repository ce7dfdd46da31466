"""Experiment command-line driver.

Subcommands
-----------
simulate      integrate one model and write trajectory CSV files
compare       run an eps ladder of friction trajectories against the
              constrained and first-order-corrected models, write a JSON
              convergence report
manifold      extract slow-manifold samples from friction trajectories,
              write a JSON residual report plus scatter CSVs
list-systems  show the registry

Configuration is a flat key=value file with dotted namespaces
(integrator.dt=1e-3, params.a=0.2); every CLI flag overrides its file key.
Outputs are deterministic: repeated runs of the same configuration produce
byte-identical files.  The default output directory is $NONHOLIB_OUT_DIR
(falling back to the working directory).

Exit codes: 0 ok, 2 configuration error, 3 numerical blow-up,
4 analysis precondition failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, dynamics
from .ode import (
    IntegratorConfig,
    NonFiniteState,
    StepUnderflow,
    Trajectory,
    integrate,
    restrict_window,
    transform_linear,
)
from .systems import REGISTRY, ModelSpec, SystemEntry, get_system

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_ANALYSIS = 4

#: Step-size cap for friction models: explicit stability needs the step to
#: resolve the fast relaxation rate, so dt = min(1e-3, eps/20).
STIFF_DT_CAP = 1e-3
STIFF_DT_FRACTION = 20.0


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Resolved experiment settings (file keys with flag overrides applied)."""

    system: str = "sleigh"
    model: str = "nh"
    params: dict = field(default_factory=dict)
    eps: tuple = ()
    initial_state: Optional[tuple] = None
    t0: float = 0.0
    t1: float = 10.0
    dt: Optional[float] = None
    sample_dt: float = 1e-2
    method: str = "rk4"
    out: Optional[str] = None
    fmt: str = "csv"
    window_start: float = analysis.DEFAULT_T1
    transient_cutoff: float = analysis.DEFAULT_T1

    def echo(self) -> dict:
        return {
            "system": self.system,
            "model": self.model,
            "params": {k: self.params[k] for k in sorted(self.params)},
            "eps": list(self.eps),
            "initial_state": None
            if self.initial_state is None
            else list(self.initial_state),
            "t0": self.t0,
            "t1": self.t1,
            "dt": self.dt,
            "sample_dt": self.sample_dt,
            "method": self.method,
            "window_start": self.window_start,
            "transient_cutoff": self.transient_cutoff,
        }


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------


def _parse_float_list(text: str) -> tuple:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"expected a comma-separated number list, got {text!r}")


def read_config_file(path: str) -> dict:
    """Flat key=value lines; '#' starts a comment; later keys win."""
    keys = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected KEY=VALUE, got {raw!r}")
        key, value = line.split("=", 1)
        keys[key.strip()] = value.strip()
    return keys


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    file_keys = read_config_file(args.config) if getattr(args, "config", None) else {}

    def take(key, cast=str):
        if key in file_keys:
            raw = file_keys.pop(key)
            try:
                return cast(raw)
            except ValueError:
                raise ConfigError(f"bad value for {key}: {raw!r}")
        return None

    for key, cast, attr in (
        ("system", str, "system"),
        ("model", str, "model"),
        ("eps", _parse_float_list, "eps"),
        ("state", _parse_float_list, "initial_state"),
        ("out", str, "out"),
        ("format", str, "fmt"),
        ("integrator.t0", float, "t0"),
        ("integrator.t1", float, "t1"),
        ("integrator.dt", float, "dt"),
        ("integrator.sample_dt", float, "sample_dt"),
        ("integrator.method", str, "method"),
        ("compare.window_start", float, "window_start"),
        ("manifold.transient_cutoff", float, "transient_cutoff"),
    ):
        val = take(key, cast)
        if val is not None:
            setattr(cfg, attr, val)
    for key in list(file_keys):
        if key.startswith("params."):
            try:
                cfg.params[key.split(".", 1)[1]] = float(file_keys.pop(key))
            except ValueError:
                raise ConfigError(f"bad numeric value for {key}")
    if file_keys:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(file_keys))}")

    # flag overrides
    if getattr(args, "system", None):
        cfg.system = args.system
    if getattr(args, "model", None):
        cfg.model = args.model
    if getattr(args, "eps", None):
        cfg.eps = tuple(args.eps)
    if getattr(args, "state", None):
        cfg.initial_state = _parse_float_list(args.state)
    for flag, attr in (
        ("t0", "t0"),
        ("t1", "t1"),
        ("dt", "dt"),
        ("sample_dt", "sample_dt"),
        ("out", "out"),
        ("format", "fmt"),
        ("method", "method"),
        ("window_start", "window_start"),
        ("transient_cutoff", "transient_cutoff"),
    ):
        val = getattr(args, flag, None)
        if val is not None:
            setattr(cfg, attr, val)
    for kv in getattr(args, "param", None) or ():
        if "=" not in kv:
            raise ConfigError(f"--param expects KEY=VALUE, got {kv!r}")
        key, value = kv.split("=", 1)
        try:
            cfg.params[key.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"bad numeric value for param {key!r}: {value!r}")
    return cfg


def _resolve_model(cfg: ExperimentConfig):
    try:
        entry = get_system(cfg.system)
    except KeyError as exc:
        raise ConfigError(str(exc))
    unknown = set(cfg.params) - set(entry.param_defaults)
    if unknown:
        raise ConfigError(
            f"unknown parameters for {cfg.system!r}: {', '.join(sorted(unknown))}"
        )
    spec = entry.models.get(cfg.model)
    if spec is None:
        raise ConfigError(
            f"model {cfg.model!r} not supported by {cfg.system!r}; "
            f"available: {', '.join(sorted(entry.models))}"
        )
    if spec.needs_eps and not cfg.eps:
        raise ConfigError(f"model {cfg.model!r} requires --eps > 0")
    for e in cfg.eps:
        if not e > 0:
            raise ConfigError(f"eps values must be positive, got {e}")
    return entry, spec


def _initial_state(cfg: ExperimentConfig, spec: ModelSpec) -> np.ndarray:
    if cfg.initial_state is None:
        return spec.default_state(cfg.params)
    state = np.asarray(cfg.initial_state, dtype=float)
    if state.shape != (len(spec.columns),):
        raise ConfigError(
            f"state must have {len(spec.columns)} components "
            f"({','.join(spec.columns)}), got {state.size}"
        )
    return state


def _integrator_config(cfg: ExperimentConfig, spec: ModelSpec, eps) -> IntegratorConfig:
    dt = cfg.dt
    if dt is None:
        dt = STIFF_DT_CAP
        if spec.fast_rate is not None and eps is not None:
            dt = min(STIFF_DT_CAP, eps / STIFF_DT_FRACTION)
    try:
        return IntegratorConfig(
            t_span=(cfg.t0, cfg.t1),
            dt=dt,
            sample_dt=cfg.sample_dt,
            method=cfg.method,
        )
    except ValueError as exc:
        raise ConfigError(str(exc))


def _out_dir() -> Path:
    return Path(os.environ.get("NONHOLIB_OUT_DIR", "."))


def _out_path(cfg: ExperimentConfig, suffix: str, tag: str = "") -> Path:
    if cfg.out is not None:
        path = Path(cfg.out)
        if tag:
            path = path.with_name(f"{path.stem}{tag}{path.suffix or suffix}")
        elif not path.suffix:
            path = path.with_suffix(suffix)
        return path
    name = f"{cfg.system}_{cfg.model}{tag}{suffix}"
    return _out_dir() / name


# ---------------------------------------------------------------------------
# writers (17 significant digits, comma separated, LF endings)
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(path: Path, traj: Trajectory, columns) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["t," + ",".join(columns)]
    for t, row in zip(traj.times, traj.states):
        lines.append(_fmt(t) + "," + ",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", newline="\n")


def write_trajectory_json(path: Path, traj: Trajectory, columns) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "columns": ["t"] + list(columns),
        "rows": [
            [float(t)] + [float(v) for v in row]
            for t, row in zip(traj.times, traj.states)
        ],
    }
    _write_json(path, doc)


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", newline="\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: ExperimentConfig) -> int:
    entry, spec = _resolve_model(cfg)
    state = _initial_state(cfg, spec)
    eps_list = list(cfg.eps) if spec.needs_eps else [None]
    multi = len(eps_list) > 1
    for eps in eps_list:
        field_fn = spec.build(cfg.params, eps)
        icfg = _integrator_config(cfg, spec, eps)
        traj = integrate(field_fn, state, icfg)
        tag = f"_eps{eps:g}" if (multi and eps is not None) else ""
        suffix = ".json" if cfg.fmt == "json" else ".csv"
        path = _out_path(cfg, suffix, tag)
        if cfg.fmt == "json":
            write_trajectory_json(path, traj, spec.columns)
        else:
            write_trajectory_csv(path, traj, spec.columns)
        print(f"wrote {path}")
    return EXIT_OK


def _reduced_trajectory(entry: SystemEntry, cfg, traj: Trajectory) -> Trajectory:
    if entry.reduce_matrix is None:
        return traj
    return transform_linear(traj, entry.reduce_matrix(cfg.params))


def _lift_state(entry: SystemEntry, cfg, reduced_state):
    """Embed a constraint-compatible reduced state into the friction model
    (zero slip components)."""
    if entry.lift_state is None:
        return np.asarray(reduced_state, dtype=float)
    return entry.lift_state(cfg.params, reduced_state)


def cmd_compare(cfg: ExperimentConfig) -> int:
    entry, _ = _resolve_model_for(cfg, "friction")
    if "nh" not in entry.models:
        raise ConfigError(f"system {cfg.system!r} has no constrained model")
    if len(cfg.eps) < 3:
        raise ConfigError("compare needs an eps ladder with at least 3 entries")
    if not all(b < a for a, b in zip(cfg.eps, cfg.eps[1:])):
        raise ConfigError("eps ladder must be strictly decreasing")

    fric_spec = entry.models["friction"]
    nh_spec = entry.models["nh"]
    corr_spec = entry.models.get("corrected")

    nh_state = _initial_state(cfg, nh_spec)
    nh_traj = integrate(
        nh_spec.build(cfg.params, None), nh_state, _integrator_config(cfg, nh_spec, None)
    )
    comps = entry.compare_components or None
    t1, t_end = cfg.window_start, cfg.t1
    nh_field = nh_spec.build(cfg.params, None)

    errors, defects, corr_errors = [], [], []
    for eps in cfg.eps:
        fric_state = _lift_state(entry, cfg, nh_state)
        fric_traj = integrate(
            fric_spec.build(cfg.params, eps),
            fric_state,
            _integrator_config(cfg, fric_spec, eps),
        )
        reduced = _reduced_trajectory(entry, cfg, fric_traj)
        errors.append(analysis.sup_distance(reduced, nh_traj, t1, t_end, comps))
        # defect over the post-transient window, matching the report window
        defects.append(
            analysis.pseudo_solution_defect(restrict_window(reduced, t1, t_end), nh_field)
        )
        if corr_spec is not None:
            corr_traj = integrate(
                corr_spec.build(cfg.params, eps),
                nh_state,
                _integrator_config(cfg, corr_spec, None),
            )
            corr_errors.append(
                analysis.sup_distance(reduced, corr_traj, t1, t_end, comps)
            )

    try:
        report = analysis.ConvergenceReport.from_errors(
            cfg.eps, errors, (t1, t_end), defects
        )
    except analysis.LadderTooShort as exc:
        raise ConfigError(str(exc))
    doc = {
        "system": cfg.system,
        "model": "friction",
        "config_echo": cfg.echo(),
        **report.to_dict(),
    }
    if entry.energy_of_state is not None:
        doc["initial_energy"] = float(
            entry.energy_of_state(cfg.params, _lift_state(entry, cfg, nh_state))
        )
    if corr_errors:
        doc["corrected_errors"] = corr_errors
        doc["corrected_orders"] = list(
            analysis.estimate_order(cfg.eps, corr_errors)
        )
    path = _out_path(cfg, ".json", "_compare")
    _write_json(path, doc)
    print(f"wrote {path}")
    return EXIT_OK


def _resolve_model_for(cfg: ExperimentConfig, model: str):
    sub = ExperimentConfig(**{**cfg.__dict__, "model": model})
    sub.params = cfg.params
    return _resolve_model(sub)


def cmd_manifold(cfg: ExperimentConfig) -> int:
    try:
        entry = get_system(cfg.system)
    except KeyError as exc:
        raise ConfigError(str(exc))
    if cfg.model != "friction":
        raise ConfigError("manifold extraction requires the friction model")
    if not entry.supports_manifold:
        raise ConfigError(f"system {cfg.system!r} has no slow-manifold support")
    if not cfg.eps:
        raise ConfigError("manifold extraction requires --eps")
    fric_spec = entry.models["friction"]
    sysm, frame, fric = entry.generic_builders(cfg.params)
    expansion = dynamics.compute_h1(sysm, frame, fric)
    n, k = entry.reduced_dims

    residuals, slopes, expected_slopes = [], [], []
    for eps in cfg.eps:
        state = _initial_state(cfg, fric_spec)
        traj = integrate(
            fric_spec.build(cfg.params, eps),
            state,
            _integrator_config(cfg, fric_spec, eps),
        )
        frame_traj = transform_linear(traj, entry.frame_state_matrix(cfg.params))
        fit = analysis.manifold_fit(
            frame_traj, expansion, eps, cfg.transient_cutoff, n, k
        )
        residuals.append(fit.residual_sup)
        # scatter of slip velocity against the drive term u*psi; the graph
        # coefficient is bilinear, so its value at xi = (1, 1) is exactly
        # the predicted slope per unit eps
        drive = fit.xis[:, 0] * fit.xis[:, 1]
        slip = fit.etas[:, 0]
        slopes.append(analysis.fit_slope_through_origin(drive, slip))
        expected_slopes.append(eps * expansion.h1(fit.qs[0], np.array([1.0, 1.0]))[0])
        scatter = _out_path(cfg, ".csv", f"_manifold_eps{eps:g}")
        scatter.parent.mkdir(parents=True, exist_ok=True)
        lines = ["drive,slip"] + [
            _fmt(a) + "," + _fmt(b) for a, b in zip(drive, slip)
        ]
        scatter.write_text("\n".join(lines) + "\n", newline="\n")
        print(f"wrote {scatter}")

    doc = {
        "system": cfg.system,
        "model": cfg.model,
        "eps_ladder": list(cfg.eps),
        "transient_cutoff": cfg.transient_cutoff,
        "initial_energy": float(
            entry.energy_of_state(cfg.params, _initial_state(cfg, fric_spec))
        ),
        "residual_sup": residuals,
        "residual_ratios": [
            residuals[i] / residuals[i + 1] for i in range(len(residuals) - 1)
        ],
        "slopes": slopes,
        "expected_slopes": expected_slopes,
        "config_echo": cfg.echo(),
    }
    path = _out_path(cfg, ".json", "_manifold")
    _write_json(path, doc)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_list_systems() -> int:
    for name in sorted(REGISTRY):
        entry = REGISTRY[name]
        models = ", ".join(sorted(entry.models))
        params = ", ".join(
            f"{k}={v:g}" for k, v in sorted(entry.param_defaults.items())
        )
        print(f"{name}: models = {models}; params = {params}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--system", help="registered system name")
    p.add_argument("--model", choices=("nh", "friction", "corrected", "fast"))
    p.add_argument(
        "--eps",
        type=float,
        action="append",
        help="friction scale; repeat the flag for a ladder",
    )
    p.add_argument("--state", help="comma-separated initial state")
    p.add_argument("--t0", type=float)
    p.add_argument("--t1", type=float)
    p.add_argument("--dt", type=float, help="fixed step (default: min(1e-3, eps/20))")
    p.add_argument("--sample-dt", dest="sample_dt", type=float)
    p.add_argument("--method", choices=("rk4", "rkf45"))
    p.add_argument("--out", help="output path (default under $NONHOLIB_OUT_DIR)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument(
        "--param",
        action="append",
        metavar="KEY=VAL",
        help="numeric system parameter, repeatable",
    )
    p.add_argument("--window-start", dest="window_start", type=float)
    p.add_argument("--transient-cutoff", dest="transient_cutoff", type=float)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nonholib",
        description="Constrained-dynamics experiments: large-friction "
        "realizations, convergence ladders and slow-manifold extraction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("simulate", "integrate one model and write trajectory files"),
        ("compare", "eps-ladder convergence report against the constrained model"),
        ("manifold", "slow-manifold residuals and scatter data"),
    ):
        _add_common_flags(sub.add_parser(name, help=desc))
    sub.add_parser("list-systems", help="show the system registry")

    args = parser.parse_args(argv)
    if args.command == "list-systems":
        return cmd_list_systems()
    try:
        cfg = build_config(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "compare":
            return cmd_compare(cfg)
        return cmd_manifold(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteState, StepUnderflow) as exc:
        t = getattr(exc, "t", None)
        where = f" at t={t:.6g}" if t is not None else ""
        print(f"numerical blow-up{where}: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except analysis.TransientTooShort as exc:
        print(f"analysis precondition failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
