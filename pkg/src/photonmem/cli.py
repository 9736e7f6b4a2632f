"""Command-line front end: reference inputs, figure data, CSV/JSON emission.

Subcommands
-----------
optimal-spinwave   optimal retrieval modes and max efficiencies per depth
shape-controls     optimal storage controls for the reference input
curves             efficiency-vs-depth sweep (backward/forward/square pulse)
simulate           storage (and optional retrieval) with a piecewise control
iterate            time-reversal retrieval optimization from a trial wave

Configuration is a flat ``key = value`` text file (# comments allowed);
command-line flags override file values.  All outputs are deterministic for
a fixed configuration.  Exit codes: 0 success, 1 configuration error,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    ControlField,
    FieldMode,
    MediumParams,
    PhotonMemError,
    SpaceGrid,
    SpinWave,
    TimeGrid,
    flip,
)

__all__ = ["ConfigError", "RunConfig", "make_reference_input", "main"]


class ConfigError(PhotonMemError):
    """Bad key, value, or combination in the run configuration."""


# key: (parser, default); None default means command decides
_KEY_SPECS = {
    "out": (str, "photonmem_out"),
    "jobs": (int, 1),
    "tol": (float, 1e-8),
    "d": (str, "1,10,100"),
    "delta": (float, 0.0),
    "gauss_nodes": (int, 200),
    "n_zeta": (int, 256),
    "input_T": (float, 20.0),
    "input_n": (int, 2001),
    "h_max": (float, None),
    "d_min": (float, 0.3),
    "d_max": (float, 300.0),
    "d_points": (int, 25),
    "control": (str, "0:1"),
    "retrieve": (str, "none"),
    "retrieval_control": (str, ""),
    "seed": (int, 0),
    "init": (str, "flat"),
    "omega": (float, 0.0),
    "max_iter": (int, 500),
}


class RunConfig:
    """Typed, validated parameters for one command invocation."""

    def __init__(self, values: dict):
        for key, (cast, default) in _KEY_SPECS.items():
            raw = values.get(key, default)
            if raw is None:
                setattr(self, key, None)
                continue
            try:
                setattr(self, key, cast(raw))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for key '{key}': {raw!r}") from exc
        unknown = set(values) - set(_KEY_SPECS)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        self._validate()

    def _validate(self):
        for key in ("jobs", "gauss_nodes", "n_zeta", "input_n", "d_points", "max_iter"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"key '{key}' must be positive")
        for key in ("tol", "input_T", "d_min", "d_max"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"key '{key}' must be positive")
        if self.h_max is not None and self.h_max <= 0:
            raise ConfigError("key 'h_max' must be positive")
        if self.d_max < self.d_min:
            raise ConfigError("key 'd_max' must be >= d_min")
        if self.retrieve not in ("none", "backward", "forward"):
            raise ConfigError("key 'retrieve' must be none, backward or forward")
        if self.init not in ("flat", "random"):
            raise ConfigError("key 'init' must be flat or random")

    def d_list(self) -> list[float]:
        try:
            vals = [float(x) for x in self.d.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad value for key 'd': {self.d!r}") from exc
        if not vals or any(v <= 0 or not math.isfinite(v) for v in vals):
            raise ConfigError("key 'd' must list positive finite depths")
        return vals


def parse_config_file(path: Path) -> dict:
    values = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values


def make_reference_input(T: float, grid: TimeGrid | None = None) -> FieldMode:
    """Gaussian-like input mode on [0, T], vanishing exactly at the ends.

    A Gaussian centered at T/2 with standard deviation 0.15 T, shifted down
    by its boundary value so the endpoints are exactly zero, then normalized
    to unit energy.  Symmetric about T/2 by construction.
    """
    if T <= 0:
        raise ValueError("duration must be positive")
    if grid is None:
        grid = TimeGrid.linspace(0.0, T, 2001)
    t = grid.times - grid.tau0
    g = np.exp(-((t - 0.5 * T) ** 2) / (2.0 * (0.15 * T) ** 2))
    g = np.clip(g - g[0], 0.0, None)
    g /= np.sqrt(np.trapezoid(g**2, dx=grid.dtau))
    return FieldMode(grid=grid, samples=g.astype(complex))


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, header: list[str], columns: list[np.ndarray]):
    rows = len(columns[0])
    lines = [",".join(header)]
    for i in range(rows):
        lines.append(",".join(_fmt(float(col[i])) for col in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _metadata(cfg: RunConfig) -> dict:
    return {
        "version": __version__,
        "grids": {"gauss_nodes": cfg.gauss_nodes, "n_zeta": cfg.n_zeta,
                  "input_T": cfg.input_T, "input_n": cfg.input_n},
        "tolerances": {"tol": cfg.tol},
    }


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PhotonMemError(f"cannot create output directory {out}: {exc}") from exc
    return out


def cmd_optimal_spinwave(cfg: RunConfig) -> int:
    from .kernel import KernelOperator, power_iteration

    out = _outdir(cfg)
    grid = SpaceGrid.gauss_legendre(cfg.gauss_nodes)
    results = []
    for d in cfg.d_list():
        op = KernelOperator.build(MediumParams(d=d), grid)
        samples, eta, iters = power_iteration(op, tol=cfg.tol)
        _write_csv(
            out / f"spinwave_d{d:g}.csv",
            ["zeta", "S"],
            [grid.nodes, samples.real],
        )
        results.append({"d": d, "eta_r_max": eta, "iterations": iters})
    _write_json(
        out / "optimal_spinwave_summary.json",
        {"command": "optimal-spinwave", "params": {"d": cfg.d_list()},
         "results": results, "metadata": _metadata(cfg)},
    )
    return 0


def cmd_shape_controls(cfg: RunConfig) -> int:
    from .adiabatic import optimal_storage_control

    out = _outdir(cfg)
    grid = SpaceGrid.gauss_legendre(cfg.gauss_nodes)
    input_mode = make_reference_input(cfg.input_T, TimeGrid.linspace(0, cfg.input_T, cfg.input_n))
    results = []
    for d in cfg.d_list():
        params = MediumParams(d=d, delta=cfg.delta)
        res = optimal_storage_control(input_mode, params, grid=grid, h_max=cfg.h_max)
        om = res.control.samples
        disp = om * math.sqrt(cfg.input_T / d)  # control in sqrt(d/T) display units
        _write_csv(
            out / f"control_d{d:g}.csv",
            ["tau", "re_omega", "im_omega", "re_omega_display", "im_omega_display"],
            [input_mode.grid.times, om.real, om.imag, disp.real, disp.imag],
        )
        results.append({
            "d": d,
            "predicted_eta_s": res.predicted_eta_s,
            "truncation_loss": res.shaping.truncation_loss,
            "h_max": res.shaping.h_max,
        })
    _write_json(
        out / "shape_controls_summary.json",
        {"command": "shape-controls",
         "params": {"d": cfg.d_list(), "delta": cfg.delta, "input_T": cfg.input_T},
         "results": results, "metadata": _metadata(cfg)},
    )
    return 0


def _curve_point(task: tuple) -> dict:
    """One depth of the efficiency sweep; must stay picklable for --jobs."""
    d, delta, gauss_nodes, n_zeta, input_T, input_n, tol = task
    from .kernel import optimal_spin_wave, retrieval_efficiency
    from .optimizer import forward_max_efficiency
    from .simulator import simulate_storage

    try:
        grid = SpaceGrid.gauss_legendre(gauss_nodes)
        _, eta_max = optimal_spin_wave(d, grid, tol=tol)
        eta_back = eta_max**2
        eta_forw = forward_max_efficiency(d, grid)
        input_mode = make_reference_input(input_T, TimeGrid.linspace(0, input_T, input_n))
        omega_sq = math.sqrt(d / input_T)  # group-velocity matching: v_g T = L
        ctrl = ControlField(
            grid=input_mode.grid,
            samples=np.full(input_mode.grid.n, omega_sq, dtype=complex),
        )
        run = simulate_storage(input_mode, ctrl, MediumParams(d=d, delta=delta), n_zeta=n_zeta)
        stored = SpinWave(grid=run.final_state.grid, samples=run.final_state.S)
        eta_square = retrieval_efficiency(flip(stored), d)
        return {"d": d, "eta_back": eta_back, "eta_forw": eta_forw, "eta_square": eta_square}
    except Exception as exc:  # per-point failure becomes NaN, sweep continues
        return {"d": d, "eta_back": math.nan, "eta_forw": math.nan,
                "eta_square": math.nan, "error": f"{type(exc).__name__}: {exc}"}


def cmd_curves(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    ds = np.geomspace(cfg.d_min, cfg.d_max, cfg.d_points)
    tasks = [
        (float(d), cfg.delta, cfg.gauss_nodes, cfg.n_zeta, cfg.input_T, cfg.input_n, cfg.tol)
        for d in ds
    ]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            points = list(pool.map(_curve_point, tasks))
    else:
        points = [_curve_point(t) for t in tasks]
    for p in points:
        if "error" in p:
            print(f"warning: d={p['d']:g} failed: {p['error']}", file=sys.stderr)
    _write_csv(
        out / "curves.csv",
        ["d", "eta_back", "eta_forw", "eta_square"],
        [np.array([p[k] for p in points]) for k in ("d", "eta_back", "eta_forw", "eta_square")],
    )
    _write_json(
        out / "curves_summary.json",
        {"command": "curves",
         "params": {"d_min": cfg.d_min, "d_max": cfg.d_max, "d_points": cfg.d_points,
                    "delta": cfg.delta, "input_T": cfg.input_T},
         "results": points, "metadata": _metadata(cfg)},
    )
    return 0


def _parse_piecewise_control(spec: str, grid: TimeGrid, key: str) -> ControlField:
    """'tau:value; tau:value; ...' with complex values, linearly interpolated."""
    knots_t, knots_v = [], []
    for chunk in spec.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ConfigError(f"key '{key}': expected 'tau:value' pairs, got {chunk!r}")
        t_str, _, v_str = chunk.partition(":")
        try:
            knots_t.append(float(t_str))
            knots_v.append(complex(v_str.replace(" ", "")))
        except ValueError as exc:
            raise ConfigError(f"key '{key}': bad pair {chunk!r}") from exc
    if not knots_t:
        raise ConfigError(f"key '{key}': empty control specification")
    order = np.argsort(knots_t)
    t = np.asarray(knots_t, float)[order]
    v = np.asarray(knots_v, complex)[order]
    times = grid.times
    re = np.interp(times, t, v.real, left=v.real[0], right=v.real[-1])
    im = np.interp(times, t, v.imag, left=v.imag[0], right=v.imag[-1])
    return ControlField(grid=grid, samples=re + 1j * im)


def cmd_simulate(cfg: RunConfig) -> int:
    from .simulator import energy_audit, simulate_retrieval, simulate_storage

    out = _outdir(cfg)
    params = MediumParams(d=cfg.d_list()[0], delta=cfg.delta)
    input_mode = make_reference_input(cfg.input_T, TimeGrid.linspace(0, cfg.input_T, cfg.input_n))
    ctrl = _parse_piecewise_control(cfg.control, input_mode.grid, "control")
    run = simulate_storage(input_mode, ctrl, params, n_zeta=cfg.n_zeta)
    audit = energy_audit(run)
    _write_csv(
        out / "output_mode.csv",
        ["tau", "re_E", "im_E"],
        [run.output_mode.grid.times, run.output_mode.samples.real, run.output_mode.samples.imag],
    )
    summary = {
        "command": "simulate",
        "params": {"d": params.d, "delta": params.delta, "input_T": cfg.input_T,
                   "control": cfg.control},
        "results": {
            "storage": {
                "eta_storage": run.breakdown.eta_storage,
                "leak_fraction": run.breakdown.leak_fraction,
                "decay_fraction": run.breakdown.decay_fraction,
                "residual_fraction": run.breakdown.residual_fraction,
                "audit_defect": audit.defect,
            }
        },
        "metadata": _metadata(cfg),
    }
    if cfg.retrieve != "none":
        stored = SpinWave(grid=run.final_state.grid, samples=run.final_state.S)
        rspec = cfg.retrieval_control or cfg.control
        rgrid = TimeGrid.linspace(0.0, cfg.input_T, cfg.input_n)
        rctrl = _parse_piecewise_control(rspec, rgrid, "retrieval_control")
        rrun = simulate_retrieval(stored, rctrl, params, direction=cfg.retrieve,
                                  n_zeta=cfg.n_zeta)
        raudit = energy_audit(rrun)
        _write_csv(
            out / "retrieved_mode.csv",
            ["tau", "re_E", "im_E"],
            [rrun.output_mode.grid.times, rrun.output_mode.samples.real,
             rrun.output_mode.samples.imag],
        )
        summary["results"]["retrieval"] = {
            "direction": cfg.retrieve,
            "eta_retrieval": rrun.breakdown.eta_retrieval,
            "eta_total": run.breakdown.eta_storage * rrun.breakdown.eta_retrieval,
            "decay_fraction": rrun.breakdown.decay_fraction,
            "residual_fraction": rrun.breakdown.residual_fraction,
            "audit_defect": raudit.defect,
        }
    _write_json(out / "simulate_summary.json", summary)
    return 0


def cmd_iterate(cfg: RunConfig) -> int:
    from .optimizer import completing_control, iterate_retrieval

    out = _outdir(cfg)
    d = cfg.d_list()[0]
    params = MediumParams(d=d, delta=cfg.delta)
    grid = SpaceGrid.gauss_legendre(cfg.gauss_nodes)
    if cfg.init == "flat":
        init = SpinWave(grid=grid, samples=np.ones(grid.n, dtype=complex))
    else:
        rng = np.random.default_rng(cfg.seed)
        coeffs = rng.normal(size=4)
        z = grid.nodes
        samples = 1.0 + 0.3 * sum(
            c * np.sin((k + 1) * np.pi * z) for k, c in enumerate(coeffs)
        )
        init = SpinWave(grid=grid, samples=np.clip(samples, 0.05, None).astype(complex))
    ctrl = completing_control(params, omega=cfg.omega if cfg.omega > 0 else None)
    trace = iterate_retrieval(d, ctrl, init, tol=cfg.tol, max_iter=cfg.max_iter)
    _write_csv(
        out / "iterate_mode.csv",
        ["zeta", "re_S", "im_S"],
        [grid.nodes, trace.final_mode.samples.real, trace.final_mode.samples.imag],
    )
    _write_json(
        out / "iterate_summary.json",
        {"command": "iterate",
         "params": {"d": d, "delta": cfg.delta, "init": cfg.init, "seed": cfg.seed},
         "results": {"efficiencies": list(map(float, trace.efficiencies)),
                     "iterations": trace.iterations, "converged": trace.converged},
         "metadata": _metadata(cfg)},
    )
    return 0


_COMMANDS = {
    "optimal-spinwave": cmd_optimal_spinwave,
    "shape-controls": cmd_shape_controls,
    "curves": cmd_curves,
    "simulate": cmd_simulate,
    "iterate": cmd_iterate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photonmem",
        description="Optimal photon storage and retrieval in Lambda-type atomic media.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="flat key=value file")
        p.add_argument("--d", type=str, default=None, help="comma-separated depth list")
        p.add_argument("--delta", type=float, default=None)
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--tol", type=float, default=None)
        if name == "curves":
            p.add_argument("--d-min", dest="d_min", type=float, default=None)
            p.add_argument("--d-max", dest="d_max", type=float, default=None)
            p.add_argument("--d-points", dest="d_points", type=int, default=None)
        if name in ("shape-controls", "curves", "simulate"):
            p.add_argument("--input-T", dest="input_T", type=float, default=None)
        if name == "simulate":
            p.add_argument("--control", type=str, default=None)
            p.add_argument("--retrieve", type=str, default=None)
        if name == "iterate":
            p.add_argument("--init", type=str, default=None)
            p.add_argument("--seed", type=int, default=None)
            p.add_argument("--omega", type=float, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        values = {}
        if args.config:
            values.update(parse_config_file(Path(args.config)))
        for key in _KEY_SPECS:
            flag = getattr(args, key, None)
            if flag is not None:
                values[key] = flag
        cfg = RunConfig(values)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return _COMMANDS[args.command](cfg)
    except (PhotonMemError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
