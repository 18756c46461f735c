"""Configuration documents (TOML or JSON) and their resolution into run objects.

Unknown keys are errors. ``resolve`` fills every default so that the result,
written out as ``meta.json``, reproduces the run when read back.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .bath import (BathMode, Continuum, ExplicitModes, Model, QubitParams, SpectralDensity,
                   resolve_modes)
from .eom import METHODS, RIDGE_SCALINGS, SolverPolicy
from .errors import ConfigError
from .integrator import RunConfig

# keys written by the tool next to the config; ignored when read back
RESERVED = ("provenance",)

QUBIT_DEFAULTS = dict(v=1.0, delta=0.0)
BATH_DEFAULTS = dict(mode="explicit", modes=[], alpha=0.002, s=1.0, omega_c=10.0, n_modes=80,
                     omega_max=None, omega_min=1e-3, scheme="linear", theta=math.pi / 2)
RUN_DEFAULTS = dict(t_start=-20.0, t_end=40.0, dt=1e-3, record_stride=100, M=3, seed=0,
                    delta_offset=1e-3, steady_window_fraction=0.1, flatness_tol=0.005,
                    norm_drift_abort=1e-4, norm_drift_warn=1e-6, snapshot_stride=0)
SOLVER_DEFAULTS = dict(tikhonov_eps=1e-5, svd_cutoff=1e-10, condition_warn=1e12,
                       method="structured", norm_correction=True, refine_sweeps=1,
                       ridge_scaling="configuration")
OUTPUT_DEFAULTS = dict(directory=".", formats=["csv"])
ORACLE_DEFAULTS = dict(n_max=-1, check_truncation=True)  # n_max < 0 picks by mode count
SWEEP_DEFAULTS = dict(axes={}, cap=512, save_trajectories=False)
CONVERGE_DEFAULTS = dict(kind="M", values=[], threshold=0.01)

SECTIONS = dict(qubit=QUBIT_DEFAULTS, bath=BATH_DEFAULTS, run=RUN_DEFAULTS, solver=SOLVER_DEFAULTS,
                output=OUTPUT_DEFAULTS, oracle=ORACLE_DEFAULTS, sweep=SWEEP_DEFAULTS,
                converge=CONVERGE_DEFAULTS)

MODE_KEYS = ("omega", "gamma", "theta")
SWEEP_AXES = ("delta", "gamma", "theta", "alpha", "s", "omega", "M", "N", "omega_max", "dt")
CONVERGE_KINDS = ("M", "N", "omega_max", "dt")
OUTPUT_FORMATS = ("csv", "npz")

HELP = {
    "qubit.v": "sweep velocity (> 0)",
    "qubit.delta": "tunneling strength (>= 0)",
    "bath.mode": "explicit (list of modes) or continuum (discretised spectral density)",
    "bath.modes": "explicit modes: list of {omega, gamma, theta}; theta defaults to pi/2",
    "bath.alpha": "continuum coupling strength",
    "bath.s": "spectral exponent (1 = Ohmic)",
    "bath.omega_c": "cutoff frequency",
    "bath.n_modes": "number of discrete modes",
    "bath.omega_max": "upper grid edge; default 5 omega_c",
    "bath.omega_min": "lower edge of the logarithmic grid",
    "bath.scheme": "linear or logarithmic",
    "bath.theta": "shared interaction angle in [0, pi/2]; pi/2 = pure sigma_x coupling",
    "run.t_start": "initial time",
    "run.t_end": "final time",
    "run.dt": "RK4 step",
    "run.record_stride": "steps between recorded observables",
    "run.M": "multiplicity of the ansatz",
    "run.seed": "seed of the generator for the initial offsets",
    "run.delta_offset": "size of the initial offsets of the extra configurations",
    "run.steady_window_fraction": "trailing fraction of records used for the steady state",
    "run.flatness_tol": "max std of P_down in that window for a flat steady state",
    "run.norm_drift_abort": "abort when |norm - 1| exceeds this",
    "run.norm_drift_warn": "warn when |norm - 1| exceeds this",
    "run.snapshot_stride": "keep every k-th recorded raw state (0 = none, needs npz output)",
    "solver.tikhonov_eps": "ridge relative to the Gram diagonal scale",
    "solver.svd_cutoff": "relative eigenvalue cutoff of the fallback solve",
    "solver.condition_warn": "condition estimate above which a warning is recorded",
    "solver.method": "structured (default), hermitian (dense Gram) or real (reference only)",
    "solver.norm_correction": "enforce the exact equation along the state itself",
    "solver.refine_sweeps": "iterated-Tikhonov sweeps after the first solve",
    "solver.ridge_scaling": "configuration (ridge per coherent-state block) or global",
    "output.directory": "output directory (overridden by --out)",
    "output.formats": "subset of [csv, npz]",
    "oracle.n_max": "Fock cutoff per mode; negative picks 40/12/6 for 1/2/3 modes",
    "oracle.check_truncation": "rerun with n_max + 8 and require agreement to 1e-4",
    "sweep.axes": "table of axis name -> list of values; names: " + ", ".join(SWEEP_AXES),
    "sweep.cap": "maximum number of runs",
    "sweep.save_trajectories": "write each run's trajectory to runs/<index>/",
    "converge.kind": "one of " + ", ".join(CONVERGE_KINDS),
    "converge.values": "values scanned in order",
    "converge.threshold": "sup-norm difference of P_down counted as converged",
}


@dataclass
class SimulationConfig:
    qubit: QubitParams
    bath: Any  # ExplicitModes | Continuum
    run: RunConfig = RunConfig()
    solver: SolverPolicy = SolverPolicy()
    M: int = 3
    seed: int = 0
    delta_offset: float = 1e-3
    output: dict = field(default_factory=lambda: dict(OUTPUT_DEFAULTS))
    oracle: dict = field(default_factory=lambda: dict(ORACLE_DEFAULTS))
    sweep: dict = field(default_factory=lambda: dict(SWEEP_DEFAULTS))
    converge: dict = field(default_factory=lambda: dict(CONVERGE_DEFAULTS))

    def model(self) -> Model:
        return Model(self.qubit, resolve_modes(self.bath))

    def with_seed(self, seed: int) -> "SimulationConfig":
        return replace(self, seed=int(seed))


def load_document(path) -> dict:
    """Read a TOML or JSON config; JSON is recognised by suffix or leading brace."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        if p.suffix.lower() == ".json" or text.lstrip().startswith("{"):
            return json.loads(text)
        return tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from exc


def _section(doc: dict, name: str) -> dict:
    raw = doc.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"[{name}] must be a table")
    defaults = SECTIONS[name]
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    out = dict(defaults)
    out.update(raw)
    return out


def _num(sec: str, key: str, val, kind=float):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{sec}.{key} must be a number, got {val!r}")
    if kind is int:
        if int(val) != val:
            raise ConfigError(f"{sec}.{key} must be an integer, got {val!r}")
        return int(val)
    val = float(val)
    if not math.isfinite(val):
        raise ConfigError(f"{sec}.{key} must be finite")
    return val


def _bool(sec, key, val):
    if not isinstance(val, bool):
        raise ConfigError(f"{sec}.{key} must be true or false, got {val!r}")
    return val


def parse(doc: dict) -> SimulationConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a table")
    unknown = sorted(set(doc) - set(SECTIONS) - set(RESERVED))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    q = _section(doc, "qubit")
    qubit = QubitParams(_num("qubit", "v", q["v"]), _num("qubit", "delta", q["delta"]))

    b = _section(doc, "bath")
    if b["mode"] == "explicit":
        modes = []
        if not isinstance(b["modes"], list):
            raise ConfigError("bath.modes must be a list of tables")
        for j, m in enumerate(b["modes"]):
            if not isinstance(m, dict):
                raise ConfigError(f"bath.modes[{j}] must be a table")
            bad = sorted(set(m) - set(MODE_KEYS))
            if bad:
                raise ConfigError(f"unknown key(s) in bath.modes[{j}]: {', '.join(bad)}")
            missing = [k for k in ("omega", "gamma") if k not in m]
            if missing:
                raise ConfigError(f"bath.modes[{j}] lacks {', '.join(missing)}")
            modes.append(BathMode(_num("bath.modes", "omega", m["omega"]),
                                  _num("bath.modes", "gamma", m["gamma"]),
                                  _num("bath.modes", "theta", m.get("theta", math.pi / 2))))
        bath = ExplicitModes(modes)
    elif b["mode"] == "continuum":
        sd = SpectralDensity(_num("bath", "alpha", b["alpha"]), _num("bath", "s", b["s"]),
                             _num("bath", "omega_c", b["omega_c"]))
        wmax = None if b["omega_max"] is None else _num("bath", "omega_max", b["omega_max"])
        bath = Continuum(sd, _num("bath", "n_modes", b["n_modes"], int), wmax, str(b["scheme"]),
                         _num("bath", "theta", b["theta"]), _num("bath", "omega_min", b["omega_min"]))
        if bath.scheme == "logarithmic" and not 0 < bath.omega_min < bath.resolved_omega_max:
            raise ConfigError("logarithmic grid needs 0 < omega_min < omega_max")
    else:
        raise ConfigError(f"bath.mode must be 'explicit' or 'continuum', got {b['mode']!r}")

    r = _section(doc, "run")
    run = RunConfig(
        t_start=_num("run", "t_start", r["t_start"]), t_end=_num("run", "t_end", r["t_end"]),
        dt=_num("run", "dt", r["dt"]), record_stride=_num("run", "record_stride", r["record_stride"], int),
        norm_drift_abort=_num("run", "norm_drift_abort", r["norm_drift_abort"]),
        norm_drift_warn=_num("run", "norm_drift_warn", r["norm_drift_warn"]),
        steady_window_fraction=_num("run", "steady_window_fraction", r["steady_window_fraction"]),
        flatness_tol=_num("run", "flatness_tol", r["flatness_tol"]),
        snapshot_stride=_num("run", "snapshot_stride", r["snapshot_stride"], int))
    M = _num("run", "M", r["M"], int)
    if M < 1:
        raise ConfigError(f"run.M must be >= 1, got {M}")
    seed = _num("run", "seed", r["seed"], int)
    if not 0 <= seed < 2**64:
        raise ConfigError(f"run.seed must be an unsigned 64-bit integer, got {seed}")
    delta_offset = _num("run", "delta_offset", r["delta_offset"])
    if delta_offset < 0:
        raise ConfigError("run.delta_offset must be >= 0")

    s = _section(doc, "solver")
    if s["method"] not in METHODS:
        raise ConfigError(f"solver.method must be one of {METHODS}")
    if s["ridge_scaling"] not in RIDGE_SCALINGS:
        raise ConfigError(f"solver.ridge_scaling must be one of {RIDGE_SCALINGS}")
    solver = SolverPolicy(_num("solver", "tikhonov_eps", s["tikhonov_eps"]),
                          _num("solver", "svd_cutoff", s["svd_cutoff"]),
                          _num("solver", "condition_warn", s["condition_warn"]), s["method"],
                          _bool("solver", "norm_correction", s["norm_correction"]),
                          _num("solver", "refine_sweeps", s["refine_sweeps"], int),
                          str(s["ridge_scaling"]))

    o = _section(doc, "output")
    fmts = o["formats"]
    if not isinstance(fmts, list) or not fmts or any(f not in OUTPUT_FORMATS for f in fmts):
        raise ConfigError(f"output.formats must be a non-empty subset of {list(OUTPUT_FORMATS)}")
    output = dict(directory=str(o["directory"]), formats=list(fmts))

    orc = _section(doc, "oracle")
    oracle = dict(n_max=_num("oracle", "n_max", orc["n_max"], int),
                  check_truncation=_bool("oracle", "check_truncation", orc["check_truncation"]))

    sw = _section(doc, "sweep")
    axes = sw["axes"]
    if not isinstance(axes, dict):
        raise ConfigError("sweep.axes must be a table of name -> list")
    clean_axes = {}
    for name, vals in axes.items():
        if name not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {name!r}; allowed: {', '.join(SWEEP_AXES)}")
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"sweep axis {name!r} needs a non-empty list of values")
        kind = int if name in ("M", "N") else float
        clean_axes[name] = [_num("sweep.axes", name, v, kind) for v in vals]
    sweep = dict(axes=clean_axes, cap=_num("sweep", "cap", sw["cap"], int),
                 save_trajectories=_bool("sweep", "save_trajectories", sw["save_trajectories"]))

    cv = _section(doc, "converge")
    if cv["kind"] not in CONVERGE_KINDS:
        raise ConfigError(f"converge.kind must be one of {CONVERGE_KINDS}")
    kind = int if cv["kind"] in ("M", "N") else float
    if not isinstance(cv["values"], list):
        raise ConfigError("converge.values must be a list")
    converge = dict(kind=cv["kind"], values=[_num("converge", "values", v, kind) for v in cv["values"]],
                    threshold=_num("converge", "threshold", cv["threshold"]))

    return SimulationConfig(qubit, bath, run, solver, M, seed, delta_offset, output, oracle, sweep,
                            converge)


def load(path) -> SimulationConfig:
    return parse(load_document(path))


def to_document(cfg: SimulationConfig) -> dict:
    """Fully resolved document: every default filled in, ``omega_max`` made explicit."""
    doc = {"qubit": dict(v=cfg.qubit.v, delta=cfg.qubit.delta)}
    if isinstance(cfg.bath, ExplicitModes):
        doc["bath"] = dict(mode="explicit",
                           modes=[dict(omega=m.omega, gamma=m.gamma, theta=m.theta) for m in cfg.bath.modes])
    else:
        c = cfg.bath
        doc["bath"] = dict(mode="continuum", alpha=c.density.alpha, s=c.density.s,
                           omega_c=c.density.omega_c, n_modes=int(c.n_modes),
                           omega_max=c.resolved_omega_max, omega_min=c.omega_min, scheme=c.scheme,
                           theta=c.theta)
    rc = asdict(cfg.run)
    rc.update(M=cfg.M, seed=cfg.seed, delta_offset=cfg.delta_offset)
    doc["run"] = {k: rc[k] for k in RUN_DEFAULTS}
    sv = asdict(cfg.solver)
    doc["solver"] = {k: sv[k] for k in SOLVER_DEFAULTS}
    doc["output"] = dict(cfg.output)
    doc["oracle"] = dict(cfg.oracle)
    doc["sweep"] = dict(axes={k: list(v) for k, v in cfg.sweep["axes"].items()}, cap=cfg.sweep["cap"],
                        save_trajectories=cfg.sweep["save_trajectories"])
    doc["converge"] = dict(cfg.converge)
    return doc


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{ " + ", ".join(f"{k} = {_toml_value(x)}" for k, x in v.items()) + " }"
    raise TypeError(f"cannot write {type(v).__name__} as TOML")


def defaults_toml() -> str:
    """Commented TOML listing every key and its default."""
    lines = ["# Every recognised key with its default value. Unknown keys are rejected."]
    for name, sec in SECTIONS.items():
        lines.append("")
        lines.append(f"[{name}]")
        for key, val in sec.items():
            lines.append(f"# {HELP[f'{name}.{key}']}")
            if val is None:
                lines.append(f"# {key} =   (unset)")
            elif key == "axes":
                lines.append("# axes = { gamma = [0.0, 0.5, 1.2], delta = [0.0, 0.5] }")
                lines.append(f"{key} = {{}}")
            elif key == "modes":
                lines.append("# modes = [{ omega = 10.0, gamma = 1.2, theta = 1.5707963267948966 }]")
                lines.append(f"{key} = []")
            else:
                lines.append(f"{key} = {_toml_value(val)}")
    return "\n".join(lines) + "\n"
