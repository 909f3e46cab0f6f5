"""Command-line driver: ``geophase run <config.json>`` and ``geophase list-models``."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import abelian, models, nonabelian, nonadiabatic, propagator, quadrupole
from .errors import ConfigInvalid, GeoPhaseError, ModelUnknown
from .io import complex_matrix, dumps, write_csv, write_json

SCHEMA_VERSION = 1
METHODS = ("abelian", "nonabelian", "nonadiabatic", "quadrupole", "propagate", "sweep")
TOLERANCES = ("cond_tol", "gap_tol", "leak_tol")


@dataclass(frozen=True)
class Param:
    kind: str
    default: object = None
    required: bool = False

    def schema(self):
        out = {"type": self.kind, "required": self.required}
        if not self.required:
            out["default"] = self.default
        return out


# model name -> (parameters, allowed loops, allowed methods)
CATALOG = {
    "spin_half": (
        {},
        ("latitude", "plaquette"),
        ("abelian", "nonabelian", "nonadiabatic", "propagate", "sweep"),
    ),
    "two_spin": (
        {"omega01": Param("number", required=True), "omega02": Param("number", required=True),
         "J": Param("number", 0.0), "omega1": Param("number", required=True),
         "omega_r": Param("number", required=True)},
        ("circular_drive",),
        ("abelian", "nonadiabatic", "propagate"),
    ),
    "quadrupole": (
        {"omega0": Param("number", 1.0), "omega1": Param("number", required=True),
         "theta": Param("number", required=True)},
        ("rotation",),
        ("nonabelian", "quadrupole", "propagate"),
    ),
    "three_level": (
        {"template": Param("complex_matrix", required=True)},
        ("phase",),
        ("abelian", "nonabelian"),
    ),
}

LOOPS = {
    "latitude": {"theta": Param("number", required=True), "omega_r": Param("number", 1.0),
                 "magnitude": Param("number", 1.0)},
    "plaquette": {"center": Param("vector", required=True), "axes": Param("int_pair", [0, 1]),
                  "size": Param("number", required=True)},
    "circular_drive": {"polarization": Param("int", 1)},
    "rotation": {},
    "phase": {"phi0": Param("number", 0.0), "winding": Param("int", 1)},
}


def catalog() -> dict:
    return {
        name: {"params": {k: p.schema() for k, p in params.items()},
               "loops": {ln: {k: p.schema() for k, p in LOOPS[ln].items()} for ln in loops},
               "methods": list(methods)}
        for name, (params, loops, methods) in CATALOG.items()
    }


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

def _check_value(where: str, p: Param, v):
    def bad(msg):
        raise ConfigInvalid(f"{where}: {msg}")

    if p.kind == "number":
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            bad("expected a finite number")
        return float(v)
    if p.kind == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            bad("expected an integer")
        return v
    if p.kind == "int_pair":
        if not (isinstance(v, list) and len(v) == 2 and all(isinstance(x, int) for x in v)):
            bad("expected two integers")
        return tuple(v)
    if p.kind == "vector":
        if not (isinstance(v, list) and v and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                                  for x in v)):
            bad("expected a list of numbers")
        return [float(x) for x in v]
    if p.kind == "complex_matrix":
        try:
            M = np.array([[complex(*z) if isinstance(z, list) else complex(z) for z in row] for row in v])
        except (TypeError, ValueError):
            bad("expected a matrix of numbers or [re, im] pairs")
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            bad("expected a square matrix")
        return M
    raise AssertionError(p.kind)


def _fill(where: str, schema: dict, given) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ConfigInvalid(f"{where}: expected an object")
    extra = sorted(set(given) - set(schema))
    if extra:
        raise ConfigInvalid(f"{where}.{extra[0]}: unknown field")
    out = {}
    for k, p in schema.items():
        if k in given:
            out[k] = _check_value(f"{where}.{k}", p, given[k])
        elif p.required:
            raise ConfigInvalid(f"{where}.{k}: required field missing")
        else:
            out[k] = p.default
    return out


@dataclass(frozen=True)
class JobConfig:
    model: str
    model_params: dict
    loop: str
    loop_params: dict
    steps: int
    T: float | None
    method: str
    level: int
    tolerances: dict
    options: dict
    raw: dict

    @property
    def steps_explicit(self) -> bool:
        return "steps" in self.raw.get("loop", {})

    @property
    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()


TOP_FIELDS = {"schema_version", "model", "loop", "method", "level", "tolerances", "options", "output"}


def validate_config(raw) -> JobConfig:
    """Check a parsed config and fill defaults.

    Raises
    ------
    ConfigInvalid
        Naming the first offending field.
    ModelUnknown
        If the model name is not in the catalog.
    """
    if not isinstance(raw, dict):
        raise ConfigInvalid("config: expected a JSON object")
    extra = sorted(set(raw) - TOP_FIELDS)
    if extra:
        raise ConfigInvalid(f"{extra[0]}: unknown field")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigInvalid(f"schema_version: expected {SCHEMA_VERSION}")
    model = raw.get("model")
    if not isinstance(model, dict) or not isinstance(model.get("name"), str):
        raise ConfigInvalid("model.name: required string")
    if model["name"] not in CATALOG:
        raise ModelUnknown(f"model.name: unknown model {model['name']!r}")
    mparams, loops, methods = CATALOG[model["name"]]
    if set(model) - {"name", "params"}:
        raise ConfigInvalid(f"model.{sorted(set(model) - {'name', 'params'})[0]}: unknown field")
    mvals = _fill("model.params", mparams, model.get("params"))

    method = raw.get("method")
    if method not in METHODS:
        raise ConfigInvalid(f"method: expected one of {', '.join(METHODS)}")
    if method not in methods:
        raise ConfigInvalid(f"method: {method!r} is not available for model {model['name']!r}")

    loop = raw.get("loop")
    if not isinstance(loop, dict) or loop.get("name") not in loops:
        raise ConfigInvalid(f"loop.name: expected one of {', '.join(loops)}")
    if set(loop) - {"name", "params", "steps", "T"}:
        raise ConfigInvalid(f"loop.{sorted(set(loop) - {'name', 'params', 'steps', 'T'})[0]}: unknown field")
    lvals = _fill("loop.params", LOOPS[loop["name"]], loop.get("params"))
    steps = loop.get("steps", 10_000)
    if isinstance(steps, bool) or not isinstance(steps, int) or steps < 1:
        raise ConfigInvalid("loop.steps: expected a positive integer")
    T = loop.get("T")
    if T is not None:
        T = _check_value("loop.T", Param("number"), T)
        if T <= 0:
            raise ConfigInvalid("loop.T: must be positive")

    level = raw.get("level", 0)
    if isinstance(level, bool) or not isinstance(level, int):
        raise ConfigInvalid("level: expected an integer")
    tols = raw.get("tolerances", {})
    if not isinstance(tols, dict):
        raise ConfigInvalid("tolerances: expected an object")
    for k, v in tols.items():
        if k not in TOLERANCES:
            raise ConfigInvalid(f"tolerances.{k}: unknown field")
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise ConfigInvalid(f"tolerances.{k}: must be a positive number")
    options = raw.get("options", {})
    if not isinstance(options, dict):
        raise ConfigInvalid("options: expected an object")
    return JobConfig(model["name"], mvals, loop["name"], lvals, steps, T, method, level,
                     dict(tols), dict(options), raw)


# --------------------------------------------------------------------------
# execution
# --------------------------------------------------------------------------

def build_model(cfg: JobConfig):
    p = cfg.model_params
    if cfg.model == "spin_half":
        return models.spin_half_model(), None
    if cfg.model == "two_spin":
        spec = models.SpinRegisterSpec(p["omega01"], p["omega02"], p["J"], p["omega1"], p["omega_r"])
        return models.two_spin_hamiltonian(spec), spec
    if cfg.model == "quadrupole":
        spec = models.QuadrupoleSpec(p["omega0"], p["omega1"], p["theta"])
        return models.quadrupole_model(spec), spec
    return models.three_level_model(p["template"]), p["template"]


def build_loop(cfg: JobConfig, spec):
    lp, n = cfg.loop_params, cfg.steps
    if cfg.loop == "latitude":
        return models.latitude_loop(lp["theta"], lp["omega_r"], n, lp["magnitude"])
    if cfg.loop == "plaquette":
        return models.plaquette_loop(lp["center"], lp["axes"], lp["size"], n)
    if cfg.loop == "circular_drive":
        return models.circular_drive_loop(spec.omega1, spec.omega_r, n, lp["polarization"])
    if cfg.loop == "rotation":
        return models.rotation_loop(spec.omega1, n)
    return models.phase_loop(n, lp["phi0"], lp["winding"])


def _abelian(cfg, model, loop, spec, convention):
    hol, rows = abelian.berry_phase(model, loop, cfg.level, pivot=_pivot(cfg),
                                    **_tols(cfg, ("cond_tol", "gap_tol")), trace=True)
    res = {"gamma": hol.gamma, "principal": hol.principal, "winding": hol.winding,
           "pivot_changes": _changes(hol.pivot_changes)}
    header = ["k", "t"] + [f"R{i}" for i in range(model.nparams)] + ["increment", "cumulative"]
    return res, (header, rows)


def _nonabelian(cfg, model, loop, spec, convention):
    hol = nonabelian.holonomy(model, loop, cfg.level, method=cfg.options.get("connection", "closed_form"),
                              pivot=_pivot(cfg), **_tols(cfg, ("cond_tol", "gap_tol")))
    ev = np.linalg.eigvals(hol.U)
    return {"U": complex_matrix(hol.U, check_unitary=True),
            "eigenphases": sorted(float(np.angle(z)) for z in ev),
            "trace": [float(np.trace(hol.U).real), float(np.trace(hol.U).imag)],
            "pivot_changes": _changes(hol.pivot_changes)}, None


def _phase_entry(pair: nonadiabatic.PhasePair, convention: str) -> dict:
    g = pair.pole_referenced if convention == "pole" else pair.equator_referenced
    return {"m": pair.m, "phi_D": pair.phi_D, "gamma": g, "convention": convention,
            "theta_star": pair.theta_star}


def _nonadiabatic(cfg, model, loop, spec, convention):
    if cfg.model == "two_spin":
        pol = cfg.loop_params["polarization"]
        gate = nonadiabatic.two_qubit_geometric_gate(spec, pol)
        qubits = []
        for th, Om, ea in nonadiabatic.qubit_angles(spec, pol):
            pair = nonadiabatic.cycle_phases(0.5, th, ea.theta_star, Om, spec.omega_r, pol)
            qubits.append({"theta": th, "Omega": Om, "r": ea.r, **_phase_entry(pair, convention)})
        return {"U": complex_matrix(gate.U, check_unitary=True), "gamma1": gate.gamma1,
                "gamma2": gate.gamma2, "qubits": qubits}, None
    if cfg.loop != "latitude":
        raise ConfigInvalid("loop.name: the non-adiabatic spin-1/2 job needs a latitude loop")
    lp = cfg.loop_params
    Om, wr = lp["magnitude"], lp["omega_r"]
    # positive omega_r runs counter-clockwise, the -1 polarization
    pol = -1 if wr > 0 else 1
    ea = nonadiabatic.effective_angle(lp["theta"], abs(wr), Om, pol)
    m = 0.5 if cfg.level == 1 else -0.5
    pair = nonadiabatic.cycle_phases(m, lp["theta"], ea.theta_star, Om, abs(wr), pol)
    return {"r": ea.r, "polarization": pol, "solid_angle_shift": pair.solid_angle_shift,
            **_phase_entry(pair, convention)}, None


def _quadrupole(cfg, model, loop, spec, convention):
    t = cfg.T if cfg.T is not None else spec.period
    gate = quadrupole.two_qubit_gate(spec, t)
    conn = quadrupole.connection(spec)
    bd = quadrupole.block_diagonalize(spec)
    frame = bd.frame
    return {
        "t": t, "U": complex_matrix(gate.U, check_unitary=True),
        "global_phase": gate.global_phase, "energies": gate.energies,
        "A": complex_matrix(conn.A), "coefficients": conn.coefficients,
        "closed_form_mismatch": conn.closed_form_mismatch,
        "two_step_residual": bd.two_step_residual,
        "frame_residuals": None if frame is None else {
            "unitarity": frame.unitarity_residual, "diagonalization": frame.diagonalization_residual},
        "erratum_check": quadrupole.erratum_check(spec),
    }, None


def _propagate(cfg, model, loop, spec, convention):
    T = cfg.T if cfg.T is not None else loop.period
    # an explicit step count is honoured (and may fail the stability bound)
    steps = cfg.steps if cfg.steps_explicit else max(cfg.steps, propagator.required_steps(model, loop, T))
    res = propagator.propagate(model, loop, T, steps)
    out = {"U": complex_matrix(res.U, check_unitary=True), "T": T, "propagator_steps": steps}
    sl = model.level_slice(cfg.level)
    if sl.stop - sl.start == 1:
        ex = propagator.extract_geometric_phase(res, model, loop, cfg.level, cfg.tolerances.get("leak_tol"))
        out.update({"gamma": ex.gamma, "dynamic": ex.dynamic, "total": ex.total, "leakage": ex.leakage})
    return out, None


def _sweep(cfg, model, loop, spec, convention):
    T_list = cfg.options.get("T_list")
    if not isinstance(T_list, list) or len(T_list) < 2:
        raise ConfigInvalid("options.T_list: expected at least two times")
    rows, fit = propagator.adiabatic_sweep(model, loop, cfg.level, T_list, cfg.options.get("reference"))
    return {"rows": [list(r) for r in rows], "fit": fit}, (["T", "steps", "gamma", "leakage", "error"], rows)


def _changes(changes):
    """Pivot switches as ``[sample, old_pivot, new_pivot]``."""
    return [[int(k), [int(i) for i in a], [int(i) for i in b]] for k, a, b in changes]


def _pivot(cfg):
    p = cfg.options.get("pivot")
    if p is None or p == "best":
        return p
    if not (isinstance(p, list) and all(isinstance(i, int) for i in p)):
        raise ConfigInvalid('options.pivot: expected "best" or a list of indices')
    return tuple(p)


def _tols(cfg, names):
    return {k: cfg.tolerances[k] for k in names if k in cfg.tolerances}


def run_job(cfg: JobConfig, convention: str = "pole") -> tuple[dict, tuple | None]:
    model, spec = build_model(cfg)
    loop = build_loop(cfg, spec)
    handler = {
        "abelian": _abelian, "nonabelian": _nonabelian, "nonadiabatic": _nonadiabatic,
        "quadrupole": _quadrupole, "propagate": _propagate, "sweep": _sweep,
    }[cfg.method]
    body, trace = handler(cfg, model, loop, spec, convention)
    result = {
        "status": "ok",
        "method": cfg.method,
        "model": cfg.model,
        "level": cfg.level,
        "result": body,
        "provenance": {"config_sha256": cfg.digest, "steps": cfg.steps,
                       "schema_version": SCHEMA_VERSION},
    }
    return result, trace


def _set_threads(n: int):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return None
    return threadpool_limits(limits=n)


def cmd_run(args) -> int:
    path = Path(args.config)
    out_dir = Path(args.out) if args.out else None
    try:
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigInvalid(f"config: cannot read {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"config: not valid JSON ({exc.msg} at line {exc.lineno})") from exc
        cfg = validate_config(raw)
        _set_threads(args.threads)
        try:
            result, trace = run_job(cfg, args.convention)
        except ValueError as exc:
            if isinstance(exc, GeoPhaseError):
                raise
            raise ConfigInvalid(str(exc)) from exc
    except GeoPhaseError as exc:
        name = type(exc).__name__
        print(f"error: {name}: {exc}", file=sys.stderr)
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            write_json(out_dir / "result.json", {"status": "error", "error": name, "message": str(exc)})
        return exc.exit_code

    text = dumps(result)
    if out_dir is None:
        sys.stdout.write(text)
    else:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "result.json").write_text(text, encoding="utf-8")
        if args.trace and trace is not None:
            write_csv(out_dir / "trace.csv", *trace)
    return 0


def cmd_list_models(args) -> int:
    sys.stdout.write(dumps(catalog()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geophase", description="Geometric phases and holonomies.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a job described by a JSON config")
    r.add_argument("config")
    r.add_argument("--out", help="directory for result.json (stdout if omitted)")
    r.add_argument("--trace", action="store_true", help="also write trace.csv")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--convention", choices=("pole", "equator"), default="pole")
    r.set_defaults(func=cmd_run)
    lm = sub.add_parser("list-models", help="print the model catalog")
    lm.set_defaults(func=cmd_list_models)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
