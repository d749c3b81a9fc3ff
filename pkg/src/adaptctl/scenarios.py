"""Scenario configs: schema, validation, assembly and batch runs.

A scenario is a JSON object::

    {"name": ..., "kind": ..., "plant": {...}, "controller": {...},
     "disturbance": {...} | [...], "sim": {"horizon", "step", "seed", ...},
     "analysis": {"certificates": [...]}, "metrics": {...}, "criteria": [...]}

``metrics`` entries are passed to :func:`adaptctl.sim.metrics`; each
criterion compares one metric (``"metric"``) against ``"value"`` with
``"op"`` in ``< <= > >= ==``.  A string value ``"cert:<name>"`` or
``"metric:<name>"`` refers to another computed quantity.
"""
from __future__ import annotations

import json
import operator
import os
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import adapt_dt, loops
from .analysis import kyl_solve, lyapunov_solve, robustness_margin, spr_check
from .errors import DivergenceError, InfeasibleError
from .estimate import RlsEstimatorState, SaEstimatorState, rls_step, sa_step
from .model import ArmaxPlant, Polynomial, TransferFunction
from .sim import DisturbanceSpec, Trajectory, metrics, simulate_ct, simulate_dt

KINDS = (
    "mrac_state", "mrac_output_spr", "augmented_error", "hot_output", "passification", "speed_gradient",
    "minmax_nlp", "saturated_mrac", "str", "bursting", "observer", "estimator",
)

# field -> (type tag, required)
_SCHEMA = {
    "mrac_state": {
        "plant": {"A": ("matrix", True), "b": ("vector", True), "x0": ("vector", False)},
        "controller": {"Am": ("matrix", True), "bm": ("vector", True), "Q": ("matrix", False),
                       "Gamma": ("gain", True), "gamma_k": ("number", False), "theta0": ("vector", False),
                       "k0": ("number", False), "adapt_k": ("bool", False), "robust": ("dict", False),
                       "reference": ("signal", False)},
    },
    "mrac_output_spr": {
        "plant": {"num": ("vector", True), "den": ("vector", True), "x0": ("vector", False)},
        "controller": {"Wm_num": ("vector", True), "Wm_den": ("vector", True), "lam0": ("vector", False),
                       "gamma": ("number", False), "theta0": ("vector", False), "reference": ("signal", False)},
    },
    "augmented_error": {
        "plant": {"num": ("vector", True), "den": ("vector", True)},
        "controller": {"Wm_num": ("vector", True), "Wm_den": ("vector", True), "lam0": ("vector", False),
                       "gamma": ("number", False), "theta0": ("vector", False), "adapt": ("bool", False),
                       "reference": ("signal", False)},
    },
    "hot_output": {
        "plant": {"num": ("vector", True), "den": ("vector", True)},
        "controller": {"lam": ("vector", True), "a": ("number", True), "alpha": ("vector", True),
                       "k_nom": ("vector", True), "mu": ("number", False), "gamma": ("number", False),
                       "k0": ("vector", False), "reference": ("signal", False)},
    },
    "passification": {
        "plant": {"A": ("matrix", True), "B": ("vector", True), "C": ("matrix", True), "x0": ("vector", False)},
        "controller": {"g": ("vector", True), "Gamma": ("gain", False), "theta0": ("vector", False)},
    },
    "speed_gradient": {
        "plant": {"a": ("number", True), "x0": ("number", False)},
        "controller": {"kappa": ("number", True), "Gamma": ("number", False), "theta0": ("number", False),
                       "generator": ("str", False)},
    },
    "minmax_nlp": {
        "plant": {"a_p": ("number", True), "theta": ("vector", True), "theta_set": ("matrix", True),
                  "nonlinearity": ("str", True), "x0": ("number", False)},
        "controller": {"a_m": ("number", True), "epsilon": ("number", True), "Gamma_alpha": ("number", False),
                       "Gamma_theta": ("number", False), "theta0": ("vector", False), "alpha0": ("number", False),
                       "reference": ("signal", False)},
    },
    "saturated_mrac": {
        "plant": {"A": ("matrix", True), "b": ("vector", True), "x0": ("vector", False)},
        "controller": {"Am": ("matrix", True), "bm": ("vector", True), "Q": ("matrix", False),
                       "limits": ("dict", True), "Gamma": ("gain", False), "gamma_k": ("number", False),
                       "gamma_s": ("number", False), "reference": ("signal", False)},
    },
    "str": {
        "plant": {"a": ("vector", True), "b": ("vector", True), "c": ("vector", False), "d": ("int", False)},
        "controller": {"theta0": ("vector", True), "gamma": ("number", False), "c": ("number", False),
                       "beta0_sign": ("int", False), "beta0_min": ("number", False), "setpoint": ("signal", True)},
    },
    "bursting": {
        "plant": {"a": ("number", True), "b": ("number", True)},
        "controller": {"theta0": ("vector", True), "gamma": ("number", False), "c": ("number", False),
                       "y_star": ("number", True)},
    },
    "observer": {
        "plant": {"num": ("vector", True), "den": ("vector", True)},
        "controller": {"Lam": ("matrix", True), "ell": ("vector", True), "Gamma": ("gain", False),
                       "theta0": ("vector", False), "input": ("signal", True)},
    },
    "estimator": {
        "plant": {"theta": ("vector", True), "regressor": ("dict", True)},
        "controller": {"method": ("str", True), "mode": ("str", False), "gamma": ("number", False),
                       "Gamma0": ("number", False), "theta0": ("vector", False)},
    },
}

_OPS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge, "==": operator.eq}


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_type(tag, v):
    if tag == "number":
        return _is_number(v)
    if tag == "int":
        return isinstance(v, int) and not isinstance(v, bool)
    if tag == "bool":
        return isinstance(v, bool)
    if tag == "str":
        return isinstance(v, str)
    if tag == "dict":
        return isinstance(v, dict)
    if tag == "vector":
        return isinstance(v, list) and all(_is_number(x) for x in v)
    if tag == "matrix":
        return (isinstance(v, list) and v and all(isinstance(r, list) and all(_is_number(x) for x in r) for r in v)
                and len({len(r) for r in v}) == 1)
    if tag == "gain":
        return _is_number(v) or _check_type("matrix", v)
    if tag == "signal":
        return _is_number(v) or isinstance(v, dict)
    raise AssertionError(tag)


@dataclass
class ScenarioConfig:
    name: str
    kind: str
    plant: dict
    controller: dict
    disturbance: list = field(default_factory=list)
    sim: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    criteria: list = field(default_factory=list)
    description: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @property
    def seed(self) -> int:
        return int(self.sim.get("seed", 0))


class ConfigError(ValueError):
    """Validation failure carrying every field error found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _load(source):
    if isinstance(source, ScenarioConfig):
        return source.to_dict()
    if isinstance(source, dict):
        return source
    return json.loads(Path(source).read_text())


def validate_config(source) -> ScenarioConfig:
    """Parse and validate a scenario; raises ConfigError listing all problems."""
    try:
        raw = _load(source)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot read config: {exc}"]) from None
    errors = []
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    kind = raw.get("kind")
    if kind not in KINDS:
        errors.append(f"kind: unknown scenario kind {kind!r} (expected one of {', '.join(KINDS)})")
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        errors.append("name: missing or not a string")
    for block in ("plant", "controller"):
        if not isinstance(raw.get(block), dict):
            errors.append(f"{block}: missing or not an object")
    if kind in _SCHEMA:
        for block, fields in _SCHEMA[kind].items():
            data = raw.get(block) if isinstance(raw.get(block), dict) else {}
            for fname, (tag, required) in fields.items():
                if fname not in data:
                    if required:
                        errors.append(f"{block}.{fname}: required field missing")
                elif not _check_type(tag, data[fname]):
                    errors.append(f"{block}.{fname}: expected {tag}, got {type(data[fname]).__name__}")
            for fname in data:
                if fname not in fields:
                    errors.append(f"{block}.{fname}: unknown field")
    sim = raw.get("sim", {})
    if not isinstance(sim, dict):
        errors.append("sim: not an object")
        sim = {}
    if "horizon" not in sim:
        errors.append("sim.horizon: required field missing")
    elif not _is_number(sim["horizon"]) or sim["horizon"] <= 0:
        errors.append("sim.horizon: must be a positive number")
    if "step" in sim and (not _is_number(sim["step"]) or sim["step"] <= 0):
        errors.append("sim.step: must be a positive number")
    if "seed" in sim and not (isinstance(sim["seed"], int) and 0 <= sim["seed"] < 2 ** 64):
        errors.append("sim.seed: must be an unsigned 64-bit integer")
    dist = raw.get("disturbance", [])
    dist = [dist] if isinstance(dist, dict) else dist
    if not isinstance(dist, list):
        errors.append("disturbance: must be an object or a list of objects")
        dist = []
    for i, d in enumerate(dist):
        try:
            DisturbanceSpec(**d)
        except (TypeError, ValueError) as exc:
            errors.append(f"disturbance[{i}]: {exc}")
    mets = raw.get("metrics", {})
    if not isinstance(mets, dict) or not all(isinstance(m, dict) and "kind" in m for m in mets.values()):
        errors.append("metrics: must map names to objects with a 'kind'")
        mets = {}
    crits = raw.get("criteria", [])
    for i, c in enumerate(crits if isinstance(crits, list) else []):
        if not isinstance(c, dict) or c.get("op") not in _OPS or "metric" not in c or "value" not in c:
            errors.append(f"criteria[{i}]: needs metric, op in {list(_OPS)} and value")
        elif c["metric"] not in mets and not str(c["metric"]).startswith("cert:"):
            errors.append(f"criteria[{i}]: unknown metric {c['metric']!r}")
    if not errors:
        errors.extend(_semantic_errors(kind, raw))
    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(
        name=name, kind=kind, plant=raw["plant"], controller=raw["controller"], disturbance=dist,
        sim=sim, analysis=raw.get("analysis", {}), metrics=mets, criteria=crits,
        description=raw.get("description", ""),
    )


def _tf(num, den):
    return TransferFunction(Polynomial(num), Polynomial(den))


def _semantic_errors(kind, raw):
    """Model-level checks: gain ranges and requested certificates."""
    errs = []
    c, p = raw["controller"], raw["plant"]
    if kind in ("str", "bursting"):
        g = c.get("gamma", 1.0)
        if not 0 < g < 2:
            errs.append(f"controller.gamma: {g} outside the admissible interval (0, 2)")
        if c.get("c", 1.0) <= 0:
            errs.append("controller.c: normalizer must be positive")
    if kind == "bursting" and p["b"] == 0:
        errs.append("plant.b: must be nonzero")
    certs = raw.get("analysis", {}).get("certificates", [])
    if kind in ("mrac_output_spr",) or "spr" in certs:
        if "Wm_num" in c:
            try:
                W = _tf(c["Wm_num"], c["Wm_den"])
                if not spr_check(W):
                    errs.append(f"controller.Wm: reference model is not SPR (relative degree {W.relative_degree})")
            except ValueError as exc:
                errs.append(f"controller.Wm: {exc}")
    if kind == "estimator" and c["method"] not in ("rls", "sa"):
        errs.append(f"controller.method: expected 'rls' or 'sa', got {c['method']!r}")
    return errs


# ----------------------------------------------------------------- assembly

def _arr(v):
    return None if v is None else np.asarray(v, float)


def build_loop(cfg: ScenarioConfig, x0_override=None):
    """Continuous-time loop object for a CT scenario kind."""
    p, c, k = cfg.plant, cfg.controller, cfg.kind
    x0 = p.get("x0") if x0_override is None else x0_override
    if k == "mrac_state":
        n = len(p["b"])
        return loops.MracStateLoop(p["A"], p["b"], c["Am"], c["bm"], c.get("Q", np.eye(n).tolist()), c["Gamma"],
                                   c.get("gamma_k", 1.0), c.get("reference"), _arr(c.get("theta0")),
                                   c.get("k0", 0.0), _arr(x0), None, c.get("adapt_k", True), c.get("robust"))
    if k == "mrac_output_spr":
        return loops.OutputSprLoop(_tf(p["num"], p["den"]), _tf(c["Wm_num"], c["Wm_den"]), c.get("lam0", [1.0]),
                                   c.get("gamma", 1.0), c.get("reference"), _arr(c.get("theta0")), x0)
    if k == "augmented_error":
        return loops.AugmentedErrorLoop(_tf(p["num"], p["den"]), _tf(c["Wm_num"], c["Wm_den"]),
                                        c.get("lam0", [1.0]), c.get("gamma", 1.0), c.get("reference"),
                                        _arr(c.get("theta0")), c.get("adapt", True))
    if k == "hot_output":
        return loops.HotOutputLoop(_tf(p["num"], p["den"]), c["lam"], c["a"], c["alpha"], c["k_nom"],
                                   c.get("mu", 1.0), c.get("reference"), _arr(c.get("k0")), c.get("gamma", 1.0))
    if k == "passification":
        return loops.PassificationLoop(p["A"], p["B"], p["C"], c["g"], c.get("Gamma", 1.0), _arr(x0),
                                       _arr(c.get("theta0")))
    if k == "speed_gradient":
        return loops.SpeedGradientLoop(p["a"], c["kappa"], c.get("Gamma", 1.0), 1.0 if x0 is None else x0,
                                       c.get("theta0", 0.0), c.get("generator"))
    if k == "minmax_nlp":
        return loops.MinMaxLoop(p["a_p"], p["theta"], p["theta_set"], p["nonlinearity"], c["a_m"], c["epsilon"],
                                c.get("Gamma_alpha", 1.0), c.get("Gamma_theta", 1.0), c.get("reference"),
                                0.0 if x0 is None else x0, c.get("theta0"), c.get("alpha0", 0.0))
    if k == "saturated_mrac":
        n = len(p["b"])
        return loops.SaturatedMracLoop(p["A"], p["b"], c["Am"], c["bm"], c.get("Q", np.eye(n).tolist()),
                                       c["limits"], c.get("Gamma", 1.0), c.get("gamma_k", 1.0),
                                       c.get("gamma_s", 1.0), c.get("reference"), _arr(x0))
    if k == "observer":
        return loops.ObserverLoop(_tf(p["num"], p["den"]), c["Lam"], c["ell"], c.get("Gamma", 1.0), c["input"],
                                  _arr(c.get("theta0")))
    raise ValueError(f"{k!r} is not a continuous-time scenario")


def _regressor_fn(spec, dim, seed):
    kind = spec.get("kind", "gaussian")
    if kind == "gaussian":
        rng = np.random.default_rng(seed)
        return lambda k: rng.standard_normal(dim)
    if kind == "sines":
        freqs = np.asarray(spec["freqs"], float)
        if freqs.size < dim:
            raise ValueError("sines regressor needs one frequency per component")
        return lambda k: np.sin(freqs[:dim] * k + np.arange(dim))
    raise ValueError(f"unknown regressor kind {kind!r}")


def run_estimator(cfg: ScenarioConfig, seed: int) -> Trajectory:
    """Noise-free identification of ``y_k = theta^T phi_k`` with SA or RLS."""
    p, c = cfg.plant, cfg.controller
    theta_true = np.asarray(p["theta"], float)
    n = theta_true.size
    steps = int(cfg.sim["horizon"])
    phi_of = _regressor_fn(p["regressor"], n, seed)
    theta0 = np.zeros(n) if c.get("theta0") is None else np.asarray(c["theta0"], float)
    names = [f"theta{i}" for i in range(n)] + ["param_err", "gain_lmax", "y"]
    log = np.empty((steps + 1, len(names)))
    rls = c["method"] == "rls"
    if rls:
        st = RlsEstimatorState(theta0, c.get("Gamma0", 1.0) * np.eye(n))
    else:
        st = SaEstimatorState(theta0, 1.0, c.get("gamma", 1.0), c.get("mode", "projection"))
    phi = phi_of(0)

    def row(st, y):
        lmax = float(np.linalg.eigvalsh(st.Gamma).max()) if rls else st.gamma / st.r
        return np.concatenate([st.theta, [np.linalg.norm(st.theta - theta_true), lmax, y]])

    log[0] = row(st, 0.0)
    for k in range(1, steps + 1):
        y = float(theta_true @ phi)
        phi_next = phi_of(k)
        st = rls_step(st, phi, y) if rls else sa_step(st, phi, y, phi_next)
        log[k] = row(st, y)
        phi = phi_next
    return Trajectory(np.arange(steps + 1, dtype=float), {nm: log[:, j].copy() for j, nm in enumerate(names)}, 1.0)


def _setpoint_block(v):
    return v if isinstance(v, (int, float)) else dict(v)


def simulate(cfg: ScenarioConfig, seed: int | None = None, x0_override=None) -> Trajectory:
    """Run one scenario and return its trajectory (may raise DivergenceError)."""
    seed = cfg.seed if seed is None else seed
    dist = [DisturbanceSpec(**d) for d in cfg.disturbance]
    if cfg.kind == "estimator":
        return run_estimator(cfg, seed)
    if cfg.kind == "str":
        p, c = cfg.plant, cfg.controller
        plant = ArmaxPlant(p["a"], p["b"], p.get("c", ()), p.get("d", 1))
        st = adapt_dt.StrState(np.asarray(c["theta0"], float), n=len(p["a"]), m=len(p["b"]) - 1, d=plant.d,
                               gamma=c.get("gamma", 1.0), c=c.get("c", 1.0), beta0_sign=c.get("beta0_sign"),
                               beta0_min=c.get("beta0_min"))
        first = (p["a"][0], p["b"][0]) if len(p["a"]) == 1 and len(p["b"]) == 1 else None
        ctl = adapt_dt.StrController(st, adapt_dt.setpoint_fn(_setpoint_block(c["setpoint"])), first)
        return simulate_dt(plant, ctl, int(cfg.sim["horizon"]), dist, seed)
    if cfg.kind == "bursting":
        p, c = cfg.plant, cfg.controller
        plant = ArmaxPlant((p["a"],), (p["b"],), d=1)
        st = adapt_dt.StrState(np.asarray(c["theta0"], float), n=1, m=0, d=1, gamma=c.get("gamma", 1.0),
                               c=c.get("c", 1.0))
        ctl = adapt_dt.StrController(st, adapt_dt.setpoint_fn(c["y_star"]), (p["a"], p["b"]))
        return simulate_dt(plant, ctl, int(cfg.sim["horizon"]), dist, seed)
    loop = build_loop(cfg, x0_override)
    return simulate_ct(loop, float(cfg.sim["horizon"]), float(cfg.sim.get("step", 1e-3)), dist, seed)


def certificates(cfg: ScenarioConfig) -> dict:
    """Analysis results requested in ``analysis.certificates``."""
    out = {}
    c = cfg.controller
    for name in cfg.analysis.get("certificates", []):
        if name == "lyapunov":
            n = len(c["bm"])
            cert = lyapunov_solve(np.asarray(c["Am"], float), np.asarray(c.get("Q", np.eye(n).tolist()), float))
            out["lyapunov_residual"] = cert.residual
            out["lyapunov_P_min_eig"] = float(np.linalg.eigvalsh(cert.P).min())
        elif name == "spr":
            if cfg.kind == "hot_output":
                W = build_loop(cfg).wm
            else:
                W = _tf(c["Wm_num"], c["Wm_den"])
            out["spr"] = bool(spr_check(W))
        elif name == "kyl":
            W = build_loop(cfg).wm if cfg.kind == "hot_output" else _tf(c["Wm_num"], c["Wm_den"])
            ss = W.to_state_space()
            try:
                kyl_solve(ss.A, np.ravel(ss.B), np.ravel(ss.C))
                out["kyl_feasible"] = True
            except InfeasibleError:
                out["kyl_feasible"] = False
        elif name == "robustness_margin":
            n = len(c["bm"])
            Q = np.asarray(c.get("Q", np.eye(n).tolist()), float)
            cert = lyapunov_solve(np.asarray(c["Am"], float), Q)
            vmax = max((d.get("vmax", 0.0) for d in cfg.disturbance), default=0.0)
            out["robustness_margin"] = robustness_margin(cert.P, Q, vmax)
        elif name == "theta_b":
            out["theta_b"] = adapt_dt.closed_loop_gain(0.0, 0.0, cfg.plant["a"], cfg.plant["b"])[3]
        elif name == "theta_star":
            loop = build_loop(cfg)
            ts = getattr(loop, "theta_star", None)
            out["theta_star"] = np.atleast_1d(ts).tolist()
            if hasattr(loop, "k_star"):
                out["k_star"] = float(loop.k_star)
        else:
            raise ValueError(f"unknown certificate {name!r}")
    return out


# ------------------------------------------------------------------ reports

@dataclass
class RunReport:
    config: dict
    metrics: dict = field(default_factory=dict)
    certificates: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    passed: bool = False
    artifacts: list = field(default_factory=list)
    abort: str | None = None

    @property
    def exit_code(self) -> int:
        if self.abort is not None:
            return 3
        return 0 if self.passed else 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(type(o).__name__)


def _resolve(value, mets, certs):
    if isinstance(value, str):
        src, _, key = value.partition(":")
        table = {"metric": mets, "cert": certs}.get(src)
        if table is None or key not in table:
            raise KeyError(f"unresolvable criterion value {value!r}")
        return table[key]
    return value


def evaluate_criteria(criteria, mets, certs):
    verdicts = []
    for c in criteria:
        name = c["metric"]
        try:
            lhs = certs[name[5:]] if name.startswith("cert:") else mets[name]
            rhs = _resolve(c["value"], mets, certs)
            ok = bool(_OPS[c["op"]](lhs, rhs))
        except KeyError as exc:
            lhs, rhs, ok = None, c["value"], False
            name = f"{name} ({exc})"
        verdicts.append({"metric": name, "op": c["op"], "value": rhs, "observed": lhs, "pass": ok})
    return verdicts


def _ic_draws(cfg):
    spec = cfg.sim.get("ic_draws")
    if not spec:
        return [None]
    rng = np.random.default_rng(spec.get("seed", 0))
    n = len(cfg.plant.get("b", cfg.plant.get("x0", [0.0])))
    scale = float(spec.get("scale", 1.0))
    return [rng.uniform(-scale, scale, n).tolist() for _ in range(int(spec["count"]))]


def run_scenario(cfg: ScenarioConfig, out_dir=None, seed: int | None = None, fmt: str = "both") -> RunReport:
    """Simulate, compute metrics/certificates and judge the criteria.

    With ``sim.ic_draws`` the loop is simulated from several random initial
    states and each metric reports its maximum over draws; the trajectory
    of the first draw is written.  With ``sim.allow_divergence`` a
    divergence-guard abort is not an error and metrics use the partial log.
    """
    seed = cfg.seed if seed is None else int(seed)
    report = RunReport(config=cfg.to_dict())
    report.config["sim"] = dict(cfg.sim, seed=seed)
    try:
        report.certificates = certificates(cfg)
    except (ValueError, InfeasibleError) as exc:
        report.abort = f"certificate failure: {exc}"
        return report
    first = None
    for x0 in _ic_draws(cfg):
        try:
            traj = simulate(cfg, seed, x0)
            diverged = False
        except DivergenceError as exc:
            if not cfg.sim.get("allow_divergence", False):
                report.abort = f"divergence guard: {exc}"
                if out_dir is not None and exc.trajectory is not None:
                    report.artifacts = _write(exc.trajectory, cfg.name, out_dir, fmt)
                return report
            traj, diverged = exc.trajectory, True
        m = metrics(traj, cfg.metrics)
        m["diverged"] = float(diverged)
        if first is None:
            first, report.metrics = traj, m
        else:
            report.metrics = {k: max(report.metrics[k], v) for k, v in m.items()}
    report.verdicts = evaluate_criteria(cfg.criteria, report.metrics, report.certificates)
    report.passed = all(v["pass"] for v in report.verdicts)
    if out_dir is not None:
        report.artifacts = _write(first, cfg.name, out_dir, fmt)
        rp = Path(out_dir) / f"{cfg.name}.report.json"
        report.artifacts.append(str(rp))
        rp.write_text(report.to_json())
    return report


def _write(traj, name, out_dir, fmt):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if fmt in ("csv", "both"):
        paths.append(str(out / f"{name}.csv"))
        traj.to_csv(paths[-1])
    if fmt in ("json", "both"):
        paths.append(str(out / f"{name}.json"))
        traj.to_json(paths[-1])
    return paths


# ----------------------------------------------------------------- library

def bundled_names() -> list[str]:
    pkg = resources.files("adaptctl") / "configs"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".json"))


def bundled_path(name: str):
    p = resources.files("adaptctl") / "configs" / f"{name}.json"
    if not p.is_file():
        raise FileNotFoundError(f"no bundled scenario {name!r}")
    return p


def load_bundled(name: str) -> ScenarioConfig:
    return validate_config(json.loads(bundled_path(name).read_text()))


def resolve_config(arg: str) -> ScenarioConfig:
    """Path to a config file, or the name of a bundled scenario."""
    if os.path.exists(arg):
        return validate_config(arg)
    return load_bundled(arg)
