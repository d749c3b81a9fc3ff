"""Fixed-step simulation, disturbance generation, trajectory logging and metrics."""
from __future__ import annotations

import io
import json
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .analysis import pe_level
from .errors import DivergenceError

DIVERGENCE_LIMIT = 1e9


def rk4_step(rhs: Callable, x, t: float, h: float):
    """Classical fourth-order Runge-Kutta step for ``x' = rhs(t, x)``."""
    if not h > 0:
        raise ValueError("step size must be positive")
    k1 = rhs(t, x)
    k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = rhs(t + h, x + h * k3)
    out = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite state after RK4 step at t={t:g}")
    return out


@dataclass
class Trajectory:
    """Uniformly sampled channels; ``time`` and every column share one length."""

    time: np.ndarray
    columns: dict
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        n = len(self.time)
        for name, col in self.columns.items():
            if len(col) != n:
                raise ValueError(f"channel {name!r} has {len(col)} samples, expected {n}")

    def __getitem__(self, name):
        if name == "t":
            return self.time
        try:
            return self.columns[name]
        except KeyError:
            raise KeyError(f"no channel named {name!r}") from None

    def __len__(self):
        return len(self.time)

    @property
    def names(self):
        return list(self.columns)

    def matrix(self, names):
        return np.column_stack([self[n] for n in names])

    def truncated(self, n):
        return Trajectory(self.time[:n], {k: v[:n] for k, v in self.columns.items()}, self.step)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        names = ["t"] + self.names
        data = np.column_stack([self.time] + [self.columns[n] for n in self.names])
        buf.write(",".join(names) + "\n")
        np.savetxt(buf, data, fmt="%.12e", delimiter=",")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text

    def to_json(self, path=None) -> str:
        doc = {"step": self.step, "t": self.time.tolist()}
        doc.update({n: np.asarray(c).tolist() for n, c in self.columns.items()})
        text = json.dumps(doc)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        step = doc.pop("step")
        t = np.asarray(doc.pop("t"), float)
        return cls(t, {k: np.asarray(v, float) for k, v in doc.items()}, step)

    @classmethod
    def from_csv(cls, text, step=None):
        lines = text.splitlines()
        names = lines[0].split(",")
        data = np.loadtxt(io.StringIO("\n".join(lines[1:])), delimiter=",", ndmin=2)
        t = data[:, 0]
        if step is None:
            step = float(t[1] - t[0]) if len(t) > 1 else 1.0
        return cls(t, {n: data[:, i + 1] for i, n in enumerate(names[1:])}, step)


DISTURBANCE_KINDS = ("none", "pulse", "sinusoid", "bounded_noise")


@dataclass(frozen=True)
class DisturbanceSpec:
    """Exogenous signal entering a loop.

    ``pulse``: ``amplitude`` on ``[t0, t0 + width)``.  ``sinusoid``:
    ``amplitude sin(freq t)``.  ``bounded_noise``: uniform on
    ``[-vmax, vmax]``, redrawn every ``hold`` time units (every step when
    ``hold`` is None) from a seeded 64-bit generator.
    """

    kind: str = "none"
    amplitude: float = 0.0
    t0: float = 0.0
    width: float = 0.0
    freq: float = 1.0
    vmax: float = 0.0
    seed: int = 0
    hold: float | None = None

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.kind == "bounded_noise" and self.vmax < 0:
            raise ValueError("vmax must be nonnegative")
        if self.hold is not None and not self.hold > 0:
            raise ValueError("hold must be positive")

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def realize(self, dim: int, horizon: float, h: float, seed: int | None = None) -> Callable:
        """Return ``d(t) -> array(dim)``, deterministic for a given seed."""
        zero = np.zeros(dim)
        if self.kind == "none" or dim == 0:
            return lambda t: zero
        if self.kind == "pulse":
            amp = np.full(dim, float(self.amplitude))
            t0, t1 = self.t0, self.t0 + self.width
            return lambda t: amp if t0 <= t < t1 else zero
        if self.kind == "sinusoid":
            a, w = float(self.amplitude), float(self.freq)
            return lambda t: np.full(dim, a * np.sin(w * t))
        hold = self.hold if self.hold is not None else h
        count = int(np.ceil(horizon / hold)) + 2
        rng = np.random.default_rng(self.seed if seed is None else seed)
        table = rng.uniform(-self.vmax, self.vmax, size=(count, dim))
        np.clip(table, -self.vmax, self.vmax, out=table)

        def sample(t):
            return table[min(int(t / hold + 1e-9), count - 1)]

        return sample


def realize_all(specs, dim: int, horizon: float, h: float, seed: int | None = None) -> Callable:
    """Sum of several disturbance specs (a single spec or None also accepted)."""
    if isinstance(specs, DisturbanceSpec):
        specs = [specs]
    if not specs:
        specs = [DisturbanceSpec()]
    parts = [s.realize(dim, horizon, h, seed) for s in specs]
    if len(parts) == 1:
        return parts[0]
    return lambda t: sum(p(t) for p in parts)


class ClosedLoop:
    """Interface for continuous-time closed loops integrated by :func:`simulate_ct`."""

    channels: list = []
    disturbance_dim: int = 0
    has_lyapunov: bool = False

    def initial_state(self) -> np.ndarray:
        raise NotImplementedError

    def rhs(self, t, z, d) -> np.ndarray:
        raise NotImplementedError

    def observe(self, t, z, d) -> np.ndarray:
        raise NotImplementedError

    def project(self, z):
        return z

    def fastest_rate(self) -> float | None:
        return None


def simulate_ct(loop: ClosedLoop, horizon: float, h: float = 1e-3, disturbance=None,
                seed: int | None = None, z0=None) -> Trajectory:
    """Integrate a closed loop with RK4; the disturbance is held over each step.

    Every channel of ``loop`` is logged at every grid point.  A state
    magnitude above 1e9 raises DivergenceError carrying the partial log.
    """
    if not h > 0 or not horizon > 0:
        raise ValueError("horizon and step must be positive")
    rate = loop.fastest_rate()
    if rate and h > 0.1 / rate:
        warnings.warn(f"step {h:g} exceeds 0.1/|fastest rate| = {0.1 / rate:.3g}", RuntimeWarning)
    n = int(round(horizon / h))
    dist = realize_all(disturbance, loop.disturbance_dim, horizon, h, seed)
    z = np.array(loop.initial_state() if z0 is None else z0, dtype=float)
    log = np.empty((n + 1, len(loop.channels)))
    rhs = loop.rhs
    for i in range(n + 1):
        t = i * h
        d = dist(t)
        log[i] = loop.observe(t, z, d)
        if i == n:
            break
        try:
            z = rk4_step(lambda tt, zz: rhs(tt, zz, d), z, t, h)
        except FloatingPointError as exc:
            traj = _make_traj(log[: i + 1], loop.channels, h)
            raise DivergenceError(str(exc), traj, t) from None
        z = loop.project(z)
        if np.abs(z).max() > DIVERGENCE_LIMIT:
            traj = _make_traj(log[: i + 1], loop.channels, h)
            raise DivergenceError(f"state magnitude exceeded {DIVERGENCE_LIMIT:g} at t={t + h:g}", traj, t + h)
    return _make_traj(log, loop.channels, h)


def _make_traj(log, channels, h):
    t = np.arange(log.shape[0]) * h
    return Trajectory(t, {c: log[:, j].copy() for j, c in enumerate(channels)}, h)


def simulate_dt(plant, controller, horizon: int, noise=None, seed: int | None = None) -> Trajectory:
    """Closed loop of an ARMAX plant with a sample-rate controller.

    At sample k the plant produces ``y_k`` from past outputs, inputs
    ``u_{k-d}, ...`` and noise; then ``controller.step(k, y_k)`` returns
    ``(u_k, log_values)``.  Histories start at zero.  The controller
    exposes ``channels`` naming its log values.
    """
    d, na, nb, nc = plant.d, len(plant.a), len(plant.b), len(plant.c)
    w = realize_all(noise, 1, float(horizon), 1.0, seed)
    y_hist = np.zeros(max(na, 1))
    u_hist = np.zeros(d + nb)  # u_{k-1}, u_{k-2}, ...
    w_hist = np.zeros(max(nc, 1))
    names = ["y", "u", "w"] + list(controller.channels)
    log = np.empty((horizon, len(names)))
    for k in range(horizon):
        wk = float(w(float(k))[0])
        y = plant.output(y_hist, u_hist[d - 1:], wk, w_hist)
        u, extra = controller.step(k, y)
        if not (np.isfinite(y) and np.isfinite(u)) or abs(y) > DIVERGENCE_LIMIT:
            traj = Trajectory(np.arange(k, dtype=float), {n: log[:k, j].copy() for j, n in enumerate(names)}, 1.0)
            raise DivergenceError(f"non-finite or divergent signal at sample {k}", traj, k)
        log[k, 0], log[k, 1], log[k, 2] = y, u, wk
        log[k, 3:] = extra
        y_hist = np.roll(y_hist, 1)
        y_hist[0] = y
        u_hist = np.roll(u_hist, 1)
        u_hist[0] = u
        w_hist = np.roll(w_hist, 1)
        w_hist[0] = wk
    return Trajectory(np.arange(horizon, dtype=float), {n: log[:, j].copy() for j, n in enumerate(names)}, 1.0)


def _tail_mask(traj, spec):
    t = traj.time
    if "t_start" in spec:
        return t >= spec["t_start"] - 1e-9 * max(1.0, abs(spec["t_start"]))
    if "k_start" in spec:
        return np.arange(len(t)) >= spec["k_start"]
    return np.ones(len(t), bool)


def _channels(spec):
    ch = spec.get("channels", spec.get("channel"))
    return [ch] if isinstance(ch, str) else list(ch)


def burst_ratio(err, pulse_index: int, window: int = 500) -> float:
    """Peak |err| in the window after the pulse over the median |err| before it."""
    err = np.abs(np.asarray(err, float))
    if pulse_index < window or pulse_index + window > len(err):
        raise ValueError("trace too short around the pulse for the burst windows")
    pre = float(np.median(err[pulse_index - window: pulse_index]))
    post = float(err[pulse_index: pulse_index + window].max())
    if pre == 0.0:
        return float("inf") if post > 0 else 0.0
    return post / pre


def metrics(traj: Trajectory, spec: dict) -> dict:
    """Evaluate named metric requests on a trajectory.

    ``spec`` maps metric names to request dicts with a ``kind`` key; see
    the README for the list of kinds and their fields.
    """
    out = {}
    for name, req in spec.items():
        kind = req["kind"]
        chans = _channels(req)
        for c in chans:
            if c != "t" and c not in traj.columns:
                raise KeyError(f"metric {name!r}: missing channel {c!r}")
        mask = _tail_mask(traj, req)
        if kind == "tracking_tail_max" or kind == "max_abs":
            out[name] = float(np.abs(traj.matrix(chans)[mask]).max()) if mask.any() else 0.0
        elif kind == "param_error":
            truth = np.asarray(req["truth"], float)
            idx = -1 if "t" not in req else int(round(req["t"] / traj.step))
            out[name] = float(np.linalg.norm(traj.matrix(chans)[idx] - truth))
        elif kind == "drift_indicator":
            truth = np.asarray(req["truth"], float)
            norms = np.linalg.norm(traj.matrix(chans), axis=1)
            out[name] = float(norms.max() / np.linalg.norm(truth))
        elif kind == "pe_level":
            X = traj.matrix(chans)[mask]
            rep = pe_level(X, req["T"], dt=traj.step, discrete=req.get("discrete", False),
                           delta0=req.get("delta0"), with_epsilon0=req.get("epsilon0", False))
            out[name] = rep.epsilon0 if req.get("epsilon0", False) else rep.alpha
        elif kind == "burst_ratio":
            pulse = int(round(req["pulse_t"] / traj.step))
            out[name] = burst_ratio(traj[chans[0]], pulse, req.get("window", 500))
        elif kind == "lyapunov_violations":
            V = traj[chans[0]][mask]
            tol = req["abs_tol"] if "abs_tol" in req else req.get("rel_tol", 1e-6) * abs(V[0])
            out[name] = int(np.sum(np.diff(V) > tol))
        elif kind == "lag_change":
            X = traj.matrix(chans)
            lag = int(req.get("lag", 1))
            diff = np.linalg.norm(X[lag:] - X[:-lag], axis=1)
            out[name] = float(diff[mask[lag:]].max()) if mask[lag:].any() else 0.0
        elif kind == "max_rate":
            x = traj[chans[0]]
            out[name] = float(np.abs(np.diff(x)).max() / traj.step) if len(x) > 1 else 0.0
        elif kind == "sq_sum_tail":
            x = traj[chans[0]][mask]
            out[name] = float(np.sum(x ** 2))
        elif kind == "final":
            out[name] = float(traj[chans[0]][-1])
        else:
            raise ValueError(f"unknown metric kind {kind!r}")
    return out
