"""Numerical propagation, conservation drift and closed-form solutions.

The integrator is the Dormand-Prince 5(4) pair with a proportional-integral
step controller and the usual 4th-order dense output.  Opaque nodes that
carry a derivative rule (angles, the damping time s, quadrature terms) are
advanced as extra state components.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Mapping, Sequence

import numpy as np
from scipy.integrate import quad

from .conditions import DynSystem, ExplicitSystem
from .coords import COORD_NAMES, VEL_NAMES
from .symexpr import Expr, add, compile_exprs, expand, ensure, fn_label, mul, opaque_nodes, to_prefix

# Dormand-Prince tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
_D = (-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799, -10690763975 / 1880347072,
      701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423)


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float | None = None):
        super().__init__(message if t is None else f"{message} at t = {t:.17g}")
        self.t = t


class StepUnderflow(IntegrationError):
    pass


class SingularityError(IntegrationError):
    pass


class FamilyMismatch(ValueError):
    pass


@dataclass
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    h0: float | None = None
    max_steps: int = 2_000_000
    safety: float = 0.9
    max_growth: float = 5.0
    min_shrink: float = 0.2
    beta: float = 0.04
    r_min: float = 1e-3

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class State:
    t: float
    q: tuple
    v: tuple
    aux: tuple = ()


# field construction --------------------------------------------------------------------

def _collect_rule_nodes(exprs) -> list:
    """Rule-carrying opaque nodes reachable from ``exprs`` (including through rules)."""
    seen: dict = {}
    stack = list(exprs)
    while stack:
        e = stack.pop()
        for node in opaque_nodes(e):
            label = fn_label(node)
            if not node.args:
                raise IntegrationError(f"free function {label} has no derivative rule and cannot be evaluated")
            if label in seen:
                if seen[label] != node:
                    raise IntegrationError(f"two different opaque nodes share the label {label}")
                continue
            seen[label] = node
            stack.append(node.args[0])
    return [seen[k] for k in sorted(seen)]


class Field:
    """First-order form y' = F(t, y) of a second-order system plus auxiliary nodes."""

    def __init__(self, system, extra_exprs: Sequence[Expr] = ()):
        if not isinstance(system, (DynSystem, ExplicitSystem)):
            raise TypeError("integrate needs a DynSystem or an ExplicitSystem")
        self.system = system
        self.dim = system.dim
        acc = system.acceleration()
        nodes = _collect_rule_nodes(list(acc) + [ensure(e) for e in extra_exprs])
        self.aux_nodes = nodes
        self.aux_labels = [fn_label(n) for n in nodes]
        self.argnames = ["t", *COORD_NAMES[: self.dim], *VEL_NAMES[: self.dim], *self.aux_labels]
        rates = [n.args[0] for n in nodes]
        self._f = compile_exprs([*acc, *rates], self.argnames, "math")
        self.kepler = isinstance(system, DynSystem) and system.nu is not None
        self.size = 2 * self.dim + len(nodes)

    def __call__(self, t: float, y: list) -> list:
        d = self.dim
        try:
            out = self._f(t, *y)
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise IntegrationError(f"field not evaluable ({exc})", t) from None
        return [*y[d: 2 * d], *out]


# integrator ------------------------------------------------------------------------

@dataclass
class Trajectory:
    system: object
    t: np.ndarray
    y: np.ndarray
    dim: int
    aux_labels: list
    stats: dict = field(default_factory=dict)

    @property
    def q(self) -> np.ndarray:
        return self.y[:, : self.dim]

    @property
    def v(self) -> np.ndarray:
        return self.y[:, self.dim: 2 * self.dim]

    @property
    def aux(self) -> np.ndarray:
        return self.y[:, 2 * self.dim:]

    def states(self) -> list:
        d = self.dim
        return [State(float(t), tuple(r[:d]), tuple(r[d: 2 * d]), tuple(r[2 * d:])) for t, r in zip(self.t, self.y)]

    def columns(self) -> list:
        return ["t", *COORD_NAMES[: self.dim], *VEL_NAMES[: self.dim], *self.aux_labels]

    def evaluate(self, e: Expr) -> np.ndarray:
        e = ensure(e)
        nodes = _collect_rule_nodes([e])
        missing = [fn_label(n) for n in nodes if fn_label(n) not in self.aux_labels]
        if missing:
            raise FamilyMismatch(f"trajectory does not carry opaque nodes {missing}")
        cols = self.columns()
        f = compile_exprs([e], cols, "numpy")
        args = [self.t, *[self.y[:, i] for i in range(self.y.shape[1])]]
        out = f(*args)[0]
        return np.broadcast_to(np.asarray(out, dtype=float), self.t.shape).copy()

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns())
        for t, row in zip(self.t, self.y):
            w.writerow(["%.17g" % t, *["%.17g" % x for x in row]])
        text = buf.getvalue()
        if target is not None:
            with open(target, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _initial_step(f, t0, y0, f0, rtol, atol, direction=1.0):
    sc = [atol + rtol * abs(a) for a in y0]
    d0 = math.sqrt(sum((a / s) ** 2 for a, s in zip(y0, sc)) / len(y0))
    d1 = math.sqrt(sum((a / s) ** 2 for a, s in zip(f0, sc)) / len(y0))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = [a + h0 * b for a, b in zip(y0, f0)]
    f1 = f(t0 + h0, y1)
    d2 = math.sqrt(sum(((b - a) / s) ** 2 for a, b, s in zip(f0, f1, sc)) / len(y0)) / h0
    h1 = max(1e-6, h0 * 1e-3) if max(d1, d2) <= 1e-15 else (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1)


def integrate(system, s0: State, t_end: float, cfg: IntegratorConfig | None = None,
              t_eval: Sequence[float] | None = None, extra_exprs: Sequence[Expr] = (),
              aux0: Mapping | None = None) -> Trajectory:
    """Propagate ``system`` from ``s0`` to ``t_end``.

    With ``t_eval`` the trajectory holds the dense-output values at those
    times; otherwise every accepted step.  Opaque nodes reachable from the
    accelerations or from ``extra_exprs`` become auxiliary states, starting
    at 0 unless given in ``aux0``.
    """
    cfg = cfg or IntegratorConfig()
    F = Field(system, extra_exprs)
    d = F.dim
    if len(s0.q) != d or len(s0.v) != d:
        raise ValueError("initial state has the wrong dimension")
    t0 = float(s0.t)
    t_end = float(t_end)
    if not t_end > t0:
        raise ValueError("t_end must exceed the initial time")
    aux_init = dict(aux0 or {})
    if s0.aux:
        aux_init.update(zip(F.aux_labels, s0.aux))
    y = [*map(float, s0.q), *map(float, s0.v), *[float(aux_init.get(lbl, 0.0)) for lbl in F.aux_labels]]
    _guard(F, t0, y, cfg)

    if t_eval is not None:
        grid = sorted(float(x) for x in t_eval)
        if grid and (grid[0] < t0 - 1e-12 or grid[-1] > t_end + 1e-12):
            raise ValueError("t_eval outside the integration interval")
    else:
        grid = None
    out_t, out_y = ([t0], [list(y)]) if grid is None else ([], [])
    gi = 0
    if grid is not None:
        while gi < len(grid) and grid[gi] <= t0 + 1e-15:
            out_t.append(grid[gi])
            out_y.append(list(y))
            gi += 1

    t = t0
    k1 = F(t, y)
    h = cfg.h0 or _initial_step(F, t, y, k1, cfg.rtol, cfg.atol)
    err_prev = 1e-4
    steps = rejections = 0
    nfev = 2
    expo = 0.2 - cfg.beta * 0.75
    while t < t_end:
        if steps + rejections > cfg.max_steps:
            raise IntegrationError("maximum number of steps exceeded", t)
        if t + h > t_end:
            h = t_end - t
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepUnderflow("step size underflow", t)
        ks = [k1]
        for i in range(1, 7):
            yi = [y[j] + h * sum(a * ks[m][j] for m, a in enumerate(_A[i]) if a) for j in range(F.size)]
            ks.append(F(t + _C[i] * h, yi))
        y_new = yi  # stage 7 is evaluated at the 5th-order solution
        nfev += 6
        err = 0.0
        for j in range(F.size):
            e = h * sum(c * ks[m][j] for m, c in enumerate(_E) if c)
            sc = cfg.atol + cfg.rtol * max(abs(y[j]), abs(y_new[j]))
            err += (e / sc) ** 2
        err = math.sqrt(err / F.size)
        if not math.isfinite(err):
            h *= cfg.min_shrink
            rejections += 1
            continue
        if err <= 1.0:
            t_new = t + h
            _guard(F, t_new, y_new, cfg)
            if grid is not None and gi < len(grid) and grid[gi] <= t_new + 1e-12:
                r1 = list(y)
                ydiff = [b - a for a, b in zip(y, y_new)]
                bspl = [h * k - dd for k, dd in zip(k1, ydiff)]
                r4 = [dd - h * k - b for dd, k, b in zip(ydiff, ks[6], bspl)]
                r5 = [h * sum(c * ks[m][j] for m, c in enumerate(_D) if c) for j in range(F.size)]
                while gi < len(grid) and grid[gi] <= t_new + 1e-12:
                    th = min(1.0, (grid[gi] - t) / h)
                    th1 = 1.0 - th
                    out_t.append(grid[gi])
                    out_y.append([a + th * (b + th1 * (c + th * (dd + th1 * e)))
                                  for a, b, c, dd, e in zip(r1, ydiff, bspl, r4, r5)])
                    gi += 1
            t, y, k1 = t_new, y_new, ks[6]
            steps += 1
            if grid is None:
                out_t.append(t)
                out_y.append(list(y))
            fac = cfg.safety * err ** (-expo) * err_prev ** cfg.beta if err > 0 else cfg.max_growth
            fac = min(cfg.max_growth, max(cfg.min_shrink, fac))
            err_prev = max(err, 1e-4)
            h *= fac
        else:
            rejections += 1
            h *= max(cfg.min_shrink, cfg.safety * err ** (-expo))
    stats = {"steps": steps, "rejections": rejections, "nfev": nfev, "rtol": cfg.rtol, "atol": cfg.atol}
    return Trajectory(system, np.array(out_t), np.array(out_y), d, F.aux_labels, stats)


def _guard(F: Field, t: float, y: list, cfg: IntegratorConfig):
    if not all(math.isfinite(a) for a in y):
        raise IntegrationError("non-finite state", t)
    if F.kepler:
        r = math.sqrt(sum(a * a for a in y[: F.dim]))
        if r < cfg.r_min:
            raise SingularityError(f"trajectory entered r < {cfg.r_min:g}", t)


# drift ------------------------------------------------------------------------------

@dataclass
class DriftReport:
    integral: str
    family: str
    max_abs: float
    max_rel: float
    tol: float
    interval: tuple
    initial: float = 0.0

    def to_json(self) -> dict:
        return {"integral": self.integral, "family": self.family, "max_abs": self.max_abs,
                "max_rel": self.max_rel, "tol": self.tol, "interval": list(self.interval)}


def drift_values(expr: Expr, traj: Trajectory):
    vals = traj.evaluate(expr)
    if not np.all(np.isfinite(vals)):
        raise IntegrationError("integral not finite along the trajectory")
    dev = np.abs(vals - vals[0])
    mabs = float(dev.max())
    return mabs, mabs / (1.0 + abs(float(vals[0]))), float(vals[0])


def drift(fi, traj: Trajectory) -> DriftReport:
    """max |I - I(t0)| and the same divided by 1 + |I(t0)| along ``traj``."""
    if fi.family.system != traj.system:
        raise FamilyMismatch(f"{fi.name} belongs to the family {fi.family.name!r}, not to the integrated system")
    mabs, mrel, i0 = drift_values(fi.expr, traj)
    return DriftReport(fi.name, fi.family.name, mabs, mrel, traj.stats.get("rtol", float("nan")),
                       (float(traj.t[0]), float(traj.t[-1])), i0)


def _summands(expr: Expr) -> list:
    """Top-level summands; a single product is expanded first so that scaling a term is not a rescaling."""
    if expr.head == "add":
        return list(expr.args)
    e = expand(expr)
    return list(e.args) if e.head == "add" else [e]


def perturbed(expr: Expr, index: int, eps: float = 1e-3) -> Expr:
    """``expr`` with one summand scaled by 1 + eps."""
    terms = _summands(expr)
    if not 0 <= index < len(terms):
        raise IndexError(index)
    terms[index] = mul(Fraction(1) + Fraction(eps).limit_denominator(10 ** 12), terms[index])
    return add(*terms)


def perturbation_drifts(expr: Expr, traj: Trajectory, eps: float = 1e-3) -> list:
    terms = _summands(expr)
    return [drift_values(perturbed(expr, i, eps), traj)[1] for i in range(len(terms))]


# manifest ---------------------------------------------------------------------------

def load_manifest(path=None) -> dict:
    if path is None:
        text = resources.files("qfikit").joinpath("data/drift_manifest.json").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    data = json.loads(text)
    if "version" not in data or "entries" not in data:
        raise ValueError("manifest needs 'version' and 'entries'")
    return data


def run_manifest_entry(spec: Mapping, rtol: float = 1e-12, atol: float | None = None, grid: int = 400,
                       check_perturbation: bool = True) -> dict:
    """Integrate one manifest entry under its family and measure every integral's drift."""
    from . import catalog

    fis = catalog.build(spec["key"], spec["params"])
    system = fis[0].family.system
    if any(fi.family.system != system for fi in fis):
        raise FamilyMismatch("a manifest entry must share one family")
    t0, t1 = (float(x) for x in spec["interval"])
    cfg = IntegratorConfig(rtol=rtol, atol=atol if atol is not None else rtol * 1e-2)
    s0 = State(t0, tuple(float(x) for x in spec["q0"]), tuple(float(x) for x in spec["v0"]))
    ts = np.linspace(t0, t1, grid + 1)
    traj = integrate(system, s0, t1, cfg, t_eval=ts, extra_exprs=[fi.expr for fi in fis])
    rows = []
    for fi in fis:
        rep = drift(fi, traj)
        row = {"name": fi.name, "max_abs": rep.max_abs, "max_rel": rep.max_rel}
        if check_perturbation:
            pd = perturbation_drifts(fi.expr, traj)
            row["perturbed_min"] = min(pd)
        rows.append(row)
    return {"id": spec.get("id", spec["key"]), "key": spec["key"], "family": fis[0].family.name,
            "interval": [t0, t1], "tol": rtol, "steps": traj.stats["steps"], "integrals": rows}


# closed-form solutions ----------------------------------------------------------------

def oscillator_solution(spec, I41: Sequence, I42: Sequence) -> list:
    """q_i(t) = (2/c0)^(1/2) f^(1/2) (I41_i sin(theta) - I42_i cos(theta)), theta opaque."""
    from .symexpr import cos, num, power, sin, sqrt

    if spec.kind not in ("f", "rho"):
        raise ValueError("the closed form uses the f parameterization")
    if not isinstance(spec.c0, Expr) and spec.c0 <= 0:
        raise ValueError("c0 must be positive")
    th = spec.theta()
    pref = mul(power(sqrt(mul(Fraction(1, 2), num(spec.c0))), -1), sqrt(spec.f))
    out = []
    for a, b in zip(I41, I42):
        a = ensure(a) if isinstance(a, Expr) else num(Fraction(a))
        b = ensure(b) if isinstance(b, Expr) else num(Fraction(b))
        out.append(mul(pref, add(mul(a, sin(th)), mul(-1, b, cos(th)))))
    return out


def oscillator_residual(spec, q_exprs: Sequence[Expr]) -> list:
    """q'' + omega Q(q) for the nu = -2 system (Q = -2 q); vanishes for a solution."""
    from .symexpr import differentiate

    w = spec.omega()
    return [add(differentiate(differentiate(q, "t"), "t"), mul(-2, w, q)) for q in q_exprs]


def compare_oscillator(spec, q0: Sequence[float], v0: Sequence[float], t0: float, t1: float,
                       rtol: float = 1e-12, grid: int = 300) -> dict:
    """Closed form against numerical integration; constants read off the initial state with theta(t0) = 0."""
    from . import catalog

    lin = catalog.oscillator_linear(spec)
    system = lin["I41"][0].family.system
    theta_label = fn_label(spec.theta())
    bind = {"t": t0, theta_label: 0.0}
    for i in range(3):
        bind[COORD_NAMES[i]] = q0[i]
        bind[VEL_NAMES[i]] = v0[i]
    from .symexpr import evaluate

    c41 = [float(evaluate(fi.expr, bind)) for fi in lin["I41"]]
    c42 = [float(evaluate(fi.expr, bind)) for fi in lin["I42"]]
    closed = oscillator_solution(spec, [Fraction(c) for c in c41], [Fraction(c) for c in c42])
    ts = np.linspace(t0, t1, grid + 1)
    traj = integrate(system, State(t0, tuple(q0), tuple(v0)), t1, IntegratorConfig(rtol=rtol, atol=rtol * 1e-2),
                     t_eval=ts, extra_exprs=closed)
    err = max(float(np.max(np.abs(traj.evaluate(c) - traj.q[:, i]))) for i, c in enumerate(closed))
    th = traj.aux[:, traj.aux_labels.index(theta_label)]
    rate = _scalar_function(spec.theta_rate())
    th_quad = max(abs(quad(rate, t0, float(t), epsabs=1e-13, epsrel=1e-13, limit=200)[0] - a)
                  for t, a in zip(ts[:: max(1, grid // 30)], th[:: max(1, grid // 30)]))
    return {"max_error": err, "theta_quadrature_error": float(th_quad), "I41": c41, "I42": c42,
            "steps": traj.stats["steps"]}


def _scalar_function(e: Expr):
    f = compile_exprs([e], ["t"], "math")
    return lambda t: f(t)[0]


@dataclass
class OrbitSolution:
    b0: Fraction
    b1: Fraction
    k: Fraction
    L3: float
    E2: float
    A1: float
    A2: float
    k1: float
    k2: float
    alpha: float
    beta: float
    conic_relation_residual: float = float("nan")
    max_radial_error: float = float("nan")
    max_angular_momentum_error: float = float("nan")
    max_time_relation_error: float = float("nan")
    interval: tuple = ()
    trajectory: Trajectory | None = field(default=None, repr=False)

    def radius_at(self, theta: float, t: float) -> float:
        return self.L3 ** 2 * float(self.b0 + self.b1 * Fraction(t)) / (
            float(self.k) * (1 + self.k1 * math.cos(theta) + self.k2 * math.sin(theta)))

    def report(self) -> dict:
        return {
            "orbit": "conic",
            "b0": str(self.b0), "b1": str(self.b1), "k": str(self.k),
            "L3": self.L3, "E2": self.E2, "A1": self.A1, "A2": self.A2,
            "k1": self.k1, "k2": self.k2, "alpha": self.alpha, "beta": self.beta,
            "conic_relation_residual": self.conic_relation_residual,
            "max_radial_error": self.max_radial_error,
            "max_angular_momentum_error": self.max_angular_momentum_error,
            "max_time_relation_error": self.max_time_relation_error,
            "interval": list(self.interval),
        }


def kepler_orbit(b0, b1, k, x0: float, y0: float, vx0: float, vy0: float, t0: float = 0.0, t1: float = 5.0,
                 rtol: float = 1e-12, grid: int = 500) -> OrbitSolution:
    """Planar motion under omega = k/(b0 + b1 t) and its conic reconstruction r(theta, t)."""
    from . import catalog
    from .symexpr import evaluate

    b0, b1, k = Fraction(b0), Fraction(b1), Fraction(k)
    if k == 0:
        raise ValueError("k must be nonzero")
    for tt in (t0, t1):
        if b0 + b1 * Fraction(tt) <= 0:
            raise ValueError("b0 + b1 t must stay positive on the interval")
    L3 = x0 * vy0 - y0 * vx0
    if abs(L3) < 1e-12:
        raise ValueError("L3 = 0 gives a degenerate radial orbit")
    kt = catalog.kepler_time_dependent(b0, b1, k)
    bind = {"t": t0, "x": x0, "y": y0, "z": 0.0, "vx": vx0, "vy": vy0, "vz": 0.0}
    E2 = float(evaluate(kt.E2.expr, bind))
    A1 = float(evaluate(kt.A[0].expr, bind))
    A2 = float(evaluate(kt.A[1].expr, bind))
    kf = float(k)
    k1, k2 = A1 / kf, A2 / kf
    alpha = math.hypot(k1, k2)
    beta = math.atan2(k2, k1)
    sol = OrbitSolution(b0, b1, k, L3, E2, A1, A2, k1, k2, alpha, beta, interval=(t0, t1))
    sol.conic_relation_residual = abs(2 * E2 * L3 ** 2 - kf ** 2 * (alpha ** 2 - 1)) / (1 + kf ** 2 * (alpha ** 2 + 1))

    system = kt.E2.family.system
    ts = np.linspace(t0, t1, grid + 1)
    traj = integrate(system, State(t0, (x0, y0, 0.0), (vx0, vy0, 0.0)), t1,
                     IntegratorConfig(rtol=rtol, atol=rtol * 1e-2), t_eval=ts)
    sol.trajectory = traj
    x, y = traj.q[:, 0], traj.q[:, 1]
    r = np.hypot(x, y)
    theta = np.unwrap(np.arctan2(y, x))
    a = float(b0) + float(b1) * ts
    r_closed = L3 ** 2 * a / (kf * (1 + k1 * np.cos(theta) + k2 * np.sin(theta)))
    sol.max_radial_error = float(np.max(np.abs(r_closed - r) / r))
    # fourth-order central differences of the reconstructed angle
    hs = ts[1] - ts[0]
    thdot = (theta[:-4] - 8 * theta[1:-3] + 8 * theta[3:-1] - theta[4:]) / (12 * hs)
    sol.max_angular_momentum_error = float(np.max(np.abs(r[2:-2] ** 2 * thdot - L3)) / abs(L3))
    if b1 != 0:
        g = lambda th: 1.0 / (1 + k1 * math.cos(th) + k2 * math.sin(th)) ** 2  # noqa: E731
        worst = 0.0
        step = max(1, grid // 25)
        for i in range(0, len(ts), step):
            lhs = kf / (L3 ** 2 * a[i])
            integral = quad(g, theta[0], theta[i], epsabs=1e-13, epsrel=1e-13, limit=400)[0]
            rhs = kf / (L3 ** 2 * a[0]) - float(b1) * L3 / kf * integral
            worst = max(worst, abs(lhs - rhs) / abs(lhs))
        sol.max_time_relation_error = float(worst)
    else:
        sol.max_time_relation_error = 0.0
    return sol


# polar reduction ---------------------------------------------------------------------

def rotation_to_z(L: Sequence[float]) -> np.ndarray:
    """Rotation matrix taking the direction of L to +z (Rodrigues formula)."""
    L = np.asarray(L, dtype=float)
    n = np.linalg.norm(L)
    if n < 1e-12:
        raise ValueError("angular momentum below threshold")
    u = L / n
    z = np.array([0.0, 0.0, 1.0])
    c = float(u @ z)
    axis = np.cross(u, z)
    s = float(np.linalg.norm(axis))
    if s < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    axis /= s
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + s * K + (1 - c) * (K @ K)


@dataclass
class PolarTrajectory:
    t: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    rdot: np.ndarray
    thetadot: np.ndarray
    rotation: np.ndarray

    def to_cartesian(self):
        """Inverse map back to the original frame: (q, v) arrays."""
        c, s = np.cos(self.theta), np.sin(self.theta)
        qp = np.stack([self.r * c, self.r * s, np.zeros_like(self.r)], axis=1)
        vp = np.stack([self.rdot * c - self.r * self.thetadot * s,
                       self.rdot * s + self.r * self.thetadot * c, np.zeros_like(self.r)], axis=1)
        R = self.rotation
        return qp @ R, vp @ R


def polar_reduction(traj: Trajectory) -> PolarTrajectory:
    if traj.dim != 3:
        raise ValueError("polar reduction needs a 3d trajectory")
    q0, v0 = traj.q[0], traj.v[0]
    R = rotation_to_z(np.cross(q0, v0))
    qp = traj.q @ R.T
    vp = traj.v @ R.T
    x, y = qp[:, 0], qp[:, 1]
    r = np.hypot(x, y)
    theta = np.unwrap(np.arctan2(y, x))
    rdot = (x * vp[:, 0] + y * vp[:, 1]) / r
    thetadot = (x * vp[:, 1] - y * vp[:, 0]) / r ** 2
    return PolarTrajectory(traj.t.copy(), r, theta, rdot, thetadot, R)


def expression_drift(expr: Expr, system, s0: State, t1: float, rtol: float = 1e-12, grid: int = 400) -> dict:
    """Drift of a bare expression along a numerical solution of ``system`` (no family bookkeeping)."""
    ts = np.linspace(s0.t, t1, grid + 1)
    traj = integrate(system, s0, t1, IntegratorConfig(rtol=rtol, atol=rtol * 1e-2), t_eval=ts, extra_exprs=[expr])
    mabs, mrel, i0 = drift_values(expr, traj)
    return {"max_abs": mabs, "max_rel": mrel, "initial": i0, "tol": rtol, "interval": [float(s0.t), float(t1)],
            "steps": traj.stats["steps"]}


def compare_mu1(res, x0: float, v0: float, t0: float, t1: float, rtol: float = 1e-12, grid: int = 300) -> dict:
    """Closed-form solution of the mu = 1 damped family against integration; theta(t0) = 0."""
    from .symexpr import differentiate, evaluate, substitute

    theta_label = fn_label(res.theta)
    rho = substitute(res.solution, {"A": 0, "B": 1})  # rho cos(theta)
    at0 = {"t": t0, theta_label: 0.0}
    rho0 = float(evaluate(rho, at0))
    B = x0 / rho0
    xd = differentiate(res.solution, "t")
    # x'(t0) is affine in A at theta = 0
    base = float(evaluate(substitute(xd, {"A": 0, "B": Fraction(B)}), at0))
    slope = float(evaluate(substitute(xd, {"A": 1, "B": Fraction(B)}), at0)) - base
    A = (v0 - base) / slope
    closed = substitute(res.solution, {"A": Fraction(A), "B": Fraction(B)})
    ts = np.linspace(t0, t1, grid + 1)
    traj = integrate(res.system, State(t0, (x0,), (v0,)), t1, IntegratorConfig(rtol=rtol, atol=rtol * 1e-2),
                     t_eval=ts, extra_exprs=[closed, res.I])
    err = float(np.max(np.abs(traj.evaluate(closed) - traj.q[:, 0])))
    _, mrel, i0 = drift_values(res.I, traj)
    return {"max_error": err, "A": A, "B": B, "integral_drift": mrel, "integral": i0,
            "amplitude_check": abs(i0 - (A * A + B * B))}


def integral_value(expr: Expr, state: State, aux: Mapping | None = None) -> float:
    from .symexpr import evaluate

    b = {"t": state.t}
    for i, a in enumerate(state.q):
        b[COORD_NAMES[i]] = a
    for i, a in enumerate(state.v):
        b[VEL_NAMES[i]] = a
    b.update(aux or {})
    return float(evaluate(expr, b))


__all__ = [
    "IntegratorConfig", "State", "Trajectory", "integrate", "IntegrationError", "StepUnderflow",
    "SingularityError", "FamilyMismatch", "DriftReport", "drift", "drift_values", "perturbed",
    "perturbation_drifts", "load_manifest", "run_manifest_entry", "oscillator_solution", "oscillator_residual",
    "compare_oscillator", "OrbitSolution", "kepler_orbit", "rotation_to_z", "PolarTrajectory",
    "polar_reduction", "integral_value", "expression_drift", "compare_mu1", "to_prefix",
]
