"""Deciding whether an expression vanishes identically."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .algebra import NotRational, normal_numerator
from .evaluate import DomainError, evaluate
from .expr import Expr, fn_label, free_symbols, opaque_nodes

DEFAULT_SEED = 20240607
PHASE_SYMBOLS = frozenset(
    ["x", "y", "z", "vx", "vy", "vz"]
    + [f"q{i}" for i in range(1, 4)]
    + [f"v{i}" for i in range(1, 4)]
)


@dataclass(frozen=True)
class Exact:
    pass


@dataclass(frozen=True)
class Sampled:
    n: int = 32
    eps: float = 1e-9
    seed: int = DEFAULT_SEED


@dataclass(frozen=True)
class Auto:
    """Exact when a normal form exists, otherwise Sampled with these settings."""

    n: int = 32
    eps: float = 1e-9
    seed: int = DEFAULT_SEED


@dataclass
class Verdict:
    zero: bool
    method: str
    witness: dict | None = None
    value: float | None = None
    samples: int = 0
    seed: int | None = None
    note: str = ""
    extra: dict = field(default_factory=dict)

    def __bool__(self):
        return self.zero

    def to_json(self) -> dict:
        out = {"zero": self.zero, "method": self.method}
        if self.witness is not None:
            out["witness"] = {k: float(v) for k, v in sorted(self.witness.items())}
            out["value"] = float(self.value) if self.value is not None else None
        if self.method == "sampled":
            out["samples"] = self.samples
            out["seed"] = self.seed
        if self.note:
            out["note"] = self.note
        return out


def sample_binding(e: Expr, rng: random.Random, time_symbol: str = "t") -> dict:
    """Random point: phase-space symbols in +-[0.5, 2], t in [0.1, 3], the rest in [0.5, 2]."""
    b = {}
    for name in sorted(free_symbols(e)):
        if name == time_symbol:
            b[name] = rng.uniform(0.1, 3.0)
        elif name in PHASE_SYMBOLS:
            b[name] = rng.choice((-1.0, 1.0)) * rng.uniform(0.5, 2.0)
        else:
            b[name] = rng.uniform(0.5, 2.0)
    for node in opaque_nodes(e):
        b[fn_label(node)] = rng.uniform(0.5, 2.0)
    return b


def _magnitude(e: Expr, b: dict, value) -> float:
    scale = abs(float(value))
    if e.head == "add":
        s = 0.0
        for a in e.args:
            try:
                s += abs(float(evaluate(a, b)))
            except DomainError:
                return float("inf")
        scale = max(scale, s)
    return scale


def sampled_zero(e: Expr, n: int = 32, eps: float = 1e-9, seed: int = DEFAULT_SEED) -> Verdict:
    rng = random.Random(seed)
    done = 0
    attempts = 0
    worst = 0.0
    while done < n:
        attempts += 1
        if attempts > 60 * n:
            return Verdict(False, "sampled", None, None, done, seed,
                           note="could not find enough regular sample points")
        b = sample_binding(e, rng)
        try:
            v = evaluate(e, b)
            fv = float(v)
        except (DomainError, OverflowError):
            continue
        if not math.isfinite(fv):
            continue
        scale = _magnitude(e, b, v)
        if not math.isfinite(scale):
            continue
        done += 1
        worst = max(worst, abs(fv) / (1.0 + scale))
        if abs(fv) > eps * (1.0 + scale):
            return Verdict(False, "sampled", b, fv, done, seed)
    return Verdict(True, "sampled", None, None, done, seed, extra={"max_scaled": worst})


def exact_zero(e: Expr, seed: int = DEFAULT_SEED) -> Verdict:
    num, _ = normal_numerator(e, seed)
    if num.is_zero():
        return Verdict(True, "exact")
    # the normal form is nonzero; report a witness point
    probe = sampled_zero(e, n=64, eps=1e-12, seed=seed)
    if probe.zero:
        raise NotRational("normal form nonzero but no witness found; atoms may be dependent")
    return Verdict(False, "exact", probe.witness, probe.value)


def is_identically_zero(e: Expr, strategy=None) -> Verdict:
    """Zero test with ``Exact()``, ``Sampled(n, eps, seed)`` or ``Auto()`` (default)."""
    if strategy is None:
        strategy = Auto()
    if isinstance(strategy, Exact):
        return exact_zero(e)
    if isinstance(strategy, Sampled):
        return sampled_zero(e, strategy.n, strategy.eps, strategy.seed)
    if isinstance(strategy, Auto):
        try:
            return exact_zero(e, strategy.seed)
        except NotRational as exc:
            v = sampled_zero(e, strategy.n, strategy.eps, strategy.seed)
            v.note = f"sampled fallback: {exc}"
            return v
    raise TypeError(f"unknown strategy {strategy!r}")


def all_zero(exprs, strategy=None) -> Verdict:
    """Combined verdict over several expressions; the first failure is returned."""
    method = "exact"
    for e in exprs:
        v = is_identically_zero(e, strategy)
        if not v.zero:
            return v
        if v.method == "sampled":
            method = "sampled"
    return Verdict(True, method)
