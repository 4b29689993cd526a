"""Concrete measure-preserving systems and weighted averaging experiments.

Two systems are provided: the cyclic shift on Z_q with uniform measure
(exact arithmetic for level sets, the workhorse for quantitative checks)
and the circle rotation x -> x + alpha mod 1 with a deterministic
stratified state sample (qualitative demonstrations).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .measures import LatticeMeasure, SequenceSpec, convolve_prefixes

#: Default rotation angle: an irrational surrogate with good equidistribution.
DEFAULT_ALPHA = math.sqrt(2.0) - 1.0

State = Union[int, float]


@dataclass(frozen=True)
class DynSystem:
    """Cyclic shift on Z_q or circle rotation, with a fixed state sample.

    For the rotation, states are one point per stratum ``[i/samples,
    (i+1)/samples)``; the common in-stratum offset is drawn once from
    ``seed`` so the sample is deterministic and does not align with
    interval endpoints.  Subset measure is exact (count/q) for the cyclic
    system and the sample fraction for the rotation.
    """

    kind: str
    q: int = 0
    alpha: float = 0.0
    samples: int = 0
    seed: int = 0

    @classmethod
    def cyclic(cls, q: int) -> "DynSystem":
        if q < 1:
            raise ValueError("q must be positive")
        return cls(kind="cyclic", q=int(q))

    @classmethod
    def rotation(
        cls, alpha: float = DEFAULT_ALPHA, samples: int = 4096, seed: int = 0
    ) -> "DynSystem":
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if samples < 1:
            raise ValueError("samples must be positive")
        return cls(kind="rotation", alpha=float(alpha), samples=int(samples), seed=int(seed))

    @property
    def is_cyclic(self) -> bool:
        return self.kind == "cyclic"

    def states(self) -> np.ndarray:
        if self.is_cyclic:
            return np.arange(self.q, dtype=np.int64)
        offset = float(np.random.default_rng(self.seed).random())
        return ((np.arange(self.samples) + offset) / self.samples) % 1.0

    def advance(self, xs: np.ndarray, k: int) -> np.ndarray:
        """Apply tau^k; k may be negative (the shift is invertible)."""
        if self.is_cyclic:
            return (np.asarray(xs, dtype=np.int64) + int(k)) % self.q
        return (np.asarray(xs, dtype=float) + k * self.alpha) % 1.0

    def measure_fraction(self, mask: np.ndarray) -> float:
        denom = self.q if self.is_cyclic else self.samples
        return float(np.count_nonzero(mask)) / float(denom)


@dataclass(frozen=True)
class TestFunction:
    """Observable on a system: indicator, single trigonometric mode, or table.

    ``indicator_block`` lives on cyclic systems (a block of residues),
    ``indicator_interval`` on the rotation (a subinterval of [0, 1)),
    ``trig`` on either, and ``table`` fixes one value per cyclic state.
    """

    __test__ = False  # not a test case despite the name

    kind: str
    start: int = 0
    length: int = 0
    a: float = 0.0
    b: float = 0.0
    freq: int = 0
    scale: float = 1.0
    values: Optional[np.ndarray] = None

    @classmethod
    def indicator_block(cls, start: int, length: int, scale: float = 1.0) -> "TestFunction":
        if length < 0:
            raise ValueError("length must be nonnegative")
        return cls(kind="indicator_block", start=int(start), length=int(length), scale=float(scale))

    @classmethod
    def indicator_interval(cls, a: float, b: float, scale: float = 1.0) -> "TestFunction":
        if not 0.0 <= a <= b <= 1.0:
            raise ValueError("need 0 <= a <= b <= 1")
        return cls(kind="indicator_interval", a=float(a), b=float(b), scale=float(scale))

    @classmethod
    def trig(cls, freq: int, scale: float = 1.0) -> "TestFunction":
        return cls(kind="trig", freq=int(freq), scale=float(scale))

    @classmethod
    def table(cls, values: Sequence[float]) -> "TestFunction":
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("table needs a nonempty 1-d value array")
        arr = arr.copy()
        arr.setflags(write=False)
        return cls(kind="table", values=arr)

    def evaluate(self, sys: DynSystem, xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_1d(xs)
        if self.kind == "indicator_block":
            if not sys.is_cyclic:
                raise ValueError("indicator_block requires a cyclic system")
            hits = ((np.asarray(xs, dtype=np.int64) - self.start) % sys.q) < self.length
            return self.scale * hits.astype(float)
        if self.kind == "indicator_interval":
            if sys.is_cyclic:
                raise ValueError("indicator_interval requires a rotation system")
            u = np.asarray(xs, dtype=float) % 1.0
            return self.scale * ((u >= self.a) & (u < self.b)).astype(float)
        if self.kind == "trig":
            u = np.asarray(xs, dtype=float)
            angle = 2.0 * math.pi * self.freq * (u / sys.q if sys.is_cyclic else u)
            return self.scale * np.cos(angle)
        if self.kind == "table":
            if not sys.is_cyclic:
                raise ValueError("table requires a cyclic system")
            if len(self.values) != sys.q:
                raise ValueError("table length must equal q")
            return self.values[np.asarray(xs, dtype=np.int64) % sys.q]
        raise ValueError(f"unknown test function kind {self.kind!r}")

    def norm_l1(self, sys: DynSystem) -> float:
        """Mean of |f| over the state space (exact for cyclic systems)."""
        return float(np.mean(np.abs(self.evaluate(sys, sys.states()))))

    def sup_norm(self, sys: DynSystem) -> float:
        return float(np.max(np.abs(self.evaluate(sys, sys.states()))))


# -- weighted averaging --------------------------------------------------------------
def _support_arrays(mu: LatticeMeasure) -> tuple[np.ndarray, np.ndarray]:
    nz = np.flatnonzero(mu.weights)
    return mu.min_index + nz, mu.weights[nz]


def weighted_average(sys: DynSystem, mu: LatticeMeasure, f: TestFunction, x: State) -> float:
    """Exact finite sum ``sum_k mu(k) f(tau^k x)``."""
    ks, ws = _support_arrays(mu)
    if sys.is_cyclic:
        pts = (int(x) + ks) % sys.q
    else:
        pts = (float(x) + ks * sys.alpha) % 1.0
    return float(np.dot(ws, f.evaluate(sys, pts)))


def weighted_average_all(
    sys: DynSystem, mu: LatticeMeasure, f: TestFunction, extra_shift: int = 0
) -> np.ndarray:
    """Vector of mu f(tau^extra_shift x) over every state of the system."""
    ks, ws = _support_arrays(mu)
    ks = ks + extra_shift
    if sys.is_cyclic:
        fvals = f.evaluate(sys, np.arange(sys.q, dtype=np.int64))
        out = np.zeros(sys.q)
        for k, w in zip(ks, ws):
            out += w * np.roll(fvals, -int(k) % sys.q)
        return out
    xs = sys.states()
    out = np.zeros(len(xs))
    for k, w in zip(ks, ws):
        out += w * f.evaluate(sys, (xs + k * sys.alpha) % 1.0)
    return out


def maximal_function(
    sys: DynSystem, mus: Sequence[LatticeMeasure], f: TestFunction, x: State
) -> float:
    """max over the supplied prefix of |mu_n f(x)|."""
    if not mus:
        raise ValueError("need at least one measure")
    return max(abs(weighted_average(sys, mu, f, x)) for mu in mus)


class Weak11Row(NamedTuple):
    lam: float
    level_measure: float
    constant: float


def weak11_table(
    sys: DynSystem,
    spec: SequenceSpec,
    f: TestFunction,
    N: int,
    lambdas: Sequence[float],
    prune_eps: float = 0.0,
) -> list[Weak11Row]:
    """Empirical weak-(1,1) table for Mf = max_{n<=N} |mu_n f|.

    Each row is ``(lambda, m{Mf > lambda}, lambda * m{Mf > lambda} / ||f||_1)``;
    the last column is the empirical weak-type constant at that level.
    """
    mf = maximal_function_all(sys, spec, f, N, prune_eps=prune_eps)
    norm = f.norm_l1(sys)
    if norm == 0.0:
        raise ValueError("test function has zero l1 norm")
    rows = []
    for lam in lambdas:
        lam = float(lam)
        if lam <= 0:
            raise ValueError("lambda levels must be positive")
        level = sys.measure_fraction(mf > lam)
        rows.append(Weak11Row(lam, level, lam * level / norm))
    return rows


def maximal_function_all(
    sys: DynSystem,
    spec: SequenceSpec,
    f: TestFunction,
    N: int,
    prune_eps: float = 0.0,
) -> np.ndarray:
    """Vector of Mf over all states for the prefix products up to N."""
    mus = convolve_prefixes(spec, N, prune_eps=prune_eps)
    mf = None
    for mu in mus:
        vals = np.abs(weighted_average_all(sys, mu, f))
        mf = vals if mf is None else np.maximum(mf, vals)
    return mf


def coboundary_bound_check(
    sys: DynSystem, mu: LatticeMeasure, g: TestFunction
) -> tuple[float, float]:
    """Contrast ``sup_x |mu g(x) - mu(g o tau)(x)|`` with its shift bound.

    Returns ``(lhs, rhs)`` where rhs = tv_shift_distance(mu) * sup|g|; the
    lhs never exceeds the rhs (up to rounding).
    """
    from .measures import tv_shift_distance

    direct = weighted_average_all(sys, mu, g)
    shifted = weighted_average_all(sys, mu, g, extra_shift=1)
    lhs = float(np.max(np.abs(direct - shifted)))
    rhs = tv_shift_distance(mu) * g.sup_norm(sys)
    return lhs, rhs


class ConvergenceTrace(NamedTuple):
    values: list[float]
    oscillation: float
    window_start: int


def convergence_trace(
    sys: DynSystem,
    spec: SequenceSpec,
    f: TestFunction,
    x: State,
    N: int,
    prune_eps: float = 0.0,
    window_start: Optional[int] = None,
) -> ConvergenceTrace:
    """The series (mu_n f(x))_{n<=N} with its tail oscillation.

    The oscillation is max - min over the window [window_start, N], which
    defaults to [N//2, N]; a small value is a finite-horizon stability
    diagnostic, never a convergence claim.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    m = N // 2 if window_start is None else int(window_start)
    if not 1 <= m <= N:
        raise ValueError("window_start must lie in [1, N]")
    mus = convolve_prefixes(spec, N, prune_eps=prune_eps)
    values = [weighted_average(sys, mu, f, x) for mu in mus]
    window = values[m - 1 :]
    return ConvergenceTrace(values, float(max(window) - min(window)), m)
