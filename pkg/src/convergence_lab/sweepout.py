"""The three-atom counterexample family and sweep-out diagnostics.

The family puts weight (1+2b)/(3+2b) at k=1 and 1/(3+2b) at k=-b and
k=-b-1, with b = floor(1/(1-a_n)) driven by a rate sequence a_n -> 1.
Each member is centered, and the mass splits as an atom at 1 plus a far
remainder, which drives both dissipativity of the running products and a
positive floor on |mu_n_hat| away from the trivial character.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .measures import (
    DEFAULT_SUPPORT_CAP,
    Decomposition,
    LatticeMeasure,
    SequenceSpec,
    convolve_prefixes,
    from_pairs,
)
from .spectral import fourier_at
from .dynamics import DynSystem

#: Reporting conventions for the simulation summaries.
HIGH_THRESHOLD = 0.9
LOW_THRESHOLD = 0.1


def example_measure(b: int) -> LatticeMeasure:
    """Three-atom centered measure with parameter b >= 1."""
    b = int(b)
    if b < 1:
        raise ValueError("b must be at least 1")
    denom = 3 + 2 * b
    return from_pairs({1: (1 + 2 * b) / denom, -b: 1.0 / denom, -b - 1: 1.0 / denom})


def example_decomposition(b: int) -> Decomposition:
    """Atom-plus-remainder view: a delta_1 + (1-a)/2 (delta_{-b} + delta_{-b-1})."""
    b = int(b)
    denom = 3 + 2 * b
    remainder = from_pairs({-b: 0.5, -b - 1: 0.5})
    return Decomposition((1 + 2 * b) / denom, 1, remainder)


@dataclass(frozen=True)
class SweepoutFamily:
    """Rate sequence a_n in [0, 1) with the derived three-atom measures."""

    name: str
    a_of: Callable[[int], float]

    def a_at(self, n: int) -> float:
        a = float(self.a_of(n))
        if not a < 1.0:
            raise ValueError(f"a_{n} = {a} must be below 1")
        return a

    def b_at(self, n: int) -> int:
        a = self.a_at(n)
        # Nudge before flooring: closed-form rates often make 1/(1-a) an
        # exact integer which float division lands a few ulps short of.
        b = math.floor(1.0 / (1.0 - a) + 1e-9)
        if b < 1:
            raise ValueError(f"a_{n} = {a} yields b < 1")
        return b

    def measure_at(self, n: int) -> LatticeMeasure:
        return example_measure(self.b_at(n))

    def decomposition_at(self, n: int) -> Decomposition:
        return example_decomposition(self.b_at(n))

    def to_spec(self, length_hint: int = 0) -> SequenceSpec:
        return SequenceSpec(
            name=self.name,
            measure_at=self.measure_at,
            decomposition_at=self.decomposition_at,
            length_hint=length_hint,
        )


def inverse_square_family(coeff: float = 1.0) -> SweepoutFamily:
    """Rates a_n = 1 - 1/(coeff n^2); the defect series is summable."""
    if coeff < 1.0:
        raise ValueError("coeff must be at least 1 so that b_1 >= 1")
    return SweepoutFamily(
        name=f"three_atom_inverse_square_{coeff:g}",
        a_of=lambda n: 1.0 - 1.0 / (coeff * n * n),
    )


def geometric_family(ratio: float = 0.5) -> SweepoutFamily:
    """Rates a_n = 1 - ratio^n with ratio in (0, 1)."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    return SweepoutFamily(
        name=f"three_atom_geometric_{ratio:g}",
        a_of=lambda n: 1.0 - ratio**n,
    )


# -- diagnostics -----------------------------------------------------------------------
class DissipativityRow(NamedTuple):
    n: int
    window_max: float


def dissipativity_trace(
    spec: SequenceSpec,
    K: int,
    N: int,
    prune_eps: float = 0.0,
    support_cap: int = DEFAULT_SUPPORT_CAP,
) -> list[DissipativityRow]:
    """Rows (n, max_{|k| <= K} mu_n(k)) for the running products."""
    if K < 1 or N < 1:
        raise ValueError("K and N must be positive")
    window = np.arange(-K, K + 1, dtype=np.int64)
    rows = []
    for n, mu in enumerate(
        convolve_prefixes(spec, N, prune_eps=prune_eps, support_cap=support_cap), start=1
    ):
        rows.append(DissipativityRow(n, float(np.max(mu.weights_at(window)))))
    return rows


class ScanRow(NamedTuple):
    t: float
    floor_min: float
    product_bound: float


@dataclass(frozen=True)
class FloorScanResult:
    """Per-point floor of |mu_n_hat| on a tail window against the atom product."""

    rows: list[ScanRow]
    product_bound: float
    vacuous: bool
    window_start: int
    horizon: int

    @property
    def contract_margin(self) -> float:
        """min over points of (observed floor - product bound); the product
        bound is a proven lower bound, so this should never be below -1e-10."""
        return min(r.floor_min - r.product_bound for r in self.rows)


def scan_points(max_denominator: int = 8, uniform: int = 0) -> np.ndarray:
    """Low-denominator rationals in [-1/2, 1/2), optionally plus a uniform grid."""
    pts = {Fraction(0)}
    for q in range(1, max_denominator + 1):
        for p in range(-q, q + 1):
            f = Fraction(p, q)
            if Fraction(-1, 2) <= f < Fraction(1, 2):
                pts.add(f)
    out = sorted(float(f) for f in pts)
    if uniform > 0:
        out = sorted(set(out) | {-0.5 + j / uniform for j in range(uniform)})
    return np.array(out)


def fourier_floor_scan(
    spec: SequenceSpec,
    points: Sequence[float],
    N: int,
    window_start: Optional[int] = None,
) -> FloorScanResult:
    """Floor of |mu_n_hat(t)| over a tail window against the product bound.

    The floor at each point is the minimum over n in [window_start, N]
    (default window [N//2, N], a finite-horizon proxy for tail behavior).
    The bound prod_l (2 a_l - 1) uses the decomposition atom weights; it is
    reported as vacuous (0) when the decomposition is missing or some atom
    weight is at most 1/2.  The transforms of the running products are
    evaluated as pointwise products of the factor transforms, so no large
    convolutions are formed.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    ts = np.asarray(points, dtype=float)
    if np.any(ts < -0.5) or np.any(ts >= 0.5):
        raise ValueError("scan points must lie in [-1/2, 1/2)")
    window_start = max(1, N // 2) if window_start is None else int(window_start)
    if not 1 <= window_start <= N:
        raise ValueError("window_start must lie in [1, N]")
    running = np.ones(len(ts), dtype=complex)
    floor = np.full(len(ts), np.inf)
    for n in range(1, N + 1):
        running *= fourier_at(spec.measure_at(n), ts)
        if n >= window_start:
            floor = np.minimum(floor, np.abs(running))

    vacuous = not spec.has_decomposition
    product = 1.0
    if not vacuous:
        for n in range(1, N + 1):
            factor = 2.0 * spec.decomposition(n).atom_weight - 1.0
            if factor <= 0.0:
                vacuous = True
                break
            product *= factor
    bound = 0.0 if vacuous else product
    rows = [ScanRow(float(t), float(f), bound) for t, f in zip(ts, floor)]
    return FloorScanResult(rows, bound, vacuous, window_start, N)


# -- simulation -------------------------------------------------------------------------
@dataclass(frozen=True)
class SweepoutSimulation:
    """Per-state running extrema of mu_n chi_B and their distribution summary.

    ``frac_high`` is the fraction of sampled states whose running max reached
    ``high_threshold``; ``frac_low`` the fraction whose running min fell to
    ``low_threshold``.  These are finite-horizon reporting conventions, not
    limit claims.
    """

    sup_trace: np.ndarray
    inf_trace: np.ndarray
    frac_high: float
    frac_low: float
    high_threshold: float
    low_threshold: float
    horizon: int
    set_measure: float


def _interval_masses(
    sorted_positions: np.ndarray,
    order: np.ndarray,
    weights: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
) -> np.ndarray:
    """Mass of weights whose circle position falls in [lo, hi) mod 1."""
    cs = np.concatenate(([0.0], np.cumsum(weights[order])))
    il = np.searchsorted(sorted_positions, lo, side="left")
    ih = np.searchsorted(sorted_positions, hi, side="left")
    wraps = lo > hi
    plain = cs[ih] - cs[il]
    wrapped = (cs[-1] - cs[il]) + cs[ih]
    return np.where(wraps, wrapped, plain)


def sweepout_simulation(
    sys: DynSystem,
    spec: SequenceSpec,
    B_measure: float,
    N: int,
    prune_eps: float = 0.0,
    support_cap: int = DEFAULT_SUPPORT_CAP,
    high_threshold: float = HIGH_THRESHOLD,
    low_threshold: float = LOW_THRESHOLD,
) -> SweepoutSimulation:
    """Running max/min of mu_n chi_B(x) over n <= N for every sampled state.

    B is the block {0, ..., round(B_measure q) - 1} on the cyclic system and
    the interval [0, B_measure) on the rotation.  The per-state values are
    exact sums of mu_n mass over the preimage of B.
    """
    if not 0.0 <= B_measure <= 1.0:
        raise ValueError("B_measure must lie in [0, 1]")
    if N < 1:
        raise ValueError("N must be >= 1")
    mus = convolve_prefixes(spec, N, prune_eps=prune_eps, support_cap=support_cap)
    kmin = min(mu.min_index for mu in mus)
    kmax = max(mu.max_index for mu in mus)
    length = kmax - kmin + 1
    ks = np.arange(kmin, kmax + 1, dtype=np.int64)

    sup_trace: Optional[np.ndarray] = None
    inf_trace: Optional[np.ndarray] = None

    if sys.is_cyclic:
        q = sys.q
        block_len = int(round(B_measure * q))
        set_measure = block_len / q
        residues = ks % q
        xs = sys.states()
        for mu in mus:
            w = np.zeros(length)
            i0 = mu.min_index - kmin
            w[i0 : i0 + len(mu.weights)] = mu.weights
            mass_mod = np.bincount(residues, weights=w, minlength=q)
            cs = np.concatenate(([0.0], np.cumsum(mass_mod), [0.0]))
            # windowed sum of block_len residues starting at r, wrapping mod q
            starts = (-xs) % q
            ends = starts + block_len
            plain = np.where(ends <= q, cs[np.minimum(ends, q)] - cs[starts], 0.0)
            wrapped = np.where(ends > q, (cs[q] - cs[starts]) + cs[ends - q], 0.0)
            vals = plain + wrapped
            sup_trace = vals if sup_trace is None else np.maximum(sup_trace, vals)
            inf_trace = vals if inf_trace is None else np.minimum(inf_trace, vals)
    else:
        set_measure = B_measure
        positions = (ks * sys.alpha) % 1.0
        order = np.argsort(positions, kind="stable")
        sorted_positions = positions[order]
        xs = sys.states()
        lo = (-xs) % 1.0
        hi = (lo + B_measure) % 1.0
        if B_measure >= 1.0:
            lo = np.zeros_like(lo)
            hi = np.ones_like(hi)
        for mu in mus:
            w = np.zeros(length)
            i0 = mu.min_index - kmin
            w[i0 : i0 + len(mu.weights)] = mu.weights
            vals = _interval_masses(sorted_positions, order, w, lo, hi)
            sup_trace = vals if sup_trace is None else np.maximum(sup_trace, vals)
            inf_trace = vals if inf_trace is None else np.minimum(inf_trace, vals)

    frac_high = float(np.mean(sup_trace >= high_threshold))
    frac_low = float(np.mean(inf_trace <= low_threshold))
    return SweepoutSimulation(
        sup_trace=sup_trace,
        inf_trace=inf_trace,
        frac_high=frac_high,
        frac_low=frac_low,
        high_threshold=high_threshold,
        low_threshold=low_threshold,
        horizon=N,
        set_measure=set_measure,
    )
