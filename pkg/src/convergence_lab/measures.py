"""Finitely supported probability measures on the integer lattice.

A measure is stored densely as a weight vector over a contiguous index
window ``[min_index, min_index + len(weights) - 1]``.  The ``mass_defect``
field records mass removed by pruning; pruned measures are never silently
renormalized, so stored weights plus the defect always account for total
mass 1.  All values are immutable after construction and every operation
here is a pure function.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence, TextIO

import numpy as np

#: Hard ceiling on the dense support length a convolution may produce.
DEFAULT_SUPPORT_CAP = 1_000_000

#: Tolerance for "weights plus defect sum to one" on exactly built measures.
PROBABILITY_TOL = 1e-12

#: Looser gate used at construction time; long convolution chains accumulate
#: a little rounding, which tests pin down case by case.
_CONSTRUCTION_TOL = 1e-9

#: Convolutions switch to shifted-adds when one side has few atoms.
_SPARSE_NNZ_CUTOFF = 32


class SupportCapError(RuntimeError):
    """A convolution result would exceed the configured support cap."""


@dataclass(frozen=True, eq=False)
class LatticeMeasure:
    """Nonnegative weights on a window of integers, summing to ~1.

    Invariants enforced at construction:

    * all weights are finite and nonnegative;
    * the first and last stored weights are strictly positive (the window
      is trimmed to the support hull);
    * ``sum(weights) + mass_defect`` is 1 up to rounding;
    * ``mass_defect >= 0``.
    """

    min_index: int
    weights: np.ndarray
    mass_defect: float = 0.0

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty 1-d array")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        nz = np.flatnonzero(w)
        if nz.size == 0:
            raise ValueError("measure carries no mass")
        w = w[nz[0] : nz[-1] + 1].copy()
        w.setflags(write=False)
        defect = float(self.mass_defect)
        if defect < -PROBABILITY_TOL:
            raise ValueError(f"mass_defect must be nonnegative, got {defect}")
        defect = max(defect, 0.0)
        total = float(np.sum(w)) + defect
        if abs(total - 1.0) > _CONSTRUCTION_TOL:
            raise ValueError(
                f"weights plus mass_defect must sum to 1, got {total!r}"
            )
        object.__setattr__(self, "min_index", int(self.min_index) + int(nz[0]))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "mass_defect", defect)

    # -- geometry ------------------------------------------------------------
    @property
    def max_index(self) -> int:
        return self.min_index + len(self.weights) - 1

    @property
    def diameter(self) -> int:
        """Distance between the extreme support points."""
        return len(self.weights) - 1

    @property
    def support(self) -> np.ndarray:
        """Indices carrying strictly positive weight."""
        return self.min_index + np.flatnonzero(self.weights)

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.weights))

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    # -- pointwise access ----------------------------------------------------
    def weight(self, k: int) -> float:
        i = int(k) - self.min_index
        if 0 <= i < len(self.weights):
            return float(self.weights[i])
        return 0.0

    def weights_at(self, ks: np.ndarray) -> np.ndarray:
        """Vectorized weight lookup, zero outside the stored window."""
        ks = np.asarray(ks, dtype=np.int64)
        idx = ks - self.min_index
        inside = (idx >= 0) & (idx < len(self.weights))
        out = np.zeros(ks.shape, dtype=float)
        out[inside] = self.weights[idx[inside]]
        return out

    def __repr__(self) -> str:
        return (
            f"LatticeMeasure(min_index={self.min_index}, "
            f"support_len={len(self.weights)}, nnz={self.nnz}, "
            f"mass_defect={self.mass_defect:.3e})"
        )

    # -- serialization ---------------------------------------------------------
    def to_text(self) -> str:
        """Plain-text form: header ``offset <min_index>``, one weight per line."""
        lines = [f"offset {self.min_index}"]
        lines.extend(repr(float(x)) for x in self.weights)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LatticeMeasure":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("offset"):
            raise ValueError("expected header line 'offset <min_index>'")
        parts = lines[0].split()
        if len(parts) != 2:
            raise ValueError(f"malformed header line: {lines[0]!r}")
        offset = int(parts[1])
        weights = np.array([float(x) for x in lines[1:]], dtype=float)
        # The text format carries weights only; any missing mass is treated
        # as recorded defect so the probability invariant survives a round trip.
        defect = max(0.0, 1.0 - float(np.sum(weights)))
        return cls(offset, weights, defect)

    def to_csv(self, stream: TextIO) -> None:
        """Write (k, weight) pairs for the stored window."""
        stream.write("k,weight\n")
        for i, w in enumerate(self.weights):
            stream.write(f"{self.min_index + i},{float(w)!r}\n")


# -- constructors --------------------------------------------------------------
def delta(k: int) -> LatticeMeasure:
    """Point mass at ``k``."""
    return LatticeMeasure(int(k), np.array([1.0]))


def from_pairs(pairs: dict[int, float], mass_defect: float = 0.0) -> LatticeMeasure:
    """Build a measure from a sparse ``{index: weight}`` mapping."""
    if not pairs:
        raise ValueError("empty weight mapping")
    lo = min(pairs)
    hi = max(pairs)
    w = np.zeros(hi - lo + 1, dtype=float)
    for k, v in pairs.items():
        w[k - lo] += float(v)
    return LatticeMeasure(lo, w, mass_defect)


# -- algebra ---------------------------------------------------------------------
def l1_distance(a: LatticeMeasure, b: LatticeMeasure) -> float:
    """Sum of |a(k) - b(k)| over the union of the two windows."""
    lo = min(a.min_index, b.min_index)
    hi = max(a.max_index, b.max_index)
    wa = np.zeros(hi - lo + 1)
    wb = np.zeros(hi - lo + 1)
    wa[a.min_index - lo : a.min_index - lo + len(a.weights)] = a.weights
    wb[b.min_index - lo : b.min_index - lo + len(b.weights)] = b.weights
    return float(np.sum(np.abs(wa - wb)))


def convolve(
    a: LatticeMeasure,
    b: LatticeMeasure,
    support_cap: int = DEFAULT_SUPPORT_CAP,
) -> LatticeMeasure:
    """Convolution (a*b)(k) = sum_j a(k-j) b(j).

    The output window is the Minkowski sum of the input windows.  Exceeding
    ``support_cap`` raises :class:`SupportCapError` instead of truncating.
    """
    out_len = len(a.weights) + len(b.weights) - 1
    if out_len > support_cap:
        raise SupportCapError(
            f"convolution support {out_len} exceeds cap {support_cap}"
        )
    sparse, dense = (a, b) if a.nnz <= b.nnz else (b, a)
    if sparse.nnz <= _SPARSE_NNZ_CUTOFF:
        out = np.zeros(out_len, dtype=float)
        base = sparse.min_index
        for i in np.flatnonzero(sparse.weights):
            out[i : i + len(dense.weights)] += sparse.weights[i] * dense.weights
    else:
        out = np.convolve(a.weights, b.weights)
    # Combined defect: mass reaching the output is (1-da)(1-db).
    defect = a.mass_defect + b.mass_defect - a.mass_defect * b.mass_defect
    return LatticeMeasure(a.min_index + b.min_index, out, defect)


def prune(mu: LatticeMeasure, eps: float) -> LatticeMeasure:
    """Drop weights strictly below ``eps``; removed mass joins the defect."""
    if eps <= 0:
        return mu
    keep = mu.weights >= eps
    if not np.any(keep):
        raise ValueError("pruning removed all mass")
    removed = float(np.sum(mu.weights[~keep]))
    if removed == 0.0:
        return mu
    w = np.where(keep, mu.weights, 0.0)
    return LatticeMeasure(mu.min_index, w, mu.mass_defect + removed)


def expectation(mu: LatticeMeasure) -> float:
    """First raw moment sum_k k mu(k)."""
    ks = np.arange(mu.min_index, mu.max_index + 1, dtype=float)
    return float(np.dot(ks, mu.weights))


def moment(mu: LatticeMeasure, p: float) -> float:
    """Absolute p-th moment sum_k |k|^p mu(k), p > 0."""
    if p <= 0:
        raise ValueError("moment order must be positive")
    ks = np.abs(np.arange(mu.min_index, mu.max_index + 1, dtype=float))
    return float(np.dot(ks**p, mu.weights))


def variance(mu: LatticeMeasure) -> float:
    e = expectation(mu)
    return moment(mu, 2.0) - e * e


def tv_shift_distance(mu: LatticeMeasure) -> float:
    """l1 distance between mu and its unit shift: sum_k |mu(k) - mu(k-1)|."""
    padded = np.concatenate(([0.0], mu.weights, [0.0]))
    return float(np.sum(np.abs(np.diff(padded))))


class CosetMass(NamedTuple):
    rho: float
    beta: int
    residue: int


def coset_mass_sup(nu: LatticeMeasure) -> CosetMass:
    """Largest mass the measure puts on a proper coset ``beta*Z + r``.

    Only beta >= 2 counts: beta in {0, +-1} covers the whole group.  Strides
    exceeding the support diameter isolate single atoms, so the search runs
    beta over 2..diameter and then compares against the largest atom.
    """
    ks = nu.support
    ws = nu.weights[np.flatnonzero(nu.weights)]
    if len(ks) == 1:
        # Whole mass in the one-point coset {k}.
        return CosetMass(1.0, 0, int(ks[0]))
    diam = int(ks[-1] - ks[0])
    atom = int(np.argmax(ws))
    best = CosetMass(float(ws[atom]), diam + 1, int(ks[atom] % (diam + 1)))
    for beta in range(2, diam + 1):
        masses = np.bincount(ks % beta, weights=ws, minlength=beta)
        r = int(np.argmax(masses))
        if masses[r] > best.rho:
            best = CosetMass(float(masses[r]), beta, r)
    return best


def is_strictly_aperiodic(nu: LatticeMeasure) -> bool:
    """True iff the support lies in no coset ``r + d*Z`` with d >= 2.

    Equivalent to the pairwise support differences having gcd 1.  A point
    mass is not strictly aperiodic (it sits inside every coset).
    """
    ks = nu.support
    if len(ks) < 2:
        return False
    g = int(np.gcd.reduce(ks - ks[0]))
    return g == 1


# -- measure sequences -----------------------------------------------------------
class Decomposition(NamedTuple):
    """Atom-plus-remainder split ``a * delta(site) + (1 - a) * remainder``."""

    atom_weight: float
    atom_site: int
    remainder: LatticeMeasure


@dataclass(frozen=True)
class SequenceSpec:
    """Rule producing the n-th factor measure of a convolution product.

    ``measure_at`` is 1-based.  ``decomposition_at`` optionally exposes an
    atom-plus-remainder split of each factor; sweep-out diagnostics need it.
    ``length_hint`` is advisory (how far the rule is meant to be driven).
    """

    name: str
    measure_at: Callable[[int], LatticeMeasure]
    decomposition_at: Optional[Callable[[int], Decomposition]] = None
    length_hint: int = 0
    iid_measure: Optional[LatticeMeasure] = None

    @classmethod
    def iid(
        cls,
        measure: LatticeMeasure,
        name: str = "iid",
        length_hint: int = 0,
        decomposition: Optional[Decomposition] = None,
    ) -> "SequenceSpec":
        decomp = (lambda n: decomposition) if decomposition is not None else None
        return cls(
            name=name,
            measure_at=lambda n: measure,
            decomposition_at=decomp,
            length_hint=length_hint,
            iid_measure=measure,
        )

    @classmethod
    def from_measures(
        cls,
        measures: Sequence[LatticeMeasure],
        name: str = "list",
        decompositions: Optional[Sequence[Decomposition]] = None,
    ) -> "SequenceSpec":
        ms = list(measures)
        decomp = None
        if decompositions is not None:
            ds = list(decompositions)
            if len(ds) != len(ms):
                raise ValueError("one decomposition per measure required")
            decomp = lambda n: ds[n - 1]
        return cls(
            name=name,
            measure_at=lambda n: ms[n - 1],
            decomposition_at=decomp,
            length_hint=len(ms),
        )

    @property
    def is_iid(self) -> bool:
        return self.iid_measure is not None

    @property
    def has_decomposition(self) -> bool:
        return self.decomposition_at is not None

    def measures(self, N: int) -> list[LatticeMeasure]:
        return [self.measure_at(n) for n in range(1, N + 1)]

    def decomposition(self, n: int) -> Decomposition:
        if self.decomposition_at is None:
            raise ValueError(f"sequence {self.name!r} carries no decomposition")
        return self.decomposition_at(n)

    def decomposition_error(self, n: int) -> float:
        """l1 gap between the factor and its reconstructed decomposition."""
        a, site, gamma = self.decomposition(n)
        scaled = {site: a}
        for k, w in zip(gamma.support, gamma.weights[np.flatnonzero(gamma.weights)]):
            scaled[int(k)] = scaled.get(int(k), 0.0) + (1.0 - a) * float(w)
        return l1_distance(self.measure_at(n), from_pairs(scaled))


def convolve_prefixes(
    spec: SequenceSpec,
    N: int,
    prune_eps: float = 0.0,
    support_cap: int = DEFAULT_SUPPORT_CAP,
) -> list[LatticeMeasure]:
    """Running products nu_1, nu_1*nu_2, ..., nu_1*...*nu_N.

    After each convolution, weights below ``prune_eps`` are removed and
    accumulated into the mass defect (never renormalized away); the first
    prefix is nu_1 itself, untouched.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0.0 <= prune_eps <= 1e-8:
        raise ValueError("prune_eps must lie in [0, 1e-8]")
    out: list[LatticeMeasure] = []
    current = spec.measure_at(1)
    out.append(current)
    for n in range(2, N + 1):
        current = prune(convolve(current, spec.measure_at(n), support_cap), prune_eps)
        out.append(current)
    return out
