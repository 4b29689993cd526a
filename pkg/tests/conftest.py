import numpy as np
import pytest

from convergence_lab import LatticeMeasure


def random_measure(
    rng: np.random.Generator,
    max_span: int = 20,
    min_weight: float = 0.05,
    allow_offset: bool = True,
) -> LatticeMeasure:
    """Random probability measure with a bounded window and no tiny atoms.

    Weights are drawn away from zero so spectral-gap certificates on the
    corpus are well separated from the periodic boundary cases.
    """
    span = int(rng.integers(1, max_span + 1))
    w = min_weight + rng.random(span)
    # randomly knock out interior entries to vary the support pattern
    if span > 2:
        mask = rng.random(span) < 0.25
        mask[0] = mask[-1] = False
        w[mask] = 0.0
    w /= w.sum()
    offset = int(rng.integers(-max_span, max_span + 1)) if allow_offset else 0
    return LatticeMeasure(offset, w)


def random_symmetric_measure(rng: np.random.Generator, max_half: int = 10) -> LatticeMeasure:
    """Random measure symmetric about 0, hence with exactly zero expectation."""
    half = int(rng.integers(1, max_half + 1))
    right = rng.random(half)
    center = rng.random()
    w = np.concatenate([right[::-1], [center], right])
    w /= w.sum()
    return LatticeMeasure(-half, w)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260810)
