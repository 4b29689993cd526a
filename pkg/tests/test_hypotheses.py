import io
import math

import numpy as np
import pytest

from convergence_lab import (
    Decomposition,
    SequenceSpec,
    check_convergence_hypotheses,
    check_sweepout_hypotheses,
    delta,
    example_measure,
    from_pairs,
    geometric_family,
    inverse_square_family,
    moment,
    second_derivative_majorant_ratio,
    second_moment_floor,
)

CENTERED_TRIPLE = from_pairs({-1: 0.25, 0: 0.5, 1: 0.25})
IID_TRIPLE = SequenceSpec.iid(CENTERED_TRIPLE, name="iid_triple")


class TestConvergenceReport:
    def test_centered_triple_passes_all(self):
        report = check_convergence_hypotheses(IID_TRIPLE, 100)
        assert report.condition("zero_expectation").ok
        assert report.condition("zero_expectation").witness == 0.0
        assert report.condition("moment_growth").ok
        assert report.condition("moment_growth").witness == pytest.approx(0.5, abs=1e-12)
        assert report.condition("gaussian_decay").ok
        assert report.condition("gaussian_decay").witness == pytest.approx(math.pi**2, abs=0.2)
        assert report.condition("strict_aperiodicity").ok
        assert report.condition("coset_rho").ok
        assert report.condition("coset_rho").witness == pytest.approx(0.5, abs=1e-12)
        assert report.overall_ok

    def test_fair_coin_fails_zero_expectation(self):
        spec = SequenceSpec.iid(from_pairs({0: 0.5, 1: 0.5}), name="fair_coin")
        report = check_convergence_hypotheses(spec, 12)
        cond = report.condition("zero_expectation")
        assert not cond.ok
        assert cond.witness == pytest.approx(0.5, abs=1e-12)
        assert not report.overall_ok

    def test_fast_atom_family_fails_moment_growth(self):
        # second moments grow like the inverse of the defect rate; the d2
        # quadrature hits its (reduced) depth cap on these wide supports,
        # which the report records without aborting
        spec = geometric_family(0.5).to_spec()
        report = check_convergence_hypotheses(spec, 10, d2_max_depth=12)
        assert report.condition("zero_expectation").ok
        assert not report.condition("moment_growth").ok
        assert not report.overall_ok
        assert report.traces["d2_depth_cap_hits"] > 0

    def test_rows_have_pinned_header(self):
        report = check_convergence_hypotheses(IID_TRIPLE, 4)
        assert report.row_header == (
            "n", "E", "m1", "m2", "phi_over_n", "decay_C", "rho", "d2_integral", "shift_tv",
        )
        assert len(report.rows) == 4
        buf = io.StringIO()
        report.to_csv(buf)
        assert buf.getvalue().splitlines()[0] == ",".join(report.row_header)

    def test_failures_persist_at_larger_horizon(self):
        spec = geometric_family(0.5).to_spec()
        small = check_convergence_hypotheses(spec, 8, d2_max_depth=12)
        large = check_convergence_hypotheses(spec, 12, d2_max_depth=12)
        for cond in small.conditions:
            if not cond.ok:
                assert not large.condition(cond.name).ok

    def test_deterministic(self):
        a = check_convergence_hypotheses(IID_TRIPLE, 10)
        b = check_convergence_hypotheses(IID_TRIPLE, 10)
        assert a.rows == b.rows
        assert a.conditions == b.conditions

    def test_summary_names_failures(self):
        spec = SequenceSpec.iid(from_pairs({0: 0.5, 1: 0.5}), name="fair_coin")
        text = check_convergence_hypotheses(spec, 6).summary_text()
        assert "[FAIL] zero_expectation" in text

    def test_rejects_tiny_horizon(self):
        with pytest.raises(ValueError):
            check_convergence_hypotheses(IID_TRIPLE, 1)


class TestSweepoutReport:
    def test_inverse_square_family(self):
        spec = inverse_square_family(1.0).to_spec()
        report = check_sweepout_hypotheses(spec, 100)
        cond = report.condition("defect_summability")
        assert cond.ok  # last-half tail below 1e-2
        assert report.condition("atom_sites_nonzero").ok
        assert report.condition("atom_sites_nonzero").witness == 1.0
        drift = report.condition("site_sum_drift")
        assert drift.ok
        assert drift.witness == 100.0
        prod = report.condition("product_lower_bound")
        assert prod.ok
        # oracle value of prod_{l<=100} (2 a_l - 1) with a_l = (1+2l^2)/(3+2l^2)
        assert prod.witness == pytest.approx(0.060001652604285804, rel=1e-12)
        assert report.overall_ok

    def test_half_atom_weight_degenerates(self):
        gamma = from_pairs({-1: 0.5, 0: 0.5})
        nu = from_pairs({1: 0.5, -1: 0.25, 0: 0.25})
        spec = SequenceSpec.iid(
            nu, name="half_atom", decomposition=Decomposition(0.5, 1, gamma)
        )
        report = check_sweepout_hypotheses(spec, 40)
        prod = report.condition("product_lower_bound")
        assert not prod.ok
        assert prod.witness == 0.0
        assert not report.condition("defect_summability").ok

    def test_alternating_sites_fail_drift(self):
        measures = [delta(1) if n % 2 else delta(-1) for n in range(1, 41)]
        decomps = [Decomposition(1.0, 1 if n % 2 else -1, delta(0)) for n in range(1, 41)]
        spec = SequenceSpec.from_measures(measures, name="alternating", decompositions=decomps)
        report = check_sweepout_hypotheses(spec, 40)
        assert not report.condition("site_sum_drift").ok

    def test_requires_decomposition(self):
        with pytest.raises(ValueError):
            check_sweepout_hypotheses(IID_TRIPLE, 10)

    def test_product_bound_holds_on_grid(self):
        # |mu_n_hat(t)| >= prod (2 a_l - 1) pointwise when all a_l > 1/2
        from convergence_lab import prefix_fourier_profiles

        spec = inverse_square_family(1.0).to_spec()
        N = 30
        report = check_sweepout_hypotheses(spec, N)
        bound = report.condition("product_lower_bound").witness
        for prof in prefix_fourier_profiles(spec, N, 256):
            assert np.all(np.abs(prof.values) >= bound - 1e-10)


class TestSecondMomentFloor:
    def test_formula_instantiation(self):
        assert second_moment_floor(0.5, 1.0, 0.5) == pytest.approx(1.0, abs=1e-15)

    def test_monotone_in_atom_weight(self):
        values = [second_moment_floor(a, 1.0, 0.5) for a in (0.5, 0.9, 0.99, 0.999)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_family_moments_dominate_floor(self):
        # measured m2 = (2b^2+4b+2)/(3+2b) exceeds a c^2/(1-a) with the
        # family's own atom weight as both the weight and its floor d
        for b in range(1, 101):
            nu = example_measure(b)
            a = (1 + 2 * b) / (3 + 2 * b)
            floor = second_moment_floor(a, 1.0, a)
            assert moment(nu, 2.0) >= floor - 1e-12

    def test_domain_validation(self):
        with pytest.raises(ValueError):
            second_moment_floor(1.0, 1.0, 0.5)
        with pytest.raises(ValueError):
            second_moment_floor(0.5, 0.5, 0.5)
        with pytest.raises(ValueError):
            second_moment_floor(0.5, 1.0, 0.0)


class TestMajorantChain:
    def test_holds_for_centered_triple(self):
        ratio = second_derivative_majorant_ratio(IID_TRIPLE, 30, 1024)
        assert ratio <= 1.0 + 1e-6

    def test_requires_positive_decay(self):
        periodic = SequenceSpec.iid(from_pairs({-1: 0.5, 1: 0.5}))
        with pytest.raises(ValueError):
            second_derivative_majorant_ratio(periodic, 5, 256)
