import numpy as np
import pytest

from convergence_lab import (
    DynSystem,
    SequenceSpec,
    SupportCapError,
    TestFunction,
    convolve_prefixes,
    delta,
    dissipativity_trace,
    example_decomposition,
    example_measure,
    expectation,
    fourier_floor_scan,
    from_pairs,
    geometric_family,
    inverse_square_family,
    l1_distance,
    moment,
    scan_points,
    sweepout_simulation,
    weighted_average_all,
)

INV_SQ = inverse_square_family(1.0)


class TestExampleMeasure:
    def test_b_one_atoms(self):
        nu = example_measure(1)
        assert nu.weight(1) == pytest.approx(3 / 5)
        assert nu.weight(-1) == pytest.approx(1 / 5)
        assert nu.weight(-2) == pytest.approx(1 / 5)
        assert expectation(nu) == pytest.approx(0.0, abs=1e-15)
        assert moment(nu, 2.0) == pytest.approx(8 / 5, abs=1e-15)

    def test_b_two_moments(self):
        nu = example_measure(2)
        assert nu.weight(1) == pytest.approx(5 / 7)
        assert moment(nu, 2.0) == pytest.approx(18 / 7, abs=1e-14)

    def test_closed_forms_across_b(self):
        for b in range(1, 101):
            nu = example_measure(b)
            assert abs(nu.total_mass - 1.0) <= 1e-12
            assert abs(expectation(nu)) <= 1e-12
            formula = (2 * b * b + 4 * b + 2) / (3 + 2 * b)
            assert abs(moment(nu, 2.0) - formula) <= 1e-12

    def test_decomposition_reconstructs(self):
        for b in (1, 2, 7, 50, 100):
            a, site, gamma = example_decomposition(b)
            rebuilt = {site: a}
            for k in gamma.support:
                rebuilt[int(k)] = rebuilt.get(int(k), 0.0) + (1 - a) * gamma.weight(int(k))
            assert l1_distance(example_measure(b), from_pairs(rebuilt)) <= 1e-12

    def test_rejects_bad_b(self):
        with pytest.raises(ValueError):
            example_measure(0)


class TestFamilies:
    def test_inverse_square_b_values_are_exact_squares(self):
        for n in range(1, 30):
            assert INV_SQ.b_at(n) == n * n

    def test_geometric_b_values(self):
        fam = geometric_family(0.5)
        for n in range(1, 12):
            assert fam.b_at(n) == 2**n

    def test_family_rejects_rates_at_or_above_one(self):
        from convergence_lab import SweepoutFamily

        with pytest.raises(ValueError):
            SweepoutFamily("bad", lambda n: 1.0).measure_at(1)

    def test_spec_carries_decomposition(self):
        spec = INV_SQ.to_spec()
        assert spec.has_decomposition
        for n in (1, 5, 20):
            assert spec.decomposition_error(n) <= 1e-12


class TestDissipativityTrace:
    def test_pure_translation_leaves_window(self):
        spec = SequenceSpec.iid(delta(1))
        rows = dissipativity_trace(spec, 5, 8)
        assert [r.window_max for r in rows[:5]] == [1.0] * 5
        assert [r.window_max for r in rows[5:]] == [0.0, 0.0, 0.0]

    def test_lazy_point_mass_is_not_dissipative(self):
        spec = SequenceSpec.iid(delta(0))
        rows = dissipativity_trace(spec, 3, 6)
        assert all(r.window_max == 1.0 for r in rows)

    def test_family_disperses_below_two_percent(self):
        # frozen oracle horizon: window max 0.01802 at N=60, K=50
        rows = dissipativity_trace(INV_SQ.to_spec(), 50, 60)
        assert rows[-1].window_max < 0.02

    def test_family_trace_is_nonincreasing(self):
        rows = dissipativity_trace(INV_SQ.to_spec(), 50, 60)
        vals = [r.window_max for r in rows]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


class TestScanPoints:
    def test_low_denominator_rationals(self):
        pts = scan_points(4)
        for expected in (-0.5, -0.25, 0.0, 1 / 3, 0.25):
            assert np.any(np.isclose(pts, expected))
        assert np.all((pts >= -0.5) & (pts < 0.5))

    def test_uniform_augmentation(self):
        pts = scan_points(1, uniform=8)
        assert len(pts) == 8


class TestFourierFloorScan:
    def test_family_floor_dominates_product(self):
        spec = INV_SQ.to_spec()
        scan = fourier_floor_scan(spec, scan_points(8), 100)
        assert not scan.vacuous
        # frozen oracle: prod_{l<=100} (2 a_l - 1)
        assert scan.product_bound == pytest.approx(0.060001652604285804, rel=1e-12)
        assert scan.contract_margin >= -1e-10

    def test_trivial_character_row(self):
        spec = INV_SQ.to_spec()
        scan = fourier_floor_scan(spec, [0.0], 20)
        assert scan.rows[0].floor_min == pytest.approx(1.0, abs=1e-12)

    def test_window_is_configurable(self):
        spec = INV_SQ.to_spec()
        wide = fourier_floor_scan(spec, [0.25], 20, window_start=1)
        tail = fourier_floor_scan(spec, [0.25], 20)
        assert tail.window_start == 10
        assert wide.rows[0].floor_min <= tail.rows[0].floor_min + 1e-15

    def test_smoothing_family_floor_collapses(self):
        # |mu_n_hat(t)| = cos^{2n}(pi t) -> 0 off the trivial character
        spec = SequenceSpec.iid(from_pairs({-1: 0.25, 0: 0.5, 1: 0.25}))
        scan = fourier_floor_scan(spec, [0.125, 0.25], 100)
        assert scan.vacuous
        assert scan.product_bound == 0.0
        for row in scan.rows:
            assert row.floor_min < 1e-3
        assert scan.contract_margin >= -1e-10

    def test_rejects_points_outside_window(self):
        with pytest.raises(ValueError):
            fourier_floor_scan(INV_SQ.to_spec(), [0.75], 10)

    def test_half_weight_atom_reports_vacuous_bound(self):
        from convergence_lab import Decomposition

        gamma = from_pairs({-1: 0.5, 0: 0.5})
        nu = from_pairs({1: 0.5, -1: 0.25, 0: 0.25})
        spec = SequenceSpec.iid(nu, name="half_atom", decomposition=Decomposition(0.5, 1, gamma))
        scan = fourier_floor_scan(spec, [0.25], 10)
        assert scan.vacuous
        assert scan.product_bound <= 0.0
        assert scan.contract_margin >= -1e-10

    def test_partial_products_converge_iff_defects_summable(self):
        # compare partial products at N and N/2 for the summable rate
        a = np.array([(1 + 2 * n * n) / (3 + 2 * n * n) for n in range(1, 10001)])
        partial = np.cumprod(2 * a - 1)
        assert abs(partial[-1] / partial[4999] - 1.0) < 1e-3
        # harmonic (non-summable) defect: the same comparison fails wide
        a_bad = np.array([1 - 1 / (4 * n) for n in range(1, 10001)])
        partial_bad = np.cumprod(2 * a_bad - 1)
        assert abs(partial_bad[-1] / partial_bad[4999] - 1.0) > 0.1


class TestSweepoutSimulation:
    def test_whole_space(self):
        sim = sweepout_simulation(DynSystem.cyclic(64), INV_SQ.to_spec(), 1.0, 5)
        np.testing.assert_allclose(sim.sup_trace, 1.0, atol=1e-12)
        np.testing.assert_allclose(sim.inf_trace, 1.0, atol=1e-12)
        assert sim.frac_high == 1.0
        assert sim.frac_low == 0.0

    def test_empty_set(self):
        sim = sweepout_simulation(DynSystem.cyclic(64), INV_SQ.to_spec(), 0.0, 5)
        assert np.all(sim.sup_trace == 0.0)
        assert sim.frac_high == 0.0
        assert sim.frac_low == 1.0

    def test_cyclic_matches_direct_averages(self):
        q, N = 128, 6
        sysq = DynSystem.cyclic(q)
        spec = INV_SQ.to_spec()
        sim = sweepout_simulation(sysq, spec, 0.25, N)
        block = TestFunction.indicator_block(0, int(round(0.25 * q)))
        mus = convolve_prefixes(spec, N)
        direct = np.vstack([weighted_average_all(sysq, mu, block) for mu in mus])
        np.testing.assert_allclose(sim.sup_trace, direct.max(axis=0), atol=1e-12)
        np.testing.assert_allclose(sim.inf_trace, direct.min(axis=0), atol=1e-12)

    def test_rotation_matches_direct_averages(self):
        sysr = DynSystem.rotation(samples=64, seed=4)
        spec = INV_SQ.to_spec()
        N = 5
        sim = sweepout_simulation(sysr, spec, 0.3, N)
        interval = TestFunction.indicator_interval(0.0, 0.3)
        mus = convolve_prefixes(spec, N)
        direct = np.vstack([weighted_average_all(sysr, mu, interval) for mu in mus])
        np.testing.assert_allclose(sim.sup_trace, direct.max(axis=0), atol=1e-10)
        np.testing.assert_allclose(sim.inf_trace, direct.min(axis=0), atol=1e-10)

    def test_slow_rate_caps_running_max_at_first_atom(self):
        # frozen oracle: with rates 1 - 1/n^2 the largest running max over
        # n <= 60 is exactly the first factor's atom weight 3/5, so no state
        # comes near the high threshold
        sim = sweepout_simulation(
            DynSystem.rotation(samples=1024, seed=1), INV_SQ.to_spec(), 0.05, 60
        )
        assert sim.frac_high == 0.0
        assert float(sim.sup_trace.max()) == pytest.approx(0.6, abs=1e-3)
        assert sim.frac_low == 1.0

    def test_fast_rate_shows_full_signature(self):
        # rates 1 - 1/(100 n^2): the atom product stays above 0.98 and the
        # orbit of the atom visits the target interval for every state
        spec = inverse_square_family(100.0).to_spec()
        sim = sweepout_simulation(
            DynSystem.rotation(samples=1024, seed=1), spec, 0.05, 40, prune_eps=1e-8
        )
        assert sim.frac_high == 1.0
        assert sim.frac_low == 1.0

    def test_support_cap_surfaces(self):
        spec = geometric_family(0.5).to_spec()
        with pytest.raises(SupportCapError):
            sweepout_simulation(DynSystem.cyclic(64), spec, 0.1, 25)
