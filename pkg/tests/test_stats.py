import math

import numpy as np
import pytest

import oracles as orc
from bbmsim import (
    BETA_CRITICAL,
    BetaGrid,
    OffspringDistribution,
    Realization,
    RngStream,
    SimConfig,
    Snapshot,
    StatisticSeries,
    additive_martingale,
    centering,
    critical_derivative_martingale,
    derivative_martingale,
    extremal_count,
    functional_martingale,
    growth_statistic,
    martingale_rate,
    max_displacement,
    overlap_cdf,
    overlap_mass,
    overlap_mass_pairwise,
    resolve_function,
    simulate,
)

BINARY = OffspringDistribution.binary()


def snap_of(positions, t):
    positions = np.asarray(positions, dtype=float)
    return Snapshot(time=t, indices=np.arange(len(positions)), positions=positions)


EMPTY = snap_of([], 2.0)


@pytest.fixture(scope="module")
def real3():
    return simulate(
        SimConfig(horizon=3.0, snapshot_times=(1.0, 3.0), offspring=BINARY),
        RngStream(210, 0),
    )


# ---------------------------------------------------------------------------
# additive / derivative martingales
# ---------------------------------------------------------------------------


class TestAdditiveMartingale:
    def test_time_zero_is_one(self):
        assert additive_martingale(snap_of([0.0], 0.0), 1.3) == 1.0

    def test_two_symmetric_particles_beta_zero(self):
        val = additive_martingale(snap_of([1.0, -1.0], 1.0), 0.0)
        assert val == 2.0 * math.exp(-1.0)

    def test_beta_zero_counts_particles(self, real3):
        for t in (1.0, 3.0):
            snap = real3.alive_at(t)
            assert additive_martingale(snap, 0.0) == snap.n * math.exp(-t)

    def test_matches_direct_summation(self, real3):
        snap = real3.alive_at(3.0)
        for beta in (0.3, 1.0, 2.0):
            ref = orc.additive_martingale_reference(3.0, snap.positions, beta)
            assert math.isclose(additive_martingale(snap, beta), ref, rel_tol=1e-13)

    def test_empty_snapshot_is_zero(self):
        assert additive_martingale(EMPTY, 0.7) == 0.0
        assert derivative_martingale(EMPTY, 0.7) == 0.0
        assert critical_derivative_martingale(EMPTY) == 0.0

    def test_rate(self):
        assert martingale_rate(0.0) == 1.0
        assert martingale_rate(BETA_CRITICAL) == 2.0


class TestDerivativeMartingale:
    def test_finite_difference_of_additive(self, real3):
        # Z is the beta-derivative of W: central difference, step 1e-5
        snap = real3.alive_at(3.0)
        h = 1e-5
        for beta in (0.3, 1.0, BETA_CRITICAL):
            fd = (
                additive_martingale(snap, beta + h)
                - additive_martingale(snap, beta - h)
            ) / (2.0 * h)
            z = derivative_martingale(snap, beta)
            assert math.isclose(z, fd, rel_tol=1e-6)

    def test_matches_direct_summation(self, real3):
        snap = real3.alive_at(3.0)
        ref = orc.derivative_martingale_reference(3.0, snap.positions, 1.0)
        assert math.isclose(derivative_martingale(snap, 1.0), ref, rel_tol=1e-12)

    def test_critical_orientation(self, real3):
        snap = real3.alive_at(3.0)
        assert critical_derivative_martingale(snap) == -derivative_martingale(
            snap, BETA_CRITICAL
        )


# ---------------------------------------------------------------------------
# functional martingale and growth statistic
# ---------------------------------------------------------------------------


class TestFunctionalForms:
    def test_constant_function_recovers_additive(self, real3):
        one = resolve_function("one")
        for t in (1.0, 3.0):
            snap = real3.alive_at(t)
            for beta in (0.0, 0.5, 1.2):
                assert abs(
                    functional_martingale(snap, beta, one)
                    - additive_martingale(snap, beta)
                ) <= 1e-12

    def test_functional_standardizes_argument(self):
        # single particle at x: f sees (x - beta t)/sqrt(t)
        snap = snap_of([3.0], 4.0)
        seen = []
        functional_martingale(snap, 0.5, lambda z: (seen.append(np.copy(z)), np.ones_like(z))[1])
        assert np.allclose(seen[0], (3.0 - 0.5 * 4.0) / 2.0)

    def test_growth_statistic_by_hand(self, real3):
        snap = real3.alive_at(3.0)
        beta, f = 0.5, resolve_function("indicator:-1:1")
        count = np.sum(np.abs(snap.positions - beta * 3.0) <= 1.0)
        expect = math.sqrt(3.0) * math.exp(-(1.0 - 0.125) * 3.0) * count
        assert math.isclose(growth_statistic(snap, beta, f), expect, rel_tol=1e-12)

    def test_time_zero_rejected(self):
        snap = snap_of([0.0], 0.0)
        with pytest.raises(ValueError):
            functional_martingale(snap, 0.5, resolve_function("one"))
        with pytest.raises(ValueError):
            growth_statistic(snap, 0.5, resolve_function("one"))

    def test_empty_snapshots_are_zero(self):
        assert functional_martingale(EMPTY, 0.5, resolve_function("one")) == 0.0
        assert growth_statistic(EMPTY, 0.5, resolve_function("one")) == 0.0


# ---------------------------------------------------------------------------
# extremes
# ---------------------------------------------------------------------------


class TestExtremes:
    def test_centering_values(self):
        assert centering(10.0) == orc.CENTERING_10
        assert centering(math.exp(2.0)) == orc.CENTERING_E2
        with pytest.raises(ValueError):
            centering(0.0)

    def test_max_displacement(self, real3):
        snap = real3.alive_at(3.0)
        assert max_displacement(snap) == snap.positions.max()
        with pytest.raises(ValueError):
            max_displacement(EMPTY)

    def test_extremal_count_brute(self, real3):
        snap = real3.alive_at(3.0)
        for x in (-5.0, 0.0, 2.0):
            assert extremal_count(snap, x) == orc.extremal_count_reference(
                3.0, snap.positions, x
            )
        assert extremal_count(EMPTY, 0.0) == 0

    def test_max_bounds_critical_martingale(self):
        # e^{sqrt2 M(t) - 2t} <= W_t(sqrt2): one positive term of the sum
        for k in range(5):
            real = simulate(
                SimConfig(horizon=2.0, snapshot_times=(2.0,), offspring=BINARY),
                RngStream(211, k),
            )
            snap = real.alive_at(2.0)
            lhs = math.exp(BETA_CRITICAL * max_displacement(snap) - 2.0 * 2.0)
            assert lhs <= additive_martingale(snap, BETA_CRITICAL) * (1.0 + 1e-12)


# ---------------------------------------------------------------------------
# overlap
# ---------------------------------------------------------------------------


def hand_tree():
    """Five-particle tree: root splits at 1.0; child 1 splits at 1.5.

    Leaves at t=2: particle 2 (root's second child) and particles 3, 4.
    Snapshots requested at 0.5, 1.0, 2.0.
    """
    cfg = SimConfig(horizon=2.0, snapshot_times=(0.5, 1.0, 2.0), offspring=BINARY)
    inf = math.inf
    return Realization(
        config=cfg,
        n_particles=5,
        snapshots={
            0.5: Snapshot(time=0.5, indices=np.array([0]), positions=np.array([0.1])),
            1.0: Snapshot(time=1.0, indices=np.array([1, 2]), positions=np.array([0.2, 0.2])),
            2.0: Snapshot(
                time=2.0, indices=np.array([2, 3, 4]), positions=np.array([-0.3, 1.0, 0.1])
            ),
        },
        extinct_at=None,
        truncated=False,
        parent=np.array([-1, 0, 0, 1, 1]),
        rank=np.array([0, 1, 2, 1, 2]),
        birth_time=np.array([0.0, 1.0, 1.0, 1.5, 1.5]),
        death_time=np.array([1.0, 1.5, inf, inf, inf]),
        birth_position=np.array([0.0, 0.2, 0.2, 0.5, 0.5]),
        death_position=np.array([0.2, 0.5, -0.3, 1.0, 0.1]),
        child_count=np.array([2, 2, -1, -1, -1]),
    )


class TestOverlap:
    def test_three_leaf_hand_value(self):
        real = hand_tree()
        for beta in (0.0, 0.5, 1.0):
            w = [math.exp(beta * x) for x in (-0.3, 1.0, 0.1)]
            # ancestor alive at a*t = 1.0 groups leaves {2} and {3, 4}
            expect = orc.overlap_from_groups([[w[0]], [w[1], w[2]]])
            assert math.isclose(overlap_mass(real, beta, 2.0, 0.5), expect, rel_tol=1e-14)

    def test_single_group_is_one(self):
        real = hand_tree()
        # a*t = 0.5: only the root is alive, every pair shares it
        assert overlap_mass(real, 0.7, 2.0, 0.25) == 1.0

    def test_pairwise_route_agrees_by_hand(self):
        real = hand_tree()
        assert math.isclose(
            overlap_mass_pairwise(real, 0.5, 2.0, 0.5),
            overlap_mass(real, 0.5, 2.0, 0.5),
            rel_tol=1e-12,
        )

    def test_pairwise_route_agrees_on_simulated_trees(self):
        a = 0.4
        at = a * 3.0  # the float product itself must be the requested time
        for k in range(8):
            real = simulate(
                SimConfig(horizon=3.0, snapshot_times=(at, 3.0), offspring=BINARY),
                RngStream(212, k),
            )
            for beta in (0.0, 0.8):
                assert math.isclose(
                    overlap_mass(real, beta, 3.0, a),
                    overlap_mass_pairwise(real, beta, 3.0, a),
                    rel_tol=1e-10,
                )

    def test_invalid_cut_rejected(self):
        real = hand_tree()
        for a in (0.0, 1.0, -0.3, 2.0):
            with pytest.raises(ValueError):
                overlap_mass(real, 0.5, 2.0, a)

    def test_unrequested_cut_time_rejected(self):
        real = hand_tree()
        with pytest.raises(LookupError):
            overlap_mass(real, 0.5, 2.0, 0.35)  # a*t = 0.7 was never requested

    def test_extinct_realization_gives_nan(self):
        cfg = SimConfig(
            horizon=2.0,
            snapshot_times=(0.5, 1.0, 2.0),
            offspring=OffspringDistribution({0: 1 / 3, 3: 2 / 3}),
        )
        real = None
        for k in range(100):
            cand = simulate(cfg, RngStream(213, k))
            if cand.extinct_at is not None and cand.extinct_at < 2.0:
                real = cand
                break
        assert real is not None
        assert math.isnan(overlap_mass(real, 0.5, 2.0, 0.5))

    def test_cdf_monotone_and_consistent(self):
        real = hand_tree()
        grid = (0.25, 0.5)
        vals = overlap_cdf(real, 0.5, 2.0, grid)
        assert np.all(np.diff(vals) <= 0.0)  # mass of [a,1] shrinks as a grows
        assert vals[0] == overlap_mass(real, 0.5, 2.0, 0.25)
        assert vals[1] == overlap_mass(real, 0.5, 2.0, 0.5)

    def test_cdf_rejects_unsorted_grid(self):
        real = hand_tree()
        with pytest.raises(ValueError):
            overlap_cdf(real, 0.5, 2.0, (0.5, 0.25))


# ---------------------------------------------------------------------------
# function registry and series container
# ---------------------------------------------------------------------------


class TestResolveFunction:
    def test_one(self):
        f = resolve_function("one")
        assert np.array_equal(f(np.array([-3.0, 9.0])), [1.0, 1.0])

    def test_indicator_inclusive_bounds(self):
        f = resolve_function("indicator:-1:1")
        assert np.array_equal(f(np.array([-1.0, 0.0, 1.0, 1.0001])), [1, 1, 1, 0])

    def test_indicator_infinite_bound(self):
        f = resolve_function("indicator:0:inf")
        assert np.array_equal(f(np.array([-0.5, 0.0, 1e12])), [0, 1, 1])

    def test_poly(self):
        f = resolve_function("poly:1:2:3")
        assert f(np.array([2.0]))[0] == 1 + 4 + 12

    def test_gauss(self):
        f = resolve_function("gauss:1:2")
        assert math.isclose(f(np.array([2.0]))[0], math.exp(-1.0 / 8.0), rel_tol=1e-15)

    def test_exp(self):
        f = resolve_function("exp:0.5")
        assert math.isclose(f(np.array([2.0]))[0], math.e, rel_tol=1e-15)

    def test_errors_name_the_registry(self):
        with pytest.raises(ValueError, match="one, indicator"):
            resolve_function("sinc:1")
        with pytest.raises(ValueError, match="order"):
            resolve_function("indicator:2:1")
        with pytest.raises(ValueError, match="width"):
            resolve_function("gauss:0:0")


class TestContainers:
    def test_beta_grid_sorts_and_validates(self):
        assert BetaGrid((1.0, 0.5)).values == (0.5, 1.0)
        with pytest.raises(ValueError):
            BetaGrid((0.5, 0.5))
        with pytest.raises(ValueError):
            BetaGrid((-0.1,))
        with pytest.raises(ValueError):
            BetaGrid((math.inf,))

    def test_series_flags_nan(self):
        s = StatisticSeries("nu", (1.0, 2.0), [0.5, math.nan], meta={"beta": 0.5})
        assert s.flagged
        rows = s.rows(3, True)
        assert rows[0] == (3, "nu", 0.5, "", 1.0, 0.5, 1)

    def test_series_length_mismatch(self):
        with pytest.raises(ValueError):
            StatisticSeries("n", (1.0,), [1.0, 2.0])
