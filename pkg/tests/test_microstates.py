"""rho2, microstate membership, enumeration, sampling, lifts."""

from fractions import Fraction

import numpy as np
import pytest

from soficlab.actions import (
    AutomorphismAction,
    TorusGridModel,
    cyclic_model,
    dual_model,
    trivial_action,
    unit_automorphism,
    IntegerGroupMatrix,
)
from soficlab.errors import BudgetExceededError, UnsupportedElementError
from soficlab.groups import GroupSpec, quotient_sofic
from soficlab.measures import SiteMeasure
from soficlab.microstates import (
    MapWindow,
    default_panel,
    discrete_metric,
    doubled_metric,
    empirical_pushforward,
    enumerate_top_microstates,
    indicator_panel,
    is_meas_microstate,
    is_top_microstate,
    load_microstates,
    psi_window,
    rho2,
    rho2_sq,
    sample_microstates,
    save_microstates,
    shift_lift,
    torus_metric,
)


@pytest.fixture
def neg_setup():
    """Z/2 acting on Z/3 by negation, sigma = regular representation (d=2)."""
    group = GroupSpec.cyclic(2)
    model = cyclic_model(3)
    action = AutomorphismAction(group, model, generator_maps={"t": unit_automorphism(model, -1)})
    sigma = quotient_sofic(group, {"kind": "regular"}, list(group.elements()))
    return group, model, action, sigma


class TestRho2:
    def test_zero_on_equal(self):
        m = cyclic_model(2)
        metric = discrete_metric(m)
        x = np.array([0, 1, 0, 1])
        assert rho2(metric, x, x) == 0.0
        assert rho2_sq(metric, x, x) == 0

    def test_single_mismatch_value(self):
        # discrete metric on Z/2, d=4, one mismatch: rho2 = sqrt(1/4) = 1/2
        m = cyclic_model(2)
        metric = discrete_metric(m)
        x = np.array([0, 0, 0, 0])
        y = np.array([1, 0, 0, 0])
        assert rho2_sq(metric, x, y) == Fraction(1, 4)
        assert rho2(metric, x, y) == 0.5

    def test_triangle_inequality_random(self):
        m = cyclic_model(3)
        metric = discrete_metric(m)
        rng = np.random.default_rng(0)
        for _ in range(100):
            x, y, z = (rng.integers(0, 3, size=6) for _ in range(3))
            assert rho2(metric, x, y) <= rho2(metric, x, z) + rho2(metric, z, y) + 1e-12

    def test_torus_metric_exact(self):
        t = TorusGridModel(8, 1)
        metric = torus_metric(t)
        x = np.array([[0], [0]])
        y = np.array([[4], [2]])
        # distances 1/2 and 1/4: mean of squares = (16+4)/(2*64)
        assert rho2_sq(metric, x, y) == Fraction(20, 128)
        assert metric.diam_sq == Fraction(16, 64)

    def test_length_mismatch(self):
        m = cyclic_model(2)
        metric = discrete_metric(m)
        with pytest.raises(Exception):
            rho2_sq(metric, np.array([0, 1]), np.array([0, 1, 0]))

    def test_doubled_metric_averages(self):
        m = cyclic_model(3)
        metric = discrete_metric(m)
        dm = doubled_metric(metric)
        # pair (0,1) vs (0,2): first coordinate equal, second differs: (0+1)/2
        a = 0 * 3 + 1
        b = 0 * 3 + 2
        assert dm.sq(a, b) == Fraction(1, 2)
        assert dm.min_positive_sq == Fraction(1, 2)


class TestTopMembership:
    def test_fixed_point_always_passes(self, neg_setup):
        group, model, action, sigma = neg_setup
        x = np.array([0, 0])  # identity of Z/3 is fixed by negation
        metric = discrete_metric(model)
        for delta in (Fraction(1, 100), Fraction(1, 2), Fraction(0)):
            assert is_top_microstate(x, sigma, list(group.elements()), delta, metric, action)

    def test_shift_window_example(self):
        # G=Z on Z/3 by g.x = (-1)^g x, sigma = shift on Z/8,
        # x = (0,1,2,0,1,2,0,1), F={1}, delta=1/2: brute-force the inequality
        Z = GroupSpec.integers()
        model = cyclic_model(3)
        action = AutomorphismAction(Z, model, generator_maps={"t": unit_automorphism(model, -1)})
        sigma = quotient_sofic(
            Z, {"kind": "cyclic-powers", "orders": [8]},
            [Z.identity(), Z.generator(0), Z.inverse(Z.generator(0))],
        )
        x = np.array([0, 1, 2, 0, 1, 2, 0, 1])
        one = Z.generator(0)
        metric = discrete_metric(model)
        # independent evaluation of the defining inequality
        perm = sigma.perm(one)
        neg = unit_automorphism(model, -1)
        mism = sum(1 for j in range(8) if neg[x[j]] != x[perm[j]])
        expected = Fraction(mism, 8) < Fraction(1, 2) ** 2 or mism == 0
        got = is_top_microstate(x, sigma, [one], Fraction(1, 2), metric, action)
        assert got == expected

    def test_delta_zero_boundary(self, neg_setup):
        group, model, action, sigma = neg_setup
        metric = discrete_metric(model)
        exact = np.array([1, 2])  # (x, -x): exactly equivariant
        not_exact = np.array([1, 1])
        F = list(group.elements())
        assert is_top_microstate(exact, sigma, F, Fraction(0), metric, action)
        assert not is_top_microstate(not_exact, sigma, F, Fraction(0), metric, action)

    def test_unsupported_window_element(self, neg_setup):
        group, model, action, sigma = neg_setup
        Z = GroupSpec.integers()
        metric = discrete_metric(model)
        with pytest.raises(UnsupportedElementError):
            is_top_microstate(np.array([0, 0]), sigma, [Z.generator(0)], Fraction(1, 2), metric, action)


class TestMeasMembership:
    def test_exact_equidistribution(self):
        group = GroupSpec.cyclic(2)
        model = cyclic_model(3)
        action = trivial_action(group, model)
        sigma = quotient_sofic(group, {"kind": "regular", "copies": 3}, list(group.elements()))
        x = np.array([0, 0, 1, 1, 2, 2])  # each element equally often
        window = MapWindow(
            F=(group.identity(),),
            delta=Fraction(1, 100),
            L=indicator_panel(model),
            target=SiteMeasure.uniform(model),
        )
        metric = discrete_metric(model)
        assert is_meas_microstate(x, sigma, window, metric, action)

    def test_constant_fails_separating_panel(self):
        group = GroupSpec.cyclic(2)
        model = cyclic_model(3)
        action = trivial_action(group, model)
        sigma = quotient_sofic(group, {"kind": "regular"}, list(group.elements()))
        x = np.array([0, 0])
        # indicator of 0 separates: |1 - 1/3| = 2/3 >= delta
        window = MapWindow(
            F=(group.identity(),),
            delta=Fraction(1, 2),
            L=indicator_panel(model),
            target=SiteMeasure.uniform(model),
        )
        metric = discrete_metric(model)
        assert not is_meas_microstate(x, sigma, window, metric, action)

    def test_empty_panel_reduces_to_top(self, neg_setup):
        group, model, action, sigma = neg_setup
        metric = discrete_metric(model)
        window = MapWindow(
            F=tuple(group.elements()),
            delta=Fraction(1, 4),
            L=(),
            target=SiteMeasure.uniform(model),
        )
        for a in range(3):
            for b in range(3):
                x = np.array([a, b])
                assert is_meas_microstate(x, sigma, window, metric, action) == is_top_microstate(
                    x, sigma, tuple(group.elements()), Fraction(1, 4), metric, action
                )


class TestEnumeration:
    def test_trivial_action_identity_window(self):
        group = GroupSpec.cyclic(2)
        model = cyclic_model(3)
        action = trivial_action(group, model)
        sigma = quotient_sofic(group, {"kind": "regular"}, list(group.elements()))
        metric = discrete_metric(model)
        out = enumerate_top_microstates(
            model, sigma, [group.identity()], Fraction(1, 2), metric, action
        )
        assert out.shape[0] == 9  # all |X|^d pass on the e-window

    def test_negation_exact_count(self, neg_setup):
        group, model, action, sigma = neg_setup
        metric = discrete_metric(model)
        out = enumerate_top_microstates(
            model, sigma, list(group.elements()), Fraction(1, 4), metric, action
        )
        # exactly the pairs (x, -x)
        assert out.shape[0] == 3
        for row in out:
            assert (row[1] == (-row[0]) % 3)

    def test_exact_route_matches_brute_force(self, neg_setup):
        group, model, action, sigma = neg_setup
        metric = discrete_metric(model)
        F = list(group.elements())
        # delta small enough to force exactness: compare both routes
        fast = enumerate_top_microstates(model, sigma, F, Fraction(1, 4), metric, action)
        brute = [
            (a, b)
            for a in range(3)
            for b in range(3)
            if is_top_microstate(np.array([a, b]), sigma, F, Fraction(1, 4), metric, action)
        ]
        assert sorted(map(tuple, fast.tolist())) == sorted(brute)

    def test_delta_above_diameter_passes_everything(self, neg_setup):
        group, model, action, sigma = neg_setup
        metric = discrete_metric(model)
        out = enumerate_top_microstates(
            model, sigma, list(group.elements()), Fraction(3, 2), metric, action
        )
        assert out.shape[0] == 9

    def test_budget_exceeded(self, neg_setup):
        group, model, action, sigma = neg_setup
        metric = discrete_metric(model)
        with pytest.raises(BudgetExceededError) as err:
            enumerate_top_microstates(
                model, sigma, list(group.elements()), Fraction(3, 2), metric, action, budget=5
            )
        assert err.value.required == 9

    def test_block_copies_count(self):
        # f=2+t dual: trivial action; k blocks: 3^k equivariant candidates
        group = GroupSpec.cyclic(2)
        f = IntegerGroupMatrix.single(group, [(2, "e"), (1, "t")])
        model, action = dual_model(f)
        metric = discrete_metric(model)
        for k in (1, 2, 3):
            sigma = quotient_sofic(group, {"kind": "regular", "copies": k}, list(group.elements()))
            out = enumerate_top_microstates(
                model, sigma, list(group.elements()), Fraction(1, 4), metric, action
            )
            assert out.shape[0] == 3**k


class TestSampling:
    def test_sampled_subset_of_enumerated(self, neg_setup):
        group, model, action, sigma = neg_setup
        metric = discrete_metric(model)
        window = MapWindow(
            F=tuple(group.elements()),
            delta=Fraction(1, 4),
            L=(),
            target=SiteMeasure.uniform(model),
        )
        enumerated = {
            tuple(r)
            for r in enumerate_top_microstates(
                model, sigma, window.F, window.delta, metric, action
            ).tolist()
        }
        got = sample_microstates(model, sigma, window, metric, action, n_samples=8, seed=3)
        assert got.shape[0] >= 1
        for row in got:
            assert tuple(row.tolist()) in enumerated

    def test_determinism(self, neg_setup):
        group, model, action, sigma = neg_setup
        metric = discrete_metric(model)
        window = MapWindow(
            F=tuple(group.elements()),
            delta=Fraction(1, 4),
            L=(),
            target=SiteMeasure.uniform(model),
        )
        a = sample_microstates(model, sigma, window, metric, action, n_samples=5, seed=7)
        b = sample_microstates(model, sigma, window, metric, action, n_samples=5, seed=7)
        assert (a == b).all()

    def test_trivial_action_uniform(self):
        group = GroupSpec.cyclic(2)
        model = cyclic_model(3)
        action = trivial_action(group, model)
        sigma = quotient_sofic(group, {"kind": "regular", "copies": 4}, list(group.elements()))
        metric = discrete_metric(model)
        window = MapWindow(F=(group.identity(),), delta=Fraction(1, 2), L=(), target=SiteMeasure.uniform(model))
        got = sample_microstates(model, sigma, window, metric, action, n_samples=6, seed=1)
        assert got.shape == (6, 8)


class TestEmpiricalAndLifts:
    def test_point_mass(self):
        model = cyclic_model(3)
        x = np.array([2, 2, 2, 2])
        mu = empirical_pushforward(x, model)
        assert mu.weights() == [0, 0, 1]

    def test_uniform(self):
        model = cyclic_model(3)
        x = np.array([0, 1, 2])
        assert empirical_pushforward(x, model) == SiteMeasure.uniform(model)

    def test_counting(self):
        model = cyclic_model(3)
        x = np.array([0, 0, 1, 2])
        assert empirical_pushforward(x, model).weights() == [
            Fraction(1, 2),
            Fraction(1, 4),
            Fraction(1, 4),
        ]

    def test_shift_lift_identity_window(self, neg_setup):
        group, model, action, sigma = neg_setup
        x = np.array([1, 2])
        lift = shift_lift(x, sigma, [group.identity()])
        assert (lift[:, 0] == x).all()

    def test_shift_lift_index_arithmetic(self):
        Z = GroupSpec.integers()
        sigma = quotient_sofic(
            Z, {"kind": "cyclic-powers", "orders": [8]},
            [Z.identity(), Z.generator(0), Z.inverse(Z.generator(0))],
        )
        rng = np.random.default_rng(2)
        x = rng.integers(0, 3, size=8)
        lift = shift_lift(x, sigma, [Z.identity(), Z.generator(0)])
        for j in range(8):
            assert lift[j, 0] == x[j]
            assert lift[j, 1] == x[(j - 1) % 8]

    def test_lift_marginal_is_empirical(self, neg_setup):
        group, model, action, sigma = neg_setup
        x = np.array([1, 0])
        lift = shift_lift(x, sigma, [group.identity(), group.generator(0)])
        model_marginal = empirical_pushforward(lift[:, 0], model)
        assert model_marginal == empirical_pushforward(x, model)

    def test_psi_window(self, neg_setup):
        group, model, action, sigma = neg_setup
        # negation on Z/3, W = Z/2, p = 1 -> (1, 2)
        W = [group.identity(), group.generator(0)]
        assert psi_window(1, W, action) == (1, 2)

    def test_psi_window_trivial(self):
        group = GroupSpec.cyclic(2)
        model = cyclic_model(3)
        action = trivial_action(group, model)
        W = list(group.elements())
        assert psi_window(2, W, action) == (2, 2)

    def test_psi_window_singleton(self, neg_setup):
        group, model, action, sigma = neg_setup
        assert psi_window(1, [group.identity()], action) == (1,)


class TestExport:
    def test_round_trip(self, tmp_path, neg_setup):
        group, model, action, sigma = neg_setup
        metric = discrete_metric(model)
        xs = enumerate_top_microstates(
            model, sigma, list(group.elements()), Fraction(1, 4), metric, action
        )
        path = tmp_path / "micro.npz"
        manifest = {"sigma": sigma.cache_key(), "delta": "1/4", "F": ["e", "t"]}
        save_microstates(path, xs, manifest)
        back, mani = load_microstates(path)
        assert (back == xs).all()
        assert mani == manifest


class TestMonotonicity:
    def test_window_nesting(self, neg_setup):
        group, model, action, sigma = neg_setup
        metric = discrete_metric(model)
        F_small = [group.identity()]
        F_big = list(group.elements())
        small_delta = Fraction(1, 4)
        big_delta = Fraction(1, 2)
        for a in range(3):
            for b in range(3):
                x = np.array([a, b])
                # Map(F_big, small) subset Map(F_small, big)
                if is_top_microstate(x, sigma, F_big, small_delta, metric, action):
                    assert is_top_microstate(x, sigma, F_small, big_delta, metric, action)

    def test_meas_subset_of_top(self, neg_setup):
        group, model, action, sigma = neg_setup
        metric = discrete_metric(model)
        window = MapWindow(
            F=tuple(group.elements()),
            delta=Fraction(1, 2),
            L=indicator_panel(model),
            target=SiteMeasure.uniform(model),
        )
        for a in range(3):
            for b in range(3):
                x = np.array([a, b])
                if is_meas_microstate(x, sigma, window, metric, action):
                    assert is_top_microstate(x, sigma, window.F, window.delta, metric, action)

    def test_product_of_microstates_doubles_delta(self, neg_setup):
        # bi-invariant metric: x, y in Map(delta) implies xy in Map(2 delta)
        group, model, action, sigma = neg_setup
        metric = discrete_metric(model)
        F = list(group.elements())
        delta = Fraction(1, 4)
        members = [
            np.array([a, b])
            for a in range(3)
            for b in range(3)
            if is_top_microstate(np.array([a, b]), sigma, F, delta, metric, action)
        ]
        for x in members:
            for y in members:
                xy = model.candidate_mul(x, y)
                assert is_top_microstate(xy, sigma, F, 2 * delta, metric, action)
