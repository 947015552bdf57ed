"""Compact group models, automorphism actions, and algebraic action models."""

import itertools
from fractions import Fraction

import numpy as np
import pytest

from soficlab.actions import (
    AlgebraicActionModel,
    AutomorphismAction,
    FiniteGroupModel,
    IntegerGroupMatrix,
    TorusGridModel,
    act,
    continuous_kernel,
    count_kernel_points,
    cyclic_model,
    dual_model,
    instantiate_Xf,
    pair_candidates,
    product_model,
    regular_matrix,
    sigma_matrix,
    trivial_action,
    unit_automorphism,
    verify_hypotheses,
)
from soficlab.errors import SingularMatrixError, UnsupportedElementError, ValidationError
from soficlab.groups import GroupSpec, quotient_sofic


@pytest.fixture
def Z2():
    return GroupSpec.cyclic(2)


@pytest.fixture
def Z():
    return GroupSpec.integers()


def two_plus_t(Z2):
    return IntegerGroupMatrix.single(Z2, [(2, "e"), (1, "t")])


def two_minus_t(Z2):
    return IntegerGroupMatrix.single(Z2, [(2, "e"), (-1, "t")])


def regular_sigma(Z2, copies=1):
    return quotient_sofic(Z2, {"kind": "regular", "copies": copies}, list(Z2.elements()))


class TestModels:
    def test_cyclic_model_ops(self):
        m = cyclic_model(3)
        assert m.op(1, 2) == 0
        assert m.inverse(1) == 2
        assert m.identity == 0

    def test_torus_ops_exact(self):
        t = TorusGridModel(8, 2)
        assert t.op((7, 3), (2, 6)) == (1, 1)
        assert t.inverse((1, 0)) == (7, 0)
        assert t.n_points == 64
        assert t.point_from_index(t.point_index((5, 2))) == (5, 2)

    def test_product_model(self):
        m = cyclic_model(3)
        p = product_model(m)
        assert p.n_points == 9
        # componentwise: (1,2)*(2,2) = (0,1)
        a = 1 * 3 + 2
        b = 2 * 3 + 2
        assert p.op(a, b) == 0 * 3 + 1

    def test_pair_candidates(self):
        m = cyclic_model(3)
        x1 = np.array([0, 1, 2])
        x2 = np.array([2, 2, 0])
        z = pair_candidates(m, x1, x2)
        assert (z == np.array([2, 5, 6])).all()


class TestActions:
    def test_identity_axiom(self, Z):
        m = cyclic_model(3)
        action = AutomorphismAction(Z, m, generator_maps={"t": unit_automorphism(m, 2)})
        for x in m.iter_points():
            assert act(action, Z.identity(), x) == x

    def test_negation_action_value(self, Z):
        # G=Z acting on Z/3 by g.x = (-1)^g x: act(1, 1) = 2
        m = cyclic_model(3)
        action = AutomorphismAction(Z, m, generator_maps={"t": unit_automorphism(m, -1)})
        assert act(action, Z.generator(0), 1) == 2

    def test_inverse_axiom_random(self, Z):
        m = cyclic_model(5)
        action = AutomorphismAction(Z, m, generator_maps={"t": unit_automorphism(m, 2)})
        rng = np.random.default_rng(0)
        t = Z.generator(0)
        tinv = Z.inverse(t)
        for _ in range(100):
            g_exp = int(rng.integers(-3, 4))
            g = Z.power(t, g_exp)
            ginv = Z.inverse(g)
            x = int(rng.integers(0, 5))
            assert act(action, g, act(action, ginv, x)) == x

    def test_relation_enforcement(self):
        z2 = GroupSpec.cyclic(2)
        m = cyclic_model(5)
        # x -> 2x has order 4 on Z/5, so it cannot implement Z/2
        with pytest.raises(ValidationError):
            AutomorphismAction(z2, m, generator_maps={"t": unit_automorphism(m, 2)})
        # x -> -x has order 2: fine
        AutomorphismAction(z2, m, generator_maps={"t": unit_automorphism(m, -1)})

    def test_non_multiplicative_rejected(self, Z):
        m = cyclic_model(3)
        bad = np.array([0, 2, 1])  # negation: fine
        AutomorphismAction(Z, m, generator_maps={"t": bad})
        worse = np.array([1, 0, 2])  # swaps identity away
        with pytest.raises(ValidationError):
            AutomorphismAction(Z, m, generator_maps={"t": worse})

    def test_torus_matrix_action(self, Z):
        t = TorusGridModel(8, 2)
        mat = np.array([[1, 1], [0, 1]])
        action = AutomorphismAction(Z, t, generator_maps={"t": mat})
        assert act(action, Z.generator(0), (3, 5)) == (0, 5)
        # inverse matrix works mod q
        g = Z.generator(0)
        x = (3, 5)
        assert act(action, Z.inverse(g), act(action, g, x)) == x

    def test_unsupported_element(self, Z2):
        model, action = dual_model(two_plus_t(Z2))
        free = GroupSpec.free(1)
        with pytest.raises(UnsupportedElementError):
            action.point_map(free.generator(0))


class TestDualModel:
    def test_two_plus_t_is_z3_with_trivial_action(self, Z2):
        model, action = dual_model(two_plus_t(Z2))
        assert model.n_points == 3
        # points are the diagonal {(0,0),(1/3,1/3),(2/3,2/3)} of T^2
        labels = set(model.labels)
        assert (Fraction(1, 3), Fraction(1, 3)) in labels
        t = Z2.generator(0)
        perm = action.point_map(t)
        assert (perm == np.arange(3)).all()  # trivial dual action

    def test_two_minus_t_is_negation(self, Z2):
        model, action = dual_model(two_minus_t(Z2))
        assert model.n_points == 3
        t = Z2.generator(0)
        perm = action.point_map(t)
        # the nonzero points swap, zero is fixed: negation on Z/3
        fixed = [i for i in range(3) if perm[i] == i]
        assert fixed == [model.identity]
        # isomorphic to negation on cyclic_model(3): compare cycle structure
        neg = unit_automorphism(cyclic_model(3), -1)
        assert sorted(np.sort([i, perm[i]]).tolist() for i in range(3)) == sorted(
            np.sort([i, neg[i]]).tolist() for i in range(3)
        )

    def test_unit_matrix_gives_trivial_dual(self, Z2):
        f = IntegerGroupMatrix.single(Z2, [(1, "e")])
        model, _ = dual_model(f)
        assert model.n_points == 1

    def test_kernel_points_form_subgroup(self, Z2):
        model, action = dual_model(two_minus_t(Z2))
        pts = range(model.n_points)
        for a, b in itertools.product(pts, pts):
            assert model.op(a, b) in pts
        for a in pts:
            assert model.op(a, model.inverse(a)) == model.identity


class TestSigmaMatrix:
    def test_two_plus_t_regular(self, Z2):
        f = two_plus_t(Z2)
        sigma = regular_sigma(Z2)
        mat = sigma_matrix(f, sigma)
        assert mat.tolist() == [[2, 1], [1, 2]]

    def test_block_copies_determinant(self, Z2):
        f = two_plus_t(Z2)
        for k in (1, 2, 3):
            sigma = regular_sigma(Z2, copies=k)
            model = instantiate_Xf(f, sigma, q=6, tol=0)
            assert count_kernel_points(model, "continuous-exact") == 3**k

    def test_circulant_t_minus_2(self, Z):
        # G=Z, f=t-2, cyclic shift on Z/4: |det| = |1 - 2^4| = 15
        f = IntegerGroupMatrix.single(Z, [(1, "t"), (-2, "e")])
        sigma = quotient_sofic(
            Z, {"kind": "cyclic-powers", "orders": [4]},
            [Z.identity(), Z.generator(0), Z.inverse(Z.generator(0))],
        )
        model = instantiate_Xf(f, sigma, q=64, tol=0)
        assert count_kernel_points(model, "continuous-exact") == 15
        # grid misses the irrational-coordinate kernel points: gcd(15, 64) = 1
        assert count_kernel_points(model, "grid-exact") == 1

    def test_unit_element_kernel(self, Z2):
        f = IntegerGroupMatrix.single(Z2, [(1, "e")])
        model = instantiate_Xf(f, regular_sigma(Z2), q=12, tol=0)
        assert count_kernel_points(model, "continuous-exact") == 1
        assert count_kernel_points(model, "grid-exact") == 1
        assert count_kernel_points(model, "grid-tolerance") == 1

    def test_grid_exact_matches_continuous_when_q_compatible(self, Z2):
        f = two_plus_t(Z2)
        model = instantiate_Xf(f, regular_sigma(Z2), q=6, tol=0)
        assert count_kernel_points(model, "grid-exact") == 3
        pts = model.enumerate_kernel()
        assert pts.shape == (3, 2, 1)
        # the three diagonal points at denominators 3 on the q=6 grid
        assert {tuple(p.reshape(-1)) for p in pts} == {(0, 0), (2, 2), (4, 4)}

    def test_kernel_invariance_under_sigma_action(self, Z2):
        f = two_plus_t(Z2)
        sigma = regular_sigma(Z2, copies=2)
        model = instantiate_Xf(f, sigma, q=6, tol=0)
        pts = model.enumerate_kernel()
        t = Z2.generator(0)
        perm = sigma.perm(t)
        for p in pts:
            moved = p[np.argsort(perm)]  # x o sigma(g)^{-1}
            assert model.is_kernel_point(moved)

    def test_singular_continuous_refused(self, Z2):
        f = IntegerGroupMatrix.single(Z2, [(1, "e"), (1, "t")])
        model = instantiate_Xf(f, regular_sigma(Z2), q=4, tol=0)
        with pytest.raises(SingularMatrixError):
            count_kernel_points(model, "continuous-exact")
        # grid modes still count (the kernel is a positive-dimensional set)
        assert count_kernel_points(model, "grid-exact") == 4

    def test_tolerance_monotone(self, Z):
        f = IntegerGroupMatrix.single(Z, [(1, "t"), (-2, "e")])
        sigma = quotient_sofic(
            Z, {"kind": "cyclic-powers", "orders": [4]},
            [Z.identity(), Z.generator(0), Z.inverse(Z.generator(0))],
        )
        counts = [
            count_kernel_points(instantiate_Xf(f, sigma, q=16, tol=tol), "grid-tolerance")
            for tol in (0, Fraction(1, 16), Fraction(1, 8))
        ]
        assert counts[0] <= counts[1] <= counts[2]
        assert counts[0] == 1

    def test_unsupported_element_rejected(self, Z2):
        f = two_plus_t(Z2)
        sigma_e_only = quotient_sofic(Z2, {"kind": "regular"}, [Z2.identity()])
        with pytest.raises(UnsupportedElementError):
            instantiate_Xf(f, sigma_e_only, q=4, tol=0)

    def test_q_too_small(self, Z2):
        with pytest.raises(ValidationError):
            instantiate_Xf(two_plus_t(Z2), regular_sigma(Z2), q=1, tol=0)


class TestContinuousKernel:
    def test_matches_smith_count_small_random(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            n = int(rng.integers(1, 3))
            while True:
                mat = rng.integers(-3, 4, size=(n, n))
                from soficlab.intlin import det_bareiss

                d = det_bareiss(mat.tolist())
                if d != 0 and abs(d) <= 30:
                    break
            pts = continuous_kernel(mat)
            assert len(pts) == abs(d)
            # every enumerated point is annihilated exactly
            for p in pts:
                out = [sum(Fraction(int(mat[i, j])) * p[j] for j in range(n)) % 1 for i in range(n)]
                assert all(v == 0 for v in out)


class TestVerifyHypotheses:
    def test_two_plus_t_injective(self, Z2):
        rep = verify_hypotheses(two_plus_t(Z2))
        assert rep.lambda_injective.value is True
        assert rep.lambda_dense_image.value is True
        assert "determinant" in rep.lambda_injective.method

    def test_one_plus_t_singular(self, Z2):
        f = IntegerGroupMatrix.single(Z2, [(1, "e"), (1, "t")])
        rep = verify_hypotheses(f)
        assert rep.lambda_injective.value is False

    def test_unit_injective(self, Z2):
        f = IntegerGroupMatrix.single(Z2, [(1, "e")])
        assert verify_hypotheses(f).lambda_injective.value is True

    def test_integers_symbol(self, Z):
        f = IntegerGroupMatrix.single(Z, [(1, "t"), (-2, "e")])
        rep = verify_hypotheses(f)
        assert rep.lambda_injective.value is True
        assert rep.lambda_dense_image.value is True
        zero = IntegerGroupMatrix.single(Z, [])
        rep0 = verify_hypotheses(zero)
        assert rep0.lambda_injective.value is False

    def test_unknown_class(self):
        free = GroupSpec.free(2)
        f = IntegerGroupMatrix.single(free, [(1, "e"), (1, "a")])
        rep = verify_hypotheses(f)
        assert rep.lambda_injective.value is None
        assert rep.lambda_injective.method == "unknown-group-class"

    def test_injectivity_matches_finite_kernel_cross_check(self, Z2):
        # for finite G: injective <=> continuous kernel of the regular model finite
        for f in (two_plus_t(Z2), two_minus_t(Z2)):
            rep = verify_hypotheses(f)
            model = instantiate_Xf(f, regular_sigma(Z2), q=6, tol=0)
            finite = True
            try:
                count_kernel_points(model, "continuous-exact")
            except SingularMatrixError:
                finite = False
            assert rep.lambda_injective.value == finite
        g = IntegerGroupMatrix.single(Z2, [(1, "e"), (1, "t")])
        assert verify_hypotheses(g).lambda_injective.value is False


class TestRegularMatrix:
    def test_two_plus_t(self, Z2):
        mat = regular_matrix(two_plus_t(Z2))
        assert mat.tolist() == [[2, 1], [1, 2]]

    def test_rectangular_shape(self, Z2):
        f = IntegerGroupMatrix.from_pairs(
            Z2, [[[(1, "e")], [(1, "t")]]], m=1, n=2
        )
        mat = regular_matrix(f)
        assert mat.shape == (2, 4)
