"""Terminal objectives: values, supergradients, the log functional, axioms."""

import numpy as np
import pytest

import vng
from conftest import two_asset_margin_market
from oracles import central_difference_gradient
from vng.errors import NegativeValue, NotInCone, ZeroValue


@pytest.fixture
def market():
    return two_asset_margin_market()


@pytest.fixture
def tree(market):
    return market.tree


class TestEvaluate:
    def test_linear_all_ones(self, tree, market):
        obj = vng.LinearObjective(tree, market)
        assert obj.evaluate("aa", np.array([2.0, 3.0])) == pytest.approx(5.0)

    def test_liquidation_frictionless_net_value(self):
        tree = vng.build_tree(
            [("r", None, 1.0), ("u", "r", 0.5), ("d", "r", 0.5)], 2
        )
        ret = np.full((3, 2), np.nan)
        ret[1:] = 1.0
        market = vng.MarketData(
            tree=tree, m=2, returns=ret,
            lam_plus=np.zeros((3, 2)), lam_minus=np.zeros((3, 2)),
            margins=np.array([1.5, 1.5]),
        )
        obj = vng.LiquidationObjective(tree, market)
        assert obj.evaluate("u", np.array([2.0, -1.0])) == pytest.approx(1.0)

    def test_zero_penalty_equals_linear(self, tree, market):
        q = np.array([1.0, 1.05])
        lin = vng.LinearObjective(tree, market, q=q)
        pen = vng.NormPenalizedObjective(tree, market, q=q, theta=0.0)
        rng = np.random.default_rng(0)
        for leaf in tree.leaves():
            a = vng.sample_cone_point(market, leaf, rng)
            assert pen.evaluate(leaf, a) == pytest.approx(lin.evaluate(leaf, a))

    def test_outside_cone_rejected(self, tree, market):
        obj = vng.LinearObjective(tree, market)
        with pytest.raises(NotInCone):
            obj.evaluate("aa", np.array([0.1, -1.0]))

    def test_negative_value_detected(self, tree, market):
        bad = vng.NormPenalizedObjective(
            tree, market, theta=1.5, norm="l1", enforce_bound=False
        )
        with pytest.raises(NegativeValue):
            bad.evaluate("aa", np.array([1.0, 1.0]))

    def test_theta_bound_enforced(self, tree, market):
        probe = vng.NormPenalizedObjective(tree, market, theta=0.0)
        too_big = 1.5 * float(probe.theta_bound.min())
        with pytest.raises(ValueError):
            vng.NormPenalizedObjective(tree, market, theta=too_big)


class TestGradient:
    def test_linear_gradient_and_euler(self, tree, market):
        q = np.array([1.1, 0.9])
        obj = vng.LinearObjective(tree, market, q=q)
        a = np.array([2.0, 1.0])
        g = obj.gradient("ab", a)
        np.testing.assert_allclose(g, q)
        assert g @ a == pytest.approx(obj.evaluate("ab", a))

    def test_liquidation_componentwise_slopes(self, tree, market):
        obj = vng.LiquidationObjective(tree, market)
        leaf = tree.node("ba")
        a = np.array([2.0, -0.4])
        g = obj.gradient(leaf, a)
        i = leaf.index
        np.testing.assert_allclose(g, [market.Lp[i][0], market.Lm[i][1]])
        assert g @ a == pytest.approx(obj.evaluate(leaf, a))

    def test_finite_difference_agreement(self, tree, market):
        rng = np.random.default_rng(1)
        objectives = [
            vng.LinearObjective(tree, market, q=np.array([1.0, 1.1])),
            vng.LiquidationObjective(tree, market),
            vng.NormPenalizedObjective(tree, market, theta=0.01, norm="l1"),
            vng.NormPenalizedObjective(tree, market, theta=0.01, norm="l2"),
        ]
        for obj in objectives:
            checked = 0
            while checked < 100:
                leaf = tree.leaves()[rng.integers(len(tree.leaves()))]
                a = vng.sample_cone_point(market, leaf, rng)
                if np.abs(a).min() < 1e-2:  # stay clear of kinks
                    continue
                pos = tree.level_position(leaf)
                g = obj.gradient(leaf, a)
                fd = central_difference_gradient(lambda x: obj._value(pos, x), a)
                rel = np.abs(g - fd).max() / max(1.0, np.abs(g).max())
                assert rel < 1e-5
                checked += 1

    def test_euler_identity_sampled(self, tree, market):
        rng = np.random.default_rng(2)
        obj = vng.NormPenalizedObjective(tree, market, theta=0.01, norm="l2")
        for leaf in tree.leaves():
            for _ in range(200):
                a = vng.sample_cone_point(market, leaf, rng)
                if np.abs(a).sum() < 1e-9:
                    continue
                val = obj.evaluate(leaf, a)
                assert obj.gradient(leaf, a) @ a == pytest.approx(
                    val, rel=1e-9, abs=1e-12
                )

    def test_zero_value_raises(self, tree, market):
        obj = vng.LiquidationObjective(tree, market)
        with pytest.raises(ZeroValue):
            obj.gradient("aa", np.zeros(2))


class TestLogObjective:
    def test_all_ones_terminal_gives_zero(self, tree, market):
        obj = vng.LinearObjective(tree, market)
        x = vng.AdaptedVector.constant(tree, 2, np.array([0.5, 0.5]))
        assert vng.log_objective(tree, obj, x) == pytest.approx(0.0, abs=1e-15)

    def test_doubling_adds_log_two(self, tree, market):
        obj = vng.LiquidationObjective(tree, market)
        rng = np.random.default_rng(3)
        rows = np.vstack(
            [vng.sample_cone_point(market, leaf, rng) for leaf in tree.leaves()]
        )
        x = vng.AdaptedVector(2, rows)
        f1 = vng.log_objective(tree, obj, x)
        f2 = vng.log_objective(tree, obj, vng.AdaptedVector(2, 2.0 * rows))
        assert f2 - f1 == pytest.approx(np.log(2.0), abs=1e-12)

    def test_scaling_identity_exact(self, tree, market):
        obj = vng.LinearObjective(tree, market)
        x = vng.AdaptedVector.constant(tree, 2, np.array([0.3, 0.6]))
        for c in (0.1, 2.5, 10.0):
            shifted = vng.log_objective(
                tree, obj, vng.AdaptedVector(2, c * x.values)
            )
            assert shifted == pytest.approx(
                vng.log_objective(tree, obj, x) + np.log(c), abs=1e-12
            )

    def test_zero_leaf_gives_minus_infinity(self, tree, market):
        obj = vng.LinearObjective(tree, market)
        rows = np.tile([0.5, 0.5], (len(tree.leaves()), 1))
        rows[1] = 0.0
        assert vng.log_objective(tree, obj, vng.AdaptedVector(2, rows)) == float(
            "-inf"
        )


class TestPsiClass:
    def test_linear_all_ones_passes(self, tree, market):
        report = vng.check_psi_class(
            vng.LinearObjective(tree, market), tree, market, n_samples=2000, seed=0
        )
        assert report.passed
        assert "finite" in report.psi1_note

    def test_liquidation_passes_with_derived_bound(self, tree, market):
        report = vng.check_psi_class(
            vng.LiquidationObjective(tree, market), tree, market,
            n_samples=2000, seed=1,
        )
        assert report.passed

    def test_overweight_penalty_detected(self, tree, market):
        probe = vng.NormPenalizedObjective(tree, market, theta=0.0)
        bad = vng.NormPenalizedObjective(
            tree, market, theta=60.0 * float(probe.theta_bound.min()),
            enforce_bound=False,
        )
        report = vng.check_psi_class(bad, tree, market, n_samples=2000, seed=2)
        assert not report.two_sided_bound.passed
        assert report.two_sided_bound.violations > 0
