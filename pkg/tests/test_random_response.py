import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from liftlab import (
    ALIP,
    Budget,
    CapExceeded,
    EmptyPolytope,
    EmptySubset,
    InfeasibleTarget,
    MeasureKind,
    aorr,
    build_polytope,
    compose_channel,
    enumerate_vertices,
    lift_table,
    sample_random_joint,
    solve_column_lp,
    srr,
    subset_merge_mechanism,
    validate_joint,
)
from liftlab.lift import alip_satisfied
from liftlab.prob import product_joint
from liftlab.random_response import active_constraints

import oracles
from strategies import budgets, joints

B06 = Budget(0.6, 0.6)


def exact_system(j, subset, b):
    """Rational constraint rows built from the raw table, not from the package."""
    t = [[Fraction(v) for v in r] for r in j.probs.tolist()]
    ps, px = oracles.rows(t), oracles.cols(t)
    hi, lo = Fraction(math.exp(b.eps_u)), Fraction(math.exp(-b.eps_l))
    A, c = [], []
    for i in range(len(t)):
        lifts = [t[i][x] / (ps[i] * px[x]) for x in subset]
        A.append(lifts)
        c.append(hi)
        A.append([-v for v in lifts])
        c.append(-lo)
    d = len(subset)
    for k in range(d):
        A.append([Fraction(-1) if m == k else Fraction(0) for m in range(d)])
        c.append(Fraction(0))
    return A, c


def assert_same_rows(a, b, tol):
    assert a.shape == b.shape
    for row in a:
        assert np.abs(b - row).max(axis=1).min() <= tol


class TestPolytope:
    def test_unbounded_is_simplex(self, canonical):
        poly = build_polytope(canonical, [0, 1, 2], Budget.unbounded())
        assert np.array_equal(poly.A, -np.eye(3))
        V = enumerate_vertices(poly)
        assert_same_rows(V, np.eye(3), 0)

    def test_canonical_prior_point(self, canonical):
        poly = build_polytope(canonical, [0, 2], B06)
        assert poly.contains([0.5, 0.5])
        assert poly.target_feasible

    def test_singleton_violating(self, canonical):
        with pytest.raises(EmptyPolytope):
            enumerate_vertices(build_polytope(canonical, [0], B06))

    def test_empty_subset(self, canonical):
        with pytest.raises(EmptySubset):
            build_polytope(canonical, [], B06)

    def test_segment_cut_by_one_constraint(self):
        # two symbols, one upper row l . v <= e^{eps_u}; the cut point solves
        # l1 v + l2 (1 - v) = h on the segment
        j = validate_joint([[0.4, 0.1], [0.1, 0.4]])
        b = Budget(math.inf, 0.3)
        poly = build_polytope(j, [0, 1], b)
        lifts = oracles.lift(j.probs.tolist())
        h = math.exp(0.3)
        V = enumerate_vertices(poly)
        cut1 = (h - lifts[0][1]) / (lifts[0][0] - lifts[0][1])
        cut2 = (h - lifts[1][1]) / (lifts[1][0] - lifts[1][1])
        expected = np.array([[cut1, 1 - cut1], [cut2, 1 - cut2]])
        assert len(V) == 2
        assert_same_rows(V, expected, 1e-14)

    def test_canonical_vertices_match_rational_oracle(self, canonical):
        poly = build_polytope(canonical, [0, 2], B06)
        V = enumerate_vertices(poly)
        A, c = exact_system(canonical, [0, 2], B06)
        exact = np.array([[float(x) for x in v] for v in oracles.exact_vertices(A, c)])
        assert_same_rows(V, exact, 1e-12)
        assert_same_rows(exact, V, 1e-12)
        for v in V:
            assert poly.contains(v, 1e-9)

    @given(joints(min_s=2, min_x=2, max_x=4), budgets)
    def test_vertices_match_rational_oracle(self, j, eps):
        b = Budget(*eps)
        subset = list(range(j.shape[1]))
        A, c = exact_system(j, subset, b)
        exact = oracles.exact_vertices(A, c)
        poly = build_polytope(j, subset, b)
        if not exact:
            with pytest.raises(EmptyPolytope):
                enumerate_vertices(poly)
            return
        exact = np.array([[float(x) for x in v] for v in exact])
        # the rational oracle keeps near-duplicates that float dedup merges
        V = enumerate_vertices(poly)
        assert np.abs(exact[:, None, :] - V[None, :, :]).max(axis=2).min(axis=1).max() <= 1e-9
        assert np.abs(V[:, None, :] - exact[None, :, :]).max(axis=2).min(axis=1).max() <= 1e-9

    @given(joints(min_s=2, min_x=2, max_x=6), budgets)
    def test_vertex_certification(self, j, eps):
        poly = build_polytope(j, range(j.shape[1]), Budget(*eps))
        try:
            V = enumerate_vertices(poly)
        except EmptyPolytope:
            return
        d = poly.dim
        for v in V:
            assert poly.contains(v, 1e-9)
            act = active_constraints(poly, v)
            m = np.vstack([poly.A[act], np.ones(d)])
            assert np.linalg.matrix_rank(m, tol=1e-9) == d
        gaps = np.abs(V[:, None, :] - V[None, :, :]).max(axis=2) + np.eye(len(V))
        assert gaps.min() > 1e-9

    @given(joints(min_s=2, min_x=3, max_x=7), budgets)
    def test_active_set_and_qhull_agree(self, j, eps):
        poly = build_polytope(j, range(j.shape[1]), Budget(*eps))
        try:
            a = enumerate_vertices(poly, "active-set")
        except EmptyPolytope:
            with pytest.raises((EmptyPolytope, CapExceeded)):
                enumerate_vertices(poly, "qhull")
            return
        try:
            q = enumerate_vertices(poly, "qhull")
        except CapExceeded:
            return  # flat polytope, qhull cannot handle it
        assert_same_rows(a, q, 1e-8)
        assert_same_rows(q, a, 1e-8)


class TestColumnLP:
    def test_unit_vertices(self):
        target = np.array([0.2, 0.5, 0.3])
        lp = solve_column_lp(np.eye(3), target)
        np.testing.assert_allclose(lp.beta, target, atol=1e-15)
        assert lp.objective == pytest.approx(0, abs=1e-15)

    def test_single_vertex(self):
        target = np.array([0.25, 0.75])
        lp = solve_column_lp(target[None, :], target)
        np.testing.assert_allclose(lp.beta, [1.0])
        assert lp.objective == pytest.approx(oracles.entropy(target), abs=1e-14)

    def test_infeasible(self):
        with pytest.raises(InfeasibleTarget):
            solve_column_lp(np.array([[0.5, 0.5]]), np.array([0.9, 0.1]))

    def test_canonical_bruteforce(self, canonical):
        poly = build_polytope(canonical, [0, 2], B06)
        V = enumerate_vertices(poly)
        target = poly.target
        best = math.inf
        for a in range(len(V)):
            for b in range(a + 1, len(V)):
                m = np.stack([V[a], V[b]], axis=1)
                if abs(np.linalg.det(m)) < 1e-12:
                    continue
                beta = np.linalg.solve(m, target)
                if beta.min() >= -1e-12:
                    best = min(best, beta @ [oracles.entropy(V[a]), oracles.entropy(V[b])])
        assert solve_column_lp(V, target).objective == pytest.approx(best, abs=1e-12)

    @given(joints(min_s=2, min_x=2, max_x=6), budgets)
    def test_bfs_and_highs_agree(self, j, eps):
        poly = build_polytope(j, range(j.shape[1]), Budget(*eps))
        V = enumerate_vertices(poly)  # the full alphabet always contains P_X
        a = solve_column_lp(V, poly.target, "bfs")
        b = solve_column_lp(V, poly.target, "highs")
        assert a.objective == pytest.approx(b.objective, abs=1e-9)
        for lp in (a, b):
            np.testing.assert_allclose(lp.beta @ V, poly.target, atol=1e-9)
            assert lp.beta.min() >= 0
            assert sum(lp.beta) == pytest.approx(1, abs=1e-9)


class TestAorr:
    def test_unbounded_identity(self, canonical):
        rep = aorr(canonical)
        assert rep.nmi == 1.0
        assert np.allclose(rep.channel.probs, np.eye(3))

    def test_canonical(self, canonical):
        rep = aorr(canonical, B06)
        assert rep.satisfied
        assert rep.nmi > 0.6180656 + 1e-3
        assert rep.max_lift_leak <= 0.6 + 1e-9 and rep.min_lift_leak <= 0.6 + 1e-9

    def test_cap(self):
        with pytest.raises(CapExceeded):
            aorr(sample_random_joint(2, 13, 0), B06)

    @given(joints(min_s=2, min_x=2, max_x=6), budgets)
    def test_feasible_and_marginal_preserving(self, j, eps):
        b = Budget(*eps)
        rep = aorr(j, b)
        assert rep.satisfied
        assert bool(alip_satisfied(lift_table(compose_channel(j, rep.channel)), b))
        np.testing.assert_allclose(j.p_col @ rep.channel.probs, rep.joint_sy.p_col, atol=1e-12)
        p_xy = j.p_col[:, None] * rep.channel.probs
        assert rep.utility_mi == pytest.approx(oracles.mi(p_xy.tolist()), abs=1e-9)
        sub = subset_merge_mechanism(j, ALIP, b)
        if sub.satisfied:  # a non-compliant watchdog channel is not a competitor
            assert rep.utility_mi >= sub.utility_mi - 1e-9

    @given(joints(min_s=2, min_x=2, max_x=5), budgets, st.floats(1.0, 2.0))
    def test_budget_monotone(self, j, eps, scale):
        small = aorr(j, Budget(*eps))
        large = aorr(j, Budget(eps[0] * scale, eps[1] * scale))
        assert large.utility_mi >= small.utility_mi - 1e-9


class TestSrr:
    def test_no_high_risk_is_identity(self):
        j = product_joint([0.5, 0.5], [0.3, 0.7])
        rep = srr(j, ALIP, B06)
        assert np.array_equal(rep.channel.probs, np.eye(2))

    def test_canonical(self, canonical):
        rep = srr(canonical, ALIP, B06)
        assert rep.partition.effective_groups == ((0, 2),)
        assert rep.satisfied
        assert rep.nmi >= 0.6180656 - 1e-9
        assert rep.nmi <= aorr(canonical, B06).nmi + 1e-8

    @given(joints(min_s=2, min_x=2, max_x=7), budgets)
    def test_sandwich(self, j, eps):
        b = Budget(*eps)
        sub = subset_merge_mechanism(j, ALIP, b)
        mid = srr(j, ALIP, b)
        top = aorr(j, b)
        np.testing.assert_allclose(j.probs @ mid.channel.probs, mid.joint_sy.probs, atol=1e-12)
        if sub.satisfied:
            assert mid.satisfied
            assert sub.nmi <= mid.nmi + 1e-9
            assert mid.nmi <= top.nmi + 1e-8
        else:
            # only a lone violating symbol defeats merging; SRR then hands back the same channel
            assert mid.info["fallback"]
            assert np.array_equal(mid.channel.probs, sub.channel.probs)

    @given(joints(min_s=2, min_x=2, max_x=6), budgets, st.sampled_from(["ldp", "lip", "ell1", "chi2", "alpha-lift"]))
    def test_other_kinds_stay_within_budget(self, j, eps, name):
        kind = MeasureKind.parse(name, 2.0)
        b = Budget(*eps)
        rep = srr(j, kind, b)
        sub = subset_merge_mechanism(j, kind, b)
        if sub.satisfied:
            assert rep.satisfied

    def test_blocks_are_randomization_pairs(self):
        j = sample_random_joint(4, 9, 3)
        rep = srr(j, ALIP, Budget.from_ldp(1.5, 0.5))
        p_x = j.p_col
        for blk in rep.info["blocks"]:
            np.testing.assert_allclose(blk.Q.sum(axis=0), 1, atol=1e-12)
            np.testing.assert_allclose(blk.Q @ blk.q, p_x[list(blk.subset)], atol=1e-9)
            assert np.all(blk.q > 0)
