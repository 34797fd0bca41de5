"""Tests for kernels, the multiplier-norm SDP, and witness builders."""

import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schurmult.errors import (
    ConvergenceError,
    MaxIterExceededError,
    NotBipartiteError,
    RayTooShortError,
    StructureViolationError,
    TailBoundExceededError,
)
from schurmult.hankel import build_multiradial_T, radial_lift
from schurmult.medgraph import (
    attach_ray,
    graph_from_edges,
    median_complex,
    product_graph,
    tree_ball,
)
from schurmult.mlab import (
    ball_product,
    cb_norm_sdp,
    median_witness,
    multiradial_kernel,
    polar_factor,
    radial_kernel,
    raw_kernel,
    recombined_bound,
    sandwich_check,
    separable_multiradial_T,
    split_radial,
    tree_product_witness,
)
from schurmult.serialize import cb_result_to_json, witness_to_json
from schurmult.symbols import (
    alternating_power,
    discrete_derivative,
    DerivativeSpec,
    from_function,
    from_table,
    geometric,
    parity,
    power,
)


def glued(graph, at=0, length=24):
    g, ray = attach_ray(graph, at, length)
    return median_complex(g, ray)


# ---------------------------------------------------------------- kernels


def test_radial_kernel_entries():
    ball = tree_ball(2, 2)
    kern = radial_kernel(ball.graph, geometric(0.5))
    g = ball.graph
    for x in range(g.size):
        for y in range(g.size):
            assert kern.matrix[x, y] == pytest.approx(0.5 ** g.distance(x, y))
    assert kern.provenance["kind"] == "radial"
    assert kern.matrix.dtype == np.float64


def test_multiradial_kernel_against_entrywise_oracle():
    bp = ball_product([tree_ball(2, 2), tree_ball(2, 1)])
    kern = multiradial_kernel(bp, lambda d: 0.5 ** d[0] * 0.25 ** d[1])
    g1, g2 = tree_ball(2, 2).graph, tree_ball(2, 1).graph
    n2 = g2.size
    for a in (0, 3, 7, 19):
        for b in (1, 5, 12, 20):
            x1, x2 = divmod(a, n2)
            y1, y2 = divmod(b, n2)
            want = 0.5 ** g1.distance(x1, y1) * 0.25 ** g2.distance(x2, y2)
            assert kern.matrix[a, b] == pytest.approx(want, abs=1e-12)
    # a radial symbol acts through the summed distance
    kern2 = multiradial_kernel(bp, geometric(0.5))
    x1, x2 = divmod(7, n2)
    y1, y2 = divmod(12, n2)
    s = g1.distance(x1, y1) + g2.distance(x2, y2)
    assert kern2.matrix[7, 12] == pytest.approx(0.5 ** s)


def test_raw_kernel_validates_shape():
    g = tree_ball(2, 1).graph
    with pytest.raises(ValueError):
        raw_kernel(g, np.eye(g.size + 1))
    assert raw_kernel(g, np.eye(g.size)).size == g.size


# ---------------------------------------------------------------- factors


def test_polar_factor_diagonal_and_rank_one():
    a, b = polar_factor(np.diag([4.0]))
    assert np.linalg.norm(a) * np.linalg.norm(b) == pytest.approx(4.0)
    f = np.array([1.0, 2.0, 2.0])
    g = np.array([3.0, 0.0, 4.0])
    a, b = polar_factor(np.outer(f, g))
    # trace norm of a rank-one outer product is the product of 2-norms
    assert np.linalg.norm(a) * np.linalg.norm(b) == pytest.approx(15.0)


def test_polar_factor_reproduces_complex_matrix():
    rng = np.random.default_rng(2)
    M = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    a, b = polar_factor(M)
    assert np.abs(a.conj().T @ b - M).max() < 1e-12
    tn = np.linalg.svd(M, compute_uv=False).sum()
    assert np.linalg.norm(a) * np.linalg.norm(b) == pytest.approx(tn)


def test_split_radial_recovers_parity_parts():
    sym = from_function(lambda d: 0.3 + 0.2 * (-1) ** d + 0.5 ** d,
                        name="MIXED", real=True)
    centered, cp, cm = split_radial(sym)
    assert cp == pytest.approx(0.3, abs=1e-9)
    assert cm == pytest.approx(0.2, abs=1e-9)
    assert centered(0) == pytest.approx(1.0, abs=1e-9)
    assert centered(9) == pytest.approx(0.5 ** 9, abs=1e-9)


def test_split_radial_refuses_slow_symbols():
    with pytest.raises(ConvergenceError):
        split_radial(power(0.5))


def test_recombined_bound_adds_limit_norms():
    ball = tree_ball(2, 3)
    T = separable_multiradial_T([geometric(0.5)], cutoff=40)
    w = tree_product_witness([ball], geometric(0.5), T, j_tail=36)
    total = recombined_bound(ball.graph, w, 0.3, -0.2)
    assert total == pytest.approx(w.certified + 0.5)
    triangle = graph_from_edges(["a", "b", "c"], [(0, 1), (1, 2), (0, 2)])
    with pytest.raises(NotBipartiteError):
        recombined_bound(triangle, w, 0.3, -0.2)


# ---------------------------------------------------------------- SDP


def test_cb_norm_all_ones_and_parity():
    res = cb_norm_sdp(np.ones((6, 6)), tol=1e-6)
    assert res.lower == pytest.approx(1.0, abs=1e-6)
    assert res.upper == pytest.approx(1.0, abs=1e-6)
    n = 7
    P = np.array([[(-1.0) ** abs(i - j) for j in range(n)] for i in range(n)])
    res = cb_norm_sdp(P, tol=1e-6)
    assert res.lower == pytest.approx(1.0, abs=1e-6)
    assert res.upper == pytest.approx(1.0, abs=1e-6)


def test_cb_norm_rank_one():
    rng = np.random.default_rng(0)
    for _ in range(3):
        u = rng.normal(size=5)
        v = rng.normal(size=5)
        want = np.abs(u).max() * np.abs(v).max()
        res = cb_norm_sdp(np.outer(u, v), tol=1e-6)
        assert res.lower == pytest.approx(want, abs=1e-6)
        assert res.upper == pytest.approx(want, abs=1e-6)
        assert res.upper >= res.lower


def test_cb_norm_needs_dual_floor():
    # max entry 1, true norm sqrt(2): the lower side must come from a separator
    res = cb_norm_sdp(np.array([[1.0, 1.0], [1.0, -1.0]]), tol=1e-6)
    assert res.lower == pytest.approx(math.sqrt(2), abs=1e-6)
    assert res.upper == pytest.approx(math.sqrt(2), abs=1e-6)


def test_cb_norm_witness_reproduces_kernel():
    rng = np.random.default_rng(4)
    B = np.outer(rng.normal(size=4), rng.normal(size=4))
    res = cb_norm_sdp(B, tol=1e-6)
    w = res.witness
    assert np.abs(w.p_rows @ w.q_rows.conj().T - B).max() <= 1e-8
    sp = np.sqrt((np.abs(w.p_rows) ** 2).sum(axis=1).max())
    sq = np.sqrt((np.abs(w.q_rows) ** 2).sum(axis=1).max())
    assert sp * sq <= w.certified + 1e-10
    assert res.upper == w.certified


def test_cb_norm_zero_and_shape_guard():
    res = cb_norm_sdp(np.zeros((4, 4)))
    assert res.lower == res.upper == 0.0
    with pytest.raises(ValueError):
        cb_norm_sdp(np.ones((3, 4)))


def test_cb_norm_restriction_monotone():
    rng = np.random.default_rng(3)
    for _ in range(4):
        m = int(rng.integers(3, 7))
        B = rng.normal(size=(m, m))
        keep = sorted(rng.choice(m, size=m - 1, replace=False))
        full = cb_norm_sdp(B, tol=1e-6)
        part = cb_norm_sdp(B[np.ix_(keep, keep)], tol=1e-6)
        assert part.lower <= full.upper + 2e-6
        assert full.lower >= np.abs(B).max() - 1e-9


def test_cb_norm_budget_error_carries_bracket():
    rng = np.random.default_rng(8)
    B = rng.normal(size=(5, 5))
    with pytest.raises(MaxIterExceededError) as exc:
        cb_norm_sdp(B, tol=0.0, max_iter=5)
    lo, hi = exc.value.bracket
    assert np.abs(B).max() - 1e-9 <= lo <= hi


def test_cb_result_serialization():
    res = cb_norm_sdp(np.ones((3, 3)), tol=1e-6)
    d = json.loads(cb_result_to_json(res))
    assert d["upper"] == pytest.approx(1.0, abs=1e-6)
    assert "p_rows" not in d["witness"]
    d2 = json.loads(cb_result_to_json(res, include_rows=True))
    assert len(d2["witness"]["p_rows"]) == 3
    lone = json.loads(witness_to_json(res.witness))
    assert lone["certified"] == pytest.approx(res.upper)


# ---------------------------------------------------------------- sections


def test_separable_matches_generic_builder():
    sym = geometric(0.4)
    A = separable_multiradial_T([sym, sym], cutoff=6).as_numeric()
    B = build_multiradial_T(radial_lift(sym), dim=2, cutoff=6).as_numeric()
    assert A.shape == B.shape
    assert np.abs(A - B).max() < 1e-12


def test_separable_exact_entries_are_rational():
    sym = from_table([Fraction(1), Fraction(1, 2), Fraction(1, 4)], tail="ZERO")
    T = separable_multiradial_T([sym], cutoff=4, exact=True)
    step2 = DerivativeSpec(2, 1)
    assert T.entries[0, 0] == discrete_derivative(sym, step2, 0)
    assert isinstance(T.entries[0, 0], Fraction)


@settings(deadline=None, max_examples=40)
@given(st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=8),
                min_size=1, max_size=6))
def test_rational_telescoping_exact(vals):
    # summing the step-2 increments walks the symbol down to zero exactly
    sym = from_table(vals, tail="ZERO")
    step2 = DerivativeSpec(2, 1)
    for s in range(len(vals) + 2):
        total = sum(discrete_derivative(sym, step2, s + 2 * j)
                    for j in range((len(vals) + 4) // 2 + 1))
        assert total == sym(s)


# ---------------------------------------------------------------- witnesses


def test_tree_witness_geometric_line():
    sym = geometric(0.5)
    T = separable_multiradial_T([sym], cutoff=40)
    w = tree_product_witness([tree_ball(2, 3)], sym, T, j_tail=36)
    # rank-one increments: truncated trace norm is 1 - r^(2(cutoff+1))
    assert w.certified == pytest.approx(1.0 - 0.5 ** 82, abs=1e-10)
    assert w.reproduction_error <= w.tail_bound + 1e-9
    assert w.tail_bound < 1e-6


def test_tree_witness_product_of_geometrics():
    s1, s2 = geometric(0.5), geometric(0.3)
    T = separable_multiradial_T([s1, s2], cutoff=24)
    w = tree_product_witness([tree_ball(2, 2), tree_ball(2, 2)],
                             lambda d: s1(d[0]) * s2(d[1]), T, j_tail=20)
    assert w.certified == pytest.approx(1.0, abs=1e-9)
    assert w.reproduction_error <= w.tail_bound + 1e-9


def test_tree_witness_finite_support_exact():
    fin = from_table([1.0, 0.5, 0.25, 0.125], tail="ZERO", name="FIN")
    T = separable_multiradial_T([fin, fin], cutoff=12)
    w = tree_product_witness([tree_ball(2, 2), tree_ball(2, 2)],
                             lambda d: fin(d[0]) * fin(d[1]), T, j_tail=10)
    assert w.tail_bound <= 1e-10
    assert w.reproduction_error <= 1e-10


def test_tree_witness_rejects_uncentered_symbol():
    sym = from_function(lambda d: 0.5 + 0.5 ** d, name="SHIFTED", real=True)
    T = separable_multiradial_T([geometric(0.5)], cutoff=20)
    with pytest.raises(ValueError, match="split_radial"):
        tree_product_witness([tree_ball(2, 2)], sym, T, j_tail=16)


def test_tree_witness_refuses_fat_tail():
    sym = geometric(0.5)
    T = separable_multiradial_T([sym], cutoff=40)
    with pytest.raises(TailBoundExceededError):
        tree_product_witness([tree_ball(2, 3)], sym, T, j_tail=2)


def test_median_witness_product_complex():
    cx = glued(product_graph([tree_ball(2, 2).graph] * 2))
    w = median_witness(cx, geometric(0.5), K=12)
    assert w.reproduction_error <= w.tail_bound + 1e-9
    # worst cell tail: r^(2K - 2 mx + s), bounded by r^(2K - diam)
    assert w.tail_bound <= 2e-6
    assert w.certified >= 1.0
    again = median_witness(cx, geometric(0.5), K=12, membership_check=False)
    assert again.certified == pytest.approx(w.certified)


def test_median_witness_degenerate_tree():
    cx = glued(tree_ball(2, 2).graph, length=28)
    w = median_witness(cx, geometric(0.5), K=14)
    # collapses to the one-variable table: trace norm 1 - r^(2K)
    assert w.certified == pytest.approx(1.0 - 0.5 ** 28, abs=1e-9)


def test_median_witness_finite_symbol_zero_tail():
    cx = glued(tree_ball(2, 2).graph, length=28)
    fin = from_table([1.0, 0.5, 0.25, 0.125, 0.0625], tail="ZERO", name="FIN5")
    w = median_witness(cx, fin, K=14)
    assert w.tail_bound == 0.0
    assert w.reproduction_error <= 1e-10


def test_median_witness_guards():
    cx = glued(tree_ball(2, 2).graph, length=8)
    with pytest.raises(RayTooShortError):
        median_witness(cx, geometric(0.5), K=12)
    with pytest.raises(ConvergenceError):
        median_witness(glued(tree_ball(2, 2).graph), power(0.5), K=8)


# ---------------------------------------------------------------- sandwich


def test_sandwich_parity_is_pure_limit():
    rep = sandwich_check(parity(), degrees=(3,), radius=2, sdp_tol=1e-5)
    assert abs(rep.hankel_norm) <= 1e-12
    assert abs(rep.c_plus) <= 1e-12
    assert abs(rep.c_minus) == pytest.approx(1.0)
    for row in rep.rows:
        assert row.cb_upper == pytest.approx(1.0, abs=1e-4)


def test_sandwich_geometric_three_regular():
    rep = sandwich_check(geometric(0.5), degrees=(3,), radius=3, sdp_tol=1e-4)
    prev = 0.0
    for row in rep.rows:
        assert row.cb_upper <= row.ceiling + 1e-4
        assert row.cb_upper >= prev - 2e-4
        prev = row.cb_upper
    assert rep.rows[-1].floor_report == pytest.approx(rep.hankel_norm / 3, abs=1e-9)


def test_sandwich_alternating_power_product():
    rep = sandwich_check(alternating_power(1.5), degrees=(3, 3), radius=1,
                         sdp_tol=1e-3)
    assert rep.hankel_verdict == "CONVERGENT"
    assert rep.rows[0].cb_upper <= rep.rows[0].ceiling + 1e-3


def test_sandwich_rejects_bad_degrees():
    with pytest.raises(ValueError):
        sandwich_check(geometric(0.5), degrees=(2,), radius=2)
    with pytest.raises(ValueError):
        sandwich_check(geometric(0.5), degrees=(3,), radius=0)
