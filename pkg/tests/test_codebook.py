import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from oracles import prox_objective, prox_oracle, single_codeword_bruteforce

from shl.codebook import (
    Assignment,
    Codebook,
    aggregated_prox,
    assign,
    codeword_objective,
    dbar,
    dbar_table,
    hinge_subgradient,
    init_codebook,
    optimize_codewords,
    optimize_codewords_single,
    prox_pair,
    quantize,
    surrogate_loss,
    within_class_distances,
)
from shl.errors import InputError

vec8 = arrays(float, 8, elements=st.floats(-3, 3))


# dbar / surrogate ---------------------------------------------------------

def test_dbar_examples():
    assert dbar([2, 2], [1, 1]) == 0.0
    assert dbar([0, 0], [1, -1]) == 2.0
    assert dbar([0.5, -3], [1, 1]) == pytest.approx(4.5)


def test_dbar_length_mismatch():
    with pytest.raises(InputError):
        dbar([1, 2], [1, 1, 1])


def test_quantize_zero_is_positive():
    np.testing.assert_array_equal(quantize([-0.1, 0.0, 2.0]), [-1, 1, 1])


def test_surrogate_loss_examples():
    book = Codebook([[[1.0, 1.0]]])
    one = Assignment([0], [0])
    assert surrogate_loss([[3.0, 1.0]], book, one) == 0.0
    assert surrogate_loss([[0.0, 0.0]], book, one) == 2.0
    two = Assignment([0, 0], [0, 0])
    assert surrogate_loss([[2.0, 2.0], [0.5, -3.0]], book, two) == pytest.approx(4.5)


def test_surrogate_loss_uses_quantized_codewords():
    book = Codebook([[[0.3, -0.2]]])
    assert surrogate_loss([[1.0, -1.0]], book, Assignment([0], [0])) == 0.0


def test_surrogate_loss_shape_checks():
    book = Codebook([[[1.0, 1.0]]])
    with pytest.raises(InputError):
        surrogate_loss([[0.0, 0.0, 0.0]], book, Assignment([0], [0]))
    with pytest.raises(InputError):
        surrogate_loss([[0.0, 0.0]], book, Assignment([1], [0]))


@settings(max_examples=1000, deadline=None)
@given(
    f=arrays(float, 6, elements=st.floats(-5, 5)),
    mu=arrays(float, 6, elements=st.sampled_from([-1.0, 1.0])),
)
def test_surrogate_bounds_hamming(f, mu):
    hamming = int(np.sum(quantize(f) != mu))
    assert hamming <= dbar(f, mu)


# assignment ---------------------------------------------------------------

def test_assign_single_slot_labeled():
    book = init_codebook(3, 1, 4, 0)
    F = np.random.default_rng(0).normal(size=(5, 4))
    labels = np.array([2, 0, 1, 1, 0])
    a = assign(F, book, labels)
    np.testing.assert_array_equal(a.cls, labels)
    np.testing.assert_array_equal(a.slot, 0)


def test_assign_unlabeled_picks_nearest_class():
    book = Codebook([[[1.0, 1.0]], [[-1.0, -1.0]]])
    a = assign([[2.0, 2.0]], book, None)
    assert (a.cls[0], a.slot[0]) == (0, 0)
    assert dbar([2, 2], [-1, -1]) == 6.0


def test_assign_labeled_best_slot():
    book = Codebook([[[1.0, 1.0], [1.0, -1.0]]])
    a = assign([[0.5, -0.2]], book, [0])
    assert a.slot[0] == 1
    assert dbar([0.5, -0.2], [1, 1]) == pytest.approx(1.7)
    assert dbar([0.5, -0.2], [1, -1]) == pytest.approx(1.3)


def test_assign_ties_go_to_smallest_index():
    book = Codebook([[[1.0, 1.0]], [[-1.0, -1.0]]])
    a = assign([[0.0, 0.0]], book, [-1])
    assert a.cls[0] == 0


def test_assign_label_out_of_range():
    book = Codebook([[[1.0]]])
    with pytest.raises(InputError):
        assign([[0.0]], book, [3])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), S=st.integers(1, 3), labeled=st.booleans())
def test_assign_is_minimal(seed, S, labeled):
    rng = np.random.default_rng(seed)
    C, B, n = 3, 5, 20
    book = Codebook(rng.normal(size=(C, S, B)))
    F = rng.normal(scale=2, size=(n, B))
    labels = rng.integers(-1, C, size=n) if labeled else None
    a = assign(F, book, labels)
    D = dbar_table(F, book.quantized)
    chosen = D[np.arange(n), a.cls, a.slot]
    for i in range(n):
        lab = -1 if labels is None else labels[i]
        pool = D[i, lab] if lab >= 0 else D[i].ravel()
        assert chosen[i] <= pool.min()


# prox ---------------------------------------------------------------------

def test_prox_coincident_points():
    for eta in (1e-3, 1.0, 50.0):
        a, b = prox_pair([1.0, 1.0], [1.0, 1.0], eta)
        np.testing.assert_array_equal(a, [1, 1])
        np.testing.assert_array_equal(b, [1, 1])


def test_prox_large_eta_merges_to_midpoint():
    a, b = prox_pair([1.0, 0.0], [0.0, 1.0], 10.0)
    np.testing.assert_allclose(a, [0.5, 0.5])
    np.testing.assert_allclose(b, [0.5, 0.5])


def test_prox_small_eta_example():
    a, b = prox_pair([1.0, 0.0], [0.0, 1.0], 0.2)
    shift = 0.2 / np.sqrt(2)
    np.testing.assert_allclose(a, [1 - shift, shift], atol=1e-12)
    np.testing.assert_allclose(b, [shift, 1 - shift], atol=1e-12)
    np.testing.assert_allclose(a, [0.85858, 0.14142], atol=1e-5)
    oa, ob = prox_oracle(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.2)
    np.testing.assert_allclose(a, oa, atol=1e-6)
    np.testing.assert_allclose(b, ob, atol=1e-6)


def test_prox_rejects_nonpositive_eta():
    with pytest.raises(InputError):
        prox_pair([1.0], [0.0], 0.0)
    with pytest.raises(InputError):
        prox_pair([1.0], [0.0, 1.0], 1.0)


@settings(max_examples=30, deadline=None)
@given(vi=vec8, vj=vec8, eta=st.floats(0.01, 3.0))
def test_prox_matches_oracle(vi, vj, eta):
    a, b = prox_pair(vi, vj, eta)
    oa, ob = prox_oracle(vi, vj, eta)
    assert prox_objective(a, b, vi, vj, eta) <= prox_objective(oa, ob, vi, vj, eta) + 1e-9
    np.testing.assert_allclose(a, oa, atol=1e-5)
    np.testing.assert_allclose(b, ob, atol=1e-5)


@settings(max_examples=100, deadline=None)
@given(vi=vec8, vj=vec8, wi=vec8, wj=vec8, eta=st.floats(0.01, 3.0))
def test_prox_nonexpansive(vi, vj, wi, wj, eta):
    p = np.concatenate(prox_pair(vi, vj, eta))
    q = np.concatenate(prox_pair(wi, wj, eta))
    v = np.concatenate([vi, vj])
    w = np.concatenate([wi, wj])
    assert np.linalg.norm(p - q) <= np.linalg.norm(v - w) + 1e-12


def test_aggregated_prox_identity_for_single_slot():
    v = np.random.default_rng(0).normal(size=(2, 1, 3))
    np.testing.assert_array_equal(aggregated_prox(v, 5.0), v)


def test_aggregated_prox_two_slots_equals_pair_prox():
    v = np.random.default_rng(1).normal(size=(2, 2, 4))
    out = aggregated_prox(v, 0.3)
    for c in range(2):
        a, b = prox_pair(v[c, 0], v[c, 1], 0.3)
        np.testing.assert_allclose(out[c, 0], a)
        np.testing.assert_allclose(out[c, 1], b)


def test_aggregated_prox_three_slots_averages_pairs():
    v = np.random.default_rng(2).normal(size=(1, 3, 4))
    out = aggregated_prox(v, 0.2)
    p01 = prox_pair(v[0, 0], v[0, 1], 0.2)
    p02 = prox_pair(v[0, 0], v[0, 2], 0.2)
    p12 = prox_pair(v[0, 1], v[0, 2], 0.2)
    np.testing.assert_allclose(out[0, 0], (p01[0] + p02[0] + v[0, 0]) / 3)
    np.testing.assert_allclose(out[0, 2], (p02[1] + p12[1] + v[0, 2]) / 3)


def test_aggregated_prox_fixed_point():
    v = np.tile(np.array([0.3, -1.0, 2.0]), (2, 4, 1))
    np.testing.assert_allclose(aggregated_prox(v, 1.0), v)


# subgradient --------------------------------------------------------------

def test_hinge_subgradient_examples():
    mu = np.ones((2, 1, 1))
    grad = hinge_subgradient([[2.0]], Assignment([0], [0]), mu)
    assert grad[0, 0, 0] == 0.0
    assert np.all(grad[1] == 0.0)
    grad = hinge_subgradient([[0.5]], Assignment([0], [0]), mu)
    assert grad[0, 0, 0] == pytest.approx(-0.5)


def test_hinge_subgradient_finite_difference():
    rng = np.random.default_rng(3)
    F = rng.normal(scale=2, size=(30, 4))
    a = Assignment(rng.integers(0, 2, 30), rng.integers(0, 3, 30))
    mu = rng.normal(size=(2, 3, 4))
    grad = hinge_subgradient(F, a, Codebook(mu))
    h = 1e-5
    for idx in np.ndindex(mu.shape):
        up, dn = mu.copy(), mu.copy()
        up[idx] += h
        dn[idx] -= h
        fd = (codeword_objective(F, a, up, 0.0) - codeword_objective(F, a, dn, 0.0)) / (2 * h)
        assert grad[idx] == pytest.approx(fd, abs=1e-6)


# codeword optimization ----------------------------------------------------

def test_single_slot_is_plain_subgradient_step():
    F = np.array([[0.5, -0.5], [0.2, 0.1]])
    a = Assignment([0, 0], [0, 0])
    book = Codebook([[[0.0, 0.0]]])
    new, report = optimize_codewords(F, a, book, lambda2=1e6, eta=0.1, iters=1)
    expected = book.mu - 0.1 * hinge_subgradient(F, a, book)
    np.testing.assert_allclose(new.mu, expected)
    assert report["status"] == "ok"


def test_huge_penalty_collapses_slots_to_mean():
    F = np.zeros((0, 3))
    a = Assignment([], [])
    mu = np.array([[[1.0, -1.0, 1.0], [-1.0, -1.0, 0.0]]])
    new, _ = optimize_codewords(F, a, Codebook(mu), lambda2=1e6, eta=0.1, iters=1)
    np.testing.assert_allclose(new.mu[0, 0], mu[0].mean(axis=0))
    np.testing.assert_allclose(new.mu[0, 1], mu[0].mean(axis=0))


def test_pair_moves_by_threshold():
    mu = np.array([[[1.0, 1.0], [1.0, -1.0]]])
    F = np.array([[5.0, 5.0], [5.0, -5.0]])
    a = Assignment([0, 0], [0, 1])
    new, _ = optimize_codewords(F, a, Codebook(mu), lambda2=4.0, eta=0.1, iters=1)
    np.testing.assert_allclose(new.mu[0, 0], [1.0, 0.6], atol=1e-12)
    np.testing.assert_allclose(new.mu[0, 1], [1.0, -0.6], atol=1e-12)
    assert np.linalg.norm(new.mu[0, 0] - new.mu[0, 1]) == pytest.approx(2 - 2 * 0.4)


def test_inactive_classes_untouched():
    rng = np.random.default_rng(4)
    F = rng.normal(size=(10, 3))
    a = Assignment(np.zeros(10), rng.integers(0, 2, 10))
    book = Codebook(rng.normal(size=(2, 2, 3)))
    new, _ = optimize_codewords(F, a, book, lambda2=1.0, active=[True, False])
    np.testing.assert_array_equal(new.mu[1], book.mu[1])


def test_optimize_codewords_argument_checks():
    book = Codebook(np.ones((1, 2, 2)))
    a = Assignment([0], [0])
    with pytest.raises(InputError):
        optimize_codewords([[1.0, 1.0]], a, book, lambda2=-1)
    with pytest.raises(InputError):
        optimize_codewords([[1.0, 1.0]], a, book, lambda2=1, eta=0)
    with pytest.raises(InputError):
        optimize_codewords([[1.0, 1.0]], a, book, lambda2=1, iters=0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), S=st.integers(1, 3), lam=st.sampled_from([0.0, 0.5, 20.0, 2000.0]))
def test_codeword_step_never_increases_objective(seed, S, lam):
    rng = np.random.default_rng(seed)
    F = rng.normal(scale=1.5, size=(25, 4))
    a = Assignment(rng.integers(0, 2, 25), rng.integers(0, S, 25))
    book = Codebook(rng.normal(size=(2, S, 4)))
    new, report = optimize_codewords(F, a, book, lambda2=lam, iters=10)
    before = codeword_objective(F, a, book.mu, lam)
    after = codeword_objective(F, a, new.mu, lam)
    assert after <= before + 1e-8 * max(1.0, before)
    assert report["objective_after"] == pytest.approx(after)


def test_single_example_positive():
    F = np.array([[2.0], [-0.5], [3.0]])
    book, empty = optimize_codewords_single(F, Assignment([0, 0, 0], [0, 0, 0]), 1, 1)
    assert book.mu[0, 0, 0] == 1.0
    assert not empty[0]


def test_single_all_negative_and_empty_class():
    F = np.array([[-1.0], [-4.0]])
    book, empty = optimize_codewords_single(F, Assignment([1, 1], [0, 0]), 2, 1)
    assert book.mu[1, 0, 0] == -1.0
    assert book.mu[0, 0, 0] == 1.0 and empty[0] and not empty[1]


def test_single_rejects_nonzero_slots():
    with pytest.raises(InputError):
        optimize_codewords_single([[0.0]], Assignment([0], [1]), 1, 1)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), C=st.integers(1, 3), B=st.integers(1, 4))
def test_single_matches_enumeration(seed, C, B):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 12))
    F = np.round(rng.normal(scale=1.5, size=(n, B)), 1)
    cls = rng.integers(0, C, n)
    book, _ = optimize_codewords_single(F, Assignment(cls, np.zeros(n)), C, B)
    best, minimizers = single_codeword_bruteforce(F, cls, C)
    value = np.maximum(0.0, 1.0 - book.mu[cls, 0] * F).sum()
    assert value == pytest.approx(best, abs=1e-12)
    assert any(np.array_equal(book.mu[:, 0], m) for m in minimizers)


# initialization and reporting ---------------------------------------------

@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), C=st.integers(1, 6), S=st.integers(1, 3), B=st.integers(3, 8))
def test_init_codewords_distinct_across_classes(seed, C, S, B):
    book = init_codebook(C, S, B, seed)
    q = book.quantized
    assert set(np.unique(q)) <= {-1.0, 1.0}
    for c in range(C):
        for d in range(C):
            if c != d:
                for s in range(S):
                    assert not np.any(np.all(q[d] == q[c, s], axis=1))


def test_init_codebook_deterministic():
    np.testing.assert_array_equal(init_codebook(3, 2, 5, 7).mu, init_codebook(3, 2, 5, 7).mu)


def test_init_codebook_impossible_still_returns():
    book = init_codebook(5, 1, 2, 0)  # only 4 distinct 2-bit codewords exist
    assert book.mu.shape == (5, 1, 2)


def test_within_class_distances():
    book = Codebook([[[1, 1, 1], [1, -1, -1], [1, 1, -1]]])
    np.testing.assert_array_equal(within_class_distances(book), [[2, 1, 1]])
