import itertools

import numpy as np
import pytest

from dwlan.matching import (
    DEFAULT_UNSERVABLE,
    Matching,
    WeightMatrix,
    add_vertex,
    pad_and_replicate,
    solve,
    update_weights,
)

TOL = 1e-9


def brute_force_max(w: np.ndarray) -> float:
    n, m = w.shape
    if n > m:
        return brute_force_max(w.T)
    best = -np.inf
    for perm in itertools.permutations(range(m), n):
        s = sum(w[i, perm[i]] for i in range(n))
        best = max(best, s)
    return best


def brute_force_capped(w: np.ndarray, cap: int) -> float:
    """Best assignment of every row to a column with per-column cap."""
    n, m = w.shape
    best = -np.inf
    for choice in itertools.product(range(m), repeat=n):
        counts = [0] * m
        ok = True
        for j in choice:
            counts[j] += 1
            if counts[j] > cap:
                ok = False
                break
        if not ok:
            continue
        best = max(best, sum(w[i, choice[i]] for i in range(n)))
    return best


def assert_certified(m: Matching, tol: float = TOL):
    scale = max(1.0, float(np.abs(m.weights).max())) if m.weights.size else 1.0
    assert m.dual_violation() <= tol * scale
    assert m.slackness_violation() <= tol * scale


def test_all_zero_matrix_perfect_matching():
    m = solve(np.zeros((3, 3)))
    assert m.objective == 0.0
    assert sorted(m.row_to_col.tolist()) == [0, 1, 2]
    assert_certified(m)


def test_two_by_two_hand_case():
    m = solve(np.array([[4.0, 1.0], [2.0, 3.0]]))
    assert m.objective == 7.0
    assert m.row_to_col.tolist() == [0, 1]
    assert_certified(m)


def test_rejects_nonfinite():
    with pytest.raises(ValueError):
        solve(np.array([[1.0, np.inf], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        solve(np.array([[1.0, np.nan], [0.0, 1.0]]))


@pytest.mark.parametrize("trial", range(40))
def test_square_random_integer_optimality(trial):
    rng = np.random.default_rng(1000 + trial)
    n = int(rng.integers(2, 7))
    w = rng.integers(-50, 100, size=(n, n)).astype(float)
    m = solve(w)
    assert m.objective == brute_force_max(w)
    assert_certified(m)


@pytest.mark.parametrize("shape", [(2, 5), (5, 2), (3, 6), (6, 3), (4, 7)])
def test_rectangular_optimality(shape):
    rng = np.random.default_rng(hash(shape) % (2**32))
    for _ in range(20):
        w = rng.uniform(-10, 10, size=shape)
        m = solve(w)
        assert m.objective == pytest.approx(brute_force_max(w), abs=1e-9)
        matched_rows = int(np.sum(m.row_to_col >= 0))
        assert matched_rows == min(shape)
        assert_certified(m)


def test_shift_invariance_of_argmax():
    rng = np.random.default_rng(77)
    for _ in range(30):
        w = rng.uniform(0, 10, size=(5, 5))
        base = solve(w)
        shifted = w.copy()
        shifted[2] += 37.5
        again = solve(shifted)
        assert again.row_to_col.tolist() == base.row_to_col.tolist()


def test_pad_identity_when_square_capacity_one():
    w = np.array([[1.0, 2.0], [3.0, 4.0]])
    padded = pad_and_replicate(w, 1)
    assert np.array_equal(padded.values, w)
    assert padded.col_labels == ((0, 0), (1, 0))


def test_pad_shape_and_labels():
    w = np.arange(10, dtype=float).reshape(5, 2)
    padded = pad_and_replicate(w, 3)
    assert padded.values.shape == (6, 6)
    assert padded.col_labels == ((0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2))
    assert padded.row_labels[:5] == (0, 1, 2, 3, 4)
    assert padded.row_labels[5] == ("dummy", 0)
    # replicas of one AP carry identical base weights
    assert np.array_equal(padded.values[:5, 0], padded.values[:5, 1])
    assert np.all(padded.values[5] == DEFAULT_UNSERVABLE)


def test_pad_rejects_insufficient_capacity():
    with pytest.raises(ValueError):
        pad_and_replicate(np.zeros((5, 2)), 2)


@pytest.mark.parametrize("shape,cap", [((5, 2), 3), ((6, 3), 2)])
def test_capped_assignment_matches_exhaustive(shape, cap):
    rng = np.random.default_rng(shape[0] * 100 + cap)
    for _ in range(30):
        w = rng.uniform(0, 20, size=shape)
        padded = pad_and_replicate(w, cap)
        m = solve(padded)
        real = sum(w[i, padded.col_labels[m.row_to_col[i]][0]] for i in range(shape[0]))
        assert real == pytest.approx(brute_force_capped(w, cap), abs=1e-9)


def test_add_vertex_unservable_extension_preserves_matching():
    base = solve(np.array([[4.0, 1.0], [2.0, 3.0]]))
    ext = np.full((3, 3), DEFAULT_UNSERVABLE)
    ext[:2, :2] = base.weights
    m2 = add_vertex(base, ext)
    assert m2.row_to_col[:2].tolist() == base.row_to_col.tolist()
    assert_certified(m2, tol=1e-6)


def test_add_vertex_hand_case():
    base = solve(np.array([[4.0, 1.0], [2.0, 3.0]]))
    ext = np.zeros((3, 3))
    ext[:2, :2] = base.weights
    ext[2] = [9.0, 0.0, 0.0]
    m2 = add_vertex(base, ext)
    assert m2.objective == solve(ext).objective == brute_force_max(ext)
    assert_certified(m2)


def test_add_vertex_dimension_mismatch():
    base = solve(np.array([[4.0, 1.0], [2.0, 3.0]]))
    with pytest.raises(ValueError):
        add_vertex(base, np.zeros((4, 4)))
    bad = np.zeros((3, 3))
    bad[0, 0] = 99.0  # mangles the preserved block
    with pytest.raises(ValueError):
        add_vertex(base, bad)


def test_fifty_sequential_insertions_match_resolve():
    rng = np.random.default_rng(2024)
    w = rng.integers(0, 100, size=(4, 4)).astype(float)
    m = solve(w)
    for _ in range(50):
        n = w.shape[0]
        ext = np.empty((n + 1, n + 1))
        ext[:n, :n] = w
        ext[n, :] = rng.integers(0, 100, size=n + 1)
        ext[:n, n] = rng.integers(0, 100, size=n)
        m = add_vertex(m, ext)
        w = ext
        assert m.objective == solve(w).objective
        assert_certified(m)


def test_update_unchanged_returns_same_object():
    m = solve(np.array([[4.0, 1.0], [2.0, 3.0]]))
    same = update_weights(m, row=0, values=np.array([4.0, 1.0]))
    assert same is m


def test_update_row_hand_case():
    m = solve(np.array([[4.0, 1.0], [2.0, 3.0]]))
    m2 = update_weights(m, row=0, values=np.array([0.0, 9.0]))
    assert m2.objective == 11.0
    assert_certified(m2)


def test_update_identical_row_values_matching_unchanged():
    w = np.array([[5.0, 5.0, 1.0], [2.0, 3.0, 4.0], [1.0, 1.0, 1.0]])
    m = solve(w)
    m2 = update_weights(m, row=2, values=w[2].copy())
    assert m2 is m


@pytest.mark.parametrize("axis", ["row", "col"])
def test_hundred_random_single_line_updates(axis):
    rng = np.random.default_rng(99 if axis == "row" else 100)
    for trial in range(100):
        n = int(rng.integers(2, 9))
        w = rng.integers(-20, 80, size=(n, n)).astype(float)
        m = solve(w)
        line = int(rng.integers(0, n))
        new_vals = rng.integers(-20, 80, size=n).astype(float)
        if axis == "row":
            m2 = update_weights(m, row=line, values=new_vals)
            w2 = w.copy()
            w2[line] = new_vals
        else:
            m2 = update_weights(m, col=line, values=new_vals)
            w2 = w.copy()
            w2[:, line] = new_vals
        assert m2.objective == solve(w2).objective, f"trial {trial}"
        assert_certified(m2)


def test_update_requires_exactly_one_axis():
    m = solve(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        update_weights(m, values=np.zeros(2))
    with pytest.raises(ValueError):
        update_weights(m, row=0, col=0, values=np.zeros(2))


def test_weight_matrix_label_validation():
    with pytest.raises(ValueError):
        WeightMatrix(np.zeros((2, 2)), row_labels=(1,), col_labels=(1, 2))
    with pytest.raises(ValueError):
        WeightMatrix(np.array([[np.inf, 0.0], [0.0, 0.0]]))


def test_mixed_scale_with_unservable_entries():
    # Realistic pipeline mix: small utilities against the -1e12 sentinel.
    rng = np.random.default_rng(5)
    for _ in range(20):
        w = rng.uniform(5.0, 40.0, size=(4, 4))
        mask = rng.random((4, 4)) < 0.3
        w[mask] = DEFAULT_UNSERVABLE
        w[np.arange(4), rng.integers(0, 4, 4)] = rng.uniform(5.0, 40.0, 4)
        m = solve(w)
        assert m.objective == pytest.approx(brute_force_max(w), abs=1e-3)
