"""Maximum-weight bipartite assignment with incremental update stages.

The solver keeps explicit dual variables (one per row, one per column)
satisfying row_dual[i] + col_dual[j] >= w[i, j] everywhere with equality on
matched edges. Optimality then follows from complementary slackness, and a
single augmenting stage restores it after one row is freed. That single
stage is exactly what the vertex-insertion and weight-update entry points
run, which is what makes them O(n^2) instead of a fresh O(n^3) solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_UNSERVABLE = -1.0e12


@dataclass(frozen=True)
class WeightMatrix:
    """Dense edge-weight matrix with labels mapping back to node identities.

    ``row_labels`` are STA identities (or ("dummy", k) fillers), and
    ``col_labels`` are AP identities, (ap, slot) capacity replicas, or
    dummy fillers.
    """

    values: np.ndarray
    row_labels: tuple = ()
    col_labels: tuple = ()

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("weight matrix must be 2-D")
        if not np.all(np.isfinite(v)):
            raise ValueError("weight matrix entries must be finite")
        object.__setattr__(self, "values", v)
        if not self.row_labels:
            object.__setattr__(self, "row_labels", tuple(range(v.shape[0])))
        if not self.col_labels:
            object.__setattr__(self, "col_labels", tuple(range(v.shape[1])))
        if len(self.row_labels) != v.shape[0] or len(self.col_labels) != v.shape[1]:
            raise ValueError("label lengths must match matrix dimensions")


@dataclass(frozen=True)
class Matching:
    """An assignment plus the dual certificate it was proved optimal with."""

    weights: np.ndarray
    row_to_col: np.ndarray
    col_to_row: np.ndarray
    row_duals: np.ndarray
    col_duals: np.ndarray

    @property
    def objective(self) -> float:
        rows = np.nonzero(self.row_to_col >= 0)[0]
        return float(np.sum(self.weights[rows, self.row_to_col[rows]]))

    def dual_violation(self) -> float:
        """Max violation of row_dual + col_dual >= w (0 when feasible)."""
        gap = self.weights - self.row_duals[:, None] - self.col_duals[None, :]
        return float(max(gap.max(), 0.0))

    def slackness_violation(self) -> float:
        """Max |row_dual + col_dual - w| over matched edges."""
        rows = np.nonzero(self.row_to_col >= 0)[0]
        if rows.size == 0:
            return 0.0
        cols = self.row_to_col[rows]
        resid = self.row_duals[rows] + self.col_duals[cols] - self.weights[rows, cols]
        return float(np.abs(resid).max())


def _values_of(w) -> np.ndarray:
    if isinstance(w, WeightMatrix):
        return w.values
    v = np.asarray(w, dtype=float)
    if v.ndim != 2:
        raise ValueError("weight matrix must be 2-D")
    if not np.all(np.isfinite(v)):
        raise ValueError("weight matrix entries must be finite")
    return v


def _stage(
    w: np.ndarray,
    row_duals: np.ndarray,
    col_duals: np.ndarray,
    row_to_col: np.ndarray,
    col_to_row: np.ndarray,
    free_row: int,
) -> None:
    """Grow an alternating tree from ``free_row`` and augment once.

    Requires feasible duals and tight matched edges on entry; preserves
    both. Mutates all five arrays in place.
    """
    n, m = w.shape
    slack = row_duals[free_row] + col_duals - w[free_row]
    src = np.full(m, free_row, dtype=np.int64)
    visited = np.zeros(m, dtype=bool)
    tree_rows = np.zeros(n, dtype=bool)
    tree_rows[free_row] = True
    while True:
        masked = np.where(visited, np.inf, slack)
        j = int(np.argmin(masked))
        delta = masked[j]
        if not np.isfinite(delta):
            raise RuntimeError("no augmenting path; weights must be finite")
        if delta > 0.0:
            row_duals[tree_rows] -= delta
            col_duals[visited] += delta
            slack[~visited] -= delta
        visited[j] = True
        i = int(col_to_row[j])
        if i < 0:
            # Free column reached: flip the alternating path back to free_row.
            while j >= 0:
                i = int(src[j])
                prev = int(row_to_col[i])
                row_to_col[i] = j
                col_to_row[j] = i
                j = prev
            return
        tree_rows[i] = True
        cand = row_duals[i] + col_duals - w[i]
        upd = (~visited) & (cand < slack)
        slack[upd] = cand[upd]
        src[upd] = i


def solve(w) -> Matching:
    """Optimal maximum-weight assignment of rows to columns.

    Every row on the smaller side gets matched; extra columns (or rows)
    stay unmatched. Rejects non-finite input.
    """
    values = _values_of(w)
    n, m = values.shape
    transposed = n > m
    work = values.T.copy() if transposed else values.copy()
    wn, wm = work.shape
    row_duals = work.max(axis=1) if wm else np.zeros(wn)
    col_duals = np.zeros(wm)
    row_to_col = np.full(wn, -1, dtype=np.int64)
    col_to_row = np.full(wm, -1, dtype=np.int64)
    if wm:
        for r in range(wn):
            _stage(work, row_duals, col_duals, row_to_col, col_to_row, r)
    if transposed:
        return Matching(
            weights=values.copy(),
            row_to_col=col_to_row,
            col_to_row=row_to_col,
            row_duals=col_duals,
            col_duals=row_duals,
        )
    return Matching(
        weights=work,
        row_to_col=row_to_col,
        col_to_row=col_to_row,
        row_duals=row_duals,
        col_duals=col_duals,
    )


def pad_and_replicate(w, capacity: int, unservable: float = DEFAULT_UNSERVABLE) -> WeightMatrix:
    """Square working matrix realizing per-AP capacity via column replicas.

    Each AP column is replicated ``capacity`` times (replicas share the
    base weight); dummy rows filled with the unservable weight square the
    matrix. Labels record the mapping back.
    """
    if isinstance(w, WeightMatrix):
        values = w.values
        row_labels = list(w.row_labels)
        base_cols = list(w.col_labels)
    else:
        values = _values_of(w)
        row_labels = list(range(values.shape[0]))
        base_cols = list(range(values.shape[1]))
    n, m = values.shape
    if m == 0:
        raise ValueError("need at least one column to replicate")
    needed = -(-n // m) if n else 1  # ceil(n/m), at least 1
    if capacity < needed:
        raise ValueError(f"capacity {capacity} below required ceil(N/M)={needed}")
    dim = m * capacity
    out = np.full((dim, dim), unservable, dtype=float)
    col_labels = []
    for j in range(m):
        for s in range(capacity):
            col_labels.append((base_cols[j], s))
    cols = np.repeat(np.arange(m), capacity)
    out[:n, :] = values[:, cols]
    for k in range(dim - n):
        row_labels.append(("dummy", k))
    return WeightMatrix(out, tuple(row_labels), tuple(col_labels))


def _require_square(m: Matching, op: str) -> None:
    n, mm = m.weights.shape
    if n != mm:
        raise ValueError(f"{op} requires a square working matrix, got {n}x{mm}")


def add_vertex(m: Matching, w_extended) -> Matching:
    """Extend an optimal matching by one row/column pair.

    Seeds feasible duals for the new vertices and runs one augmenting
    stage from the new row, so the result is optimal for the extended
    matrix at O(n^2) cost.
    """
    _require_square(m, "add_vertex")
    ext = _values_of(w_extended)
    n = m.weights.shape[0]
    if ext.shape != (n + 1, n + 1):
        raise ValueError(f"extension must be {(n + 1, n + 1)}, got {ext.shape}")
    if not np.array_equal(ext[:n, :n], m.weights):
        raise ValueError("extension must preserve the existing weight block")
    row_duals = np.empty(n + 1)
    col_duals = np.empty(n + 1)
    row_duals[:n] = m.row_duals
    col_duals[:n] = m.col_duals
    if n:
        col_duals[n] = max(float((ext[:n, n] - m.row_duals).max()), float(ext[n, n]))
    else:
        col_duals[n] = float(ext[n, n])
    row_duals[n] = float((ext[n, :] - col_duals).max())
    row_to_col = np.concatenate([m.row_to_col, [-1]])
    col_to_row = np.concatenate([m.col_to_row, [-1]])
    work = ext.copy()
    _stage(work, row_duals, col_duals, row_to_col, col_to_row, n)
    return Matching(work, row_to_col, col_to_row, row_duals, col_duals)


def update_weights(m: Matching, *, row: int | None = None, col: int | None = None, values) -> Matching:
    """Re-optimize after a single row or column of weights changed.

    Removes the affected matched edge, reseeds that line's dual to the
    tightest feasible value, and runs one augmenting stage. An unchanged
    line returns the input matching untouched.
    """
    _require_square(m, "update_weights")
    if (row is None) == (col is None):
        raise ValueError("pass exactly one of row= or col=")
    new_line = np.asarray(values, dtype=float)
    n = m.weights.shape[0]
    if new_line.shape != (n,):
        raise ValueError(f"line must have length {n}")
    if not np.all(np.isfinite(new_line)):
        raise ValueError("weights must be finite")

    if row is not None:
        if np.array_equal(m.weights[row], new_line):
            return m
        work = m.weights.copy()
        work[row] = new_line
        row_duals = m.row_duals.copy()
        col_duals = m.col_duals.copy()
        row_to_col = m.row_to_col.copy()
        col_to_row = m.col_to_row.copy()
        j0 = int(row_to_col[row])
        if j0 >= 0:
            row_to_col[row] = -1
            col_to_row[j0] = -1
        row_duals[row] = float((new_line - col_duals).max())
        _stage(work, row_duals, col_duals, row_to_col, col_to_row, row)
        return Matching(work, row_to_col, col_to_row, row_duals, col_duals)

    if np.array_equal(m.weights[:, col], new_line):
        return m
    work = m.weights.copy()
    work[:, col] = new_line
    row_duals = m.row_duals.copy()
    col_duals = m.col_duals.copy()
    row_to_col = m.row_to_col.copy()
    col_to_row = m.col_to_row.copy()
    i0 = int(col_to_row[col])
    if i0 >= 0:
        col_to_row[col] = -1
        row_to_col[i0] = -1
    col_duals[col] = float((new_line - row_duals).max())
    if i0 >= 0:
        _stage(work, row_duals, col_duals, row_to_col, col_to_row, i0)
    return Matching(work, row_to_col, col_to_row, row_duals, col_duals)
