"""Recovering data points from pairwise midpoints.

The averaging structure is a C(m,2) x m 0/1 incidence matrix with two ones
per row.  With labeled midpoints the points solve a full-column-rank linear
system; without labels a pruned search over assignments reconstructs the
point multiset coordinate-wise.  Rank certificates for [A, PA] use exact
integer (fraction-free) elimination, since floating-point rank near m is
untrustworthy.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

__all__ = [
    "InconsistentMidpointsError",
    "PermutationRankReport",
    "concat_rank",
    "form_midpoints",
    "induced_row_permutation",
    "integer_rank",
    "load_labeled_midpoints_csv",
    "pair_incidence_matrix",
    "pair_index",
    "permutation_rank_trials",
    "recover_labeled",
    "recover_unlabeled_bruteforce",
    "save_labeled_midpoints_csv",
]


class InconsistentMidpointsError(ValueError):
    def __init__(self, residual: float):
        super().__init__(f"midpoints are inconsistent: residual {residual:.6g}")
        self.residual = residual


def pair_index(m: int) -> list:
    """Lexicographic (i, j) pairs with 0 <= i < j < m; fixes the row order."""
    return list(combinations(range(m), 2))


def pair_incidence_matrix(m: int) -> np.ndarray:
    """C(m,2) x m matrix with ones at the two indices averaged by each row."""
    if m < 2:
        raise ValueError("need m >= 2")
    pairs = pair_index(m)
    A = np.zeros((len(pairs), m), dtype=np.int64)
    for r, (i, j) in enumerate(pairs):
        A[r, i] = 1
        A[r, j] = 1
    return A


def form_midpoints(points: np.ndarray) -> np.ndarray:
    """All C(m,2) midpoints of an (m, d) point array, in pair order."""
    points = np.atleast_2d(np.asarray(points, float))
    pairs = pair_index(points.shape[0])
    return np.array([(points[i] + points[j]) / 2.0 for i, j in pairs])


def recover_labeled(midpoints, m: int, tol: float = 1e-6) -> tuple:
    """Solve for the m points given all labeled pair midpoints.

    ``midpoints`` maps (i, j) pairs (0-based, i < j) to midpoint vectors,
    given either as a dict or as a list of ((i, j), vector) entries.  Returns
    (points, residual) where residual is the max-norm inconsistency of the
    overdetermined system; residual > tol raises InconsistentMidpointsError.
    """
    if isinstance(midpoints, dict):
        items = midpoints
    else:
        items = {tuple(pair): np.asarray(vec, float) for pair, vec in midpoints}
    pairs = pair_index(m)
    if m < 3:
        raise ValueError("recovery needs m >= 3 (the incidence matrix is rank-deficient below)")
    missing = [p for p in pairs if p not in items]
    if missing:
        raise ValueError(f"underdetermined: missing midpoints for pairs {missing[:5]}")
    B = np.array([np.atleast_1d(items[p]) for p in pairs], dtype=float)
    A = pair_incidence_matrix(m).astype(float)
    sol, *_ = np.linalg.lstsq(A, 2.0 * B, rcond=None)
    residual = float(np.abs(A @ sol - 2.0 * B).max())
    if residual > tol:
        raise InconsistentMidpointsError(residual)
    return sol, residual


# ---------------------------------------------------------------------- #
# exact ranks
# ---------------------------------------------------------------------- #


def integer_rank(matrix) -> int:
    """Exact rank of an integer matrix by fraction-free (Bareiss) elimination."""
    M = [[int(v) for v in row] for row in np.asarray(matrix)]
    if not M:
        return 0
    n_rows, n_cols = len(M), len(M[0])
    rank = 0
    prev = 1
    row = 0
    for col in range(n_cols):
        pivot_row = None
        for r in range(row, n_rows):
            if M[r][col] != 0:
                pivot_row = r
                break
        if pivot_row is None:
            continue
        M[row], M[pivot_row] = M[pivot_row], M[row]
        pivot = M[row][col]
        for r in range(row + 1, n_rows):
            for c in range(col + 1, n_cols):
                M[r][c] = (pivot * M[r][c] - M[r][col] * M[row][c]) // prev
            M[r][col] = 0
        prev = pivot
        rank += 1
        row += 1
        if row == n_rows:
            break
    return rank


def concat_rank(m: int, perm) -> int:
    """Exact rank of [A, PA] where PA's row r is A's row perm[r]."""
    A = pair_incidence_matrix(m)
    perm = list(perm)
    if sorted(perm) != list(range(A.shape[0])):
        raise ValueError(f"perm must be a permutation of range({A.shape[0]})")
    PA = A[perm]
    return integer_rank(np.hstack([A, PA]))


def is_column_permutation(m: int, perm) -> bool:
    """True when the permuted incidence matrix is a column shuffle of the original."""
    A = pair_incidence_matrix(m)
    PA = A[list(perm)]
    cols_a = sorted(A[:, j].tobytes() for j in range(m))
    cols_p = sorted(PA[:, j].tobytes() for j in range(m))
    return cols_a == cols_p


def induced_row_permutation(m: int, point_perm) -> list:
    """Row permutation of the incidence matrix induced by relabeling points.

    Entry r of the result is the original row index whose pair, after
    relabeling, lands in row r.
    """
    pairs = pair_index(m)
    lookup = {p: r for r, p in enumerate(pairs)}
    perm = [0] * len(pairs)
    for r, (i, j) in enumerate(pairs):
        a, b = point_perm[i], point_perm[j]
        perm[r] = lookup[(min(a, b), max(a, b))]
    return perm


@dataclass(frozen=True)
class PermutationRankReport:
    trials: int
    column_perm_count: int
    min_rank_among_non_column_perms: int | None


def permutation_rank_trials(
    m: int, n_trials: int, seed: int, include_identity: bool = False
) -> PermutationRankReport:
    """Sample row permutations and certify rank([A, PA]) > m off the column-perm set.

    The guarantee this exercises needs m >= 7; smaller m may legitimately
    produce rank m for non-column permutations.
    """
    rng = np.random.default_rng(seed)
    n_rows = m * (m - 1) // 2
    column_perms = 0
    min_rank = None
    perms = []
    if include_identity:
        perms.append(list(range(n_rows)))
    perms.extend(list(rng.permutation(n_rows)) for _ in range(n_trials - len(perms)))
    for perm in perms:
        if is_column_permutation(m, perm):
            column_perms += 1
            continue
        r = concat_rank(m, perm)
        min_rank = r if min_rank is None else min(min_rank, r)
    return PermutationRankReport(
        trials=len(perms),
        column_perm_count=column_perms,
        min_rank_among_non_column_perms=min_rank,
    )


# ---------------------------------------------------------------------- #
# unlabeled recovery (1-D, small m)
# ---------------------------------------------------------------------- #


def _infer_m(count: int) -> int:
    m = int((1 + math.isqrt(1 + 8 * count)) // 2)
    if m * (m - 1) // 2 != count:
        raise ValueError(f"{count} values is not C(m,2) for any integer m")
    return m


def recover_unlabeled_bruteforce(midpoint_values, max_m: int = 7, rel_tol: float = 1e-9):
    """All scalar point multisets consistent with an unlabeled midpoint multiset.

    Searches assignments of the C(m,2) values to index pairs.  Sorting the
    unknown points descending forces the two largest sums up front; after the
    top three are fixed (one branching choice), the largest unassigned sum
    always names the next point, so the search is nearly linear.  Every
    returned multiset regenerates the input midpoints exactly (within
    floating-point tolerance).
    """
    vals = sorted((float(v) for v in midpoint_values), reverse=True)
    m = _infer_m(len(vals))
    if m > max_m:
        raise ValueError(f"m={m} exceeds the supported brute-force size {max_m}")
    if m < 3:
        raise ValueError("a single midpoint cannot pin down two points")
    scale = max(max(abs(v) for v in vals), 1.0)
    tol = rel_tol * scale
    sums = [2.0 * v for v in vals]  # work with pairwise sums

    def multiset_remove(pool: list, value: float):
        # pool sorted descending; remove one element equal to value within tol
        idx = bisect.bisect_left([-p for p in pool], -(value + tol))
        while idx < len(pool) and pool[idx] > value - tol:
            if abs(pool[idx] - value) <= tol:
                out = pool[:idx] + pool[idx + 1 :]
                return out
            idx += 1
        return None

    solutions = []

    def extend(placed: list, pool: list):
        # placed: points so far, descending; pool: unassigned sums, descending
        if len(placed) == m:
            if not pool:
                solutions.append(tuple(placed))
            return
        nxt = pool[0] - placed[0]  # largest remaining sum pairs the largest point
        if nxt > placed[-1] + tol:
            return
        rest = pool
        for p in placed:
            rest = multiset_remove(rest, p + nxt)
            if rest is None:
                return
        extend(placed + [nxt], rest)

    s1, s2 = sums[0], sums[1]
    pool0 = sums[2:]
    tried = []
    for idx, c in enumerate(pool0):
        if any(abs(c - t) <= tol for t in tried):
            continue
        tried.append(c)
        p1 = (s1 + s2 - c) / 2.0
        p2 = s1 - p1
        p3 = s2 - p1
        if not (p1 >= p2 - tol and p2 >= p3 - tol):
            continue
        rest = pool0[:idx] + pool0[idx + 1 :]
        extend([p1, p2, p3], rest)

    # deduplicate and keep only multisets that regenerate the input exactly
    unique = []
    for sol in solutions:
        pts = np.array(sorted(sol))
        regen = np.sort(form_midpoints(pts[:, None]).ravel())
        if not np.allclose(regen, np.sort(np.asarray(vals)), atol=tol, rtol=0):
            continue
        if any(np.allclose(pts, u, atol=tol, rtol=0) for u in unique):
            continue
        unique.append(pts)
    return unique


# ---------------------------------------------------------------------- #
# CSV
# ---------------------------------------------------------------------- #


def save_labeled_midpoints_csv(path, midpoints: dict) -> None:
    """Write `i,j,coord0,...` rows in lexicographic pair order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        dim = len(np.atleast_1d(next(iter(midpoints.values()))))
        writer.writerow(["i", "j"] + [f"coord{c}" for c in range(dim)])
        for (i, j), vec in sorted(midpoints.items()):
            writer.writerow([i, j] + [repr(float(v)) for v in np.atleast_1d(vec)])


def load_labeled_midpoints_csv(path) -> dict:
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if not row:
                continue
            out[(int(row[0]), int(row[1]))] = np.array([float(v) for v in row[2:]])
    return out
