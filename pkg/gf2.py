"""
Linear algebra over F2.

Rank and null space go through galois; the elimination used inside the
randomized searches is a plain numpy XOR sweep on uint8 rows, which also
reports pivot columns.
"""
import galois
import numpy as np

GF2 = galois.GF(2)


def as_bits(mat) -> np.ndarray:
    return np.asarray(mat, dtype=np.uint8) & 1


def rank(mat) -> int:
    arr = as_bits(mat)
    if arr.size == 0:
        return 0
    if arr.ndim == 1:
        arr = arr[None, :]
    return int(np.linalg.matrix_rank(GF2(arr)))


def null_space(mat) -> np.ndarray:
    """
    Returns a basis (as rows) of {v : mat @ v = 0}.
    """
    arr = as_bits(mat)
    if arr.shape[0] == 0:
        return np.eye(arr.shape[1], dtype=np.uint8)
    basis = GF2(arr).null_space()
    return np.asarray(basis, dtype=np.uint8).reshape(-1, arr.shape[1])


def row_reduce(mat, ncols=None):
    """
    Gauss-Jordan elimination on a copy of mat, restricted to the first ncols
    columns when given. Returns (reduced, pivot_columns).
    """
    a = as_bits(mat).copy()
    rows, cols = a.shape
    limit = cols if ncols is None else ncols
    pivots = []
    r = 0
    for c in range(limit):
        if r == rows:
            break
        nz = np.flatnonzero(a[r:, c])
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        mask = a[:, c].astype(bool)
        mask[r] = False
        a[mask] ^= a[r]
        pivots.append(c)
        r += 1
    return a, pivots


def solve(mat, rhs):
    """
    Returns one x with mat @ x = rhs over F2, or None when inconsistent.
    """
    a = as_bits(mat)
    b = as_bits(rhs).reshape(-1, 1)
    aug = np.hstack([a, b])
    red, pivots = row_reduce(aug, ncols=a.shape[1])
    r = len(pivots)
    if red[r:, -1].any():
        return None
    x = np.zeros(a.shape[1], dtype=np.uint8)
    for row, col in enumerate(pivots):
        x[col] = red[row, -1]
    return x


def in_row_space(rows, vec) -> bool:
    rows = as_bits(rows)
    if rows.shape[0] == 0:
        return not as_bits(vec).any()
    return solve(rows.T, vec) is not None


def express(rows, vec):
    """
    Coefficients c with c @ rows = vec, or None if vec is outside the span.
    """
    return solve(as_bits(rows).T, vec)


def matmul(a, b) -> np.ndarray:
    return (as_bits(a).astype(np.int64) @ as_bits(b).astype(np.int64) % 2).astype(np.uint8)


def inverse(mat) -> np.ndarray:
    return np.asarray(np.linalg.inv(GF2(as_bits(mat))), dtype=np.uint8)


def symplectic_form(n: int) -> np.ndarray:
    """Lambda = [[0, I], [I, 0]] on 2n columns."""
    lam = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    lam[:n, n:] = np.eye(n, dtype=np.uint8)
    lam[n:, :n] = np.eye(n, dtype=np.uint8)
    return lam


def symplectic_products(a, b) -> np.ndarray:
    """
    Matrix of symplectic inner products between the rows of a and b, both
    laid out as [x | z].
    """
    a = as_bits(a)
    b = as_bits(b)
    n = a.shape[-1] // 2
    swapped = np.concatenate([b[..., n:], b[..., :n]], axis=-1)
    return matmul(a, swapped.T)


# -------------------- information sets --------------------
def low_weight_solutions(mat, rhs, col_order, max_weight, sweep=1, weight_fn=None):
    """
    One information-set step for mat @ x = rhs.

    Columns are eliminated in col_order priority; the free columns are set to
    zero (Prange) and then up to `sweep` of them are flipped (Lee-Brickell).
    Returns the solutions whose weight is at most max_weight, in original
    column order. weight_fn(x) overrides the Hamming weight.
    """
    a = as_bits(mat)
    order = np.asarray(col_order, dtype=np.int64)
    aug = np.hstack([a[:, order], as_bits(rhs).reshape(-1, 1)])
    red, pivots = row_reduce(aug, ncols=a.shape[1])
    r = len(pivots)
    if red[r:, -1].any():
        return []
    ncols = a.shape[1]
    piv = np.asarray(pivots, dtype=np.int64)
    free = np.setdiff1d(np.arange(ncols), piv)
    b = red[:r, -1]
    P = red[:r, free]

    candidates = []

    def emit(pivot_vals, flips):
        x = np.zeros(ncols, dtype=np.uint8)
        x[piv] = pivot_vals
        x[free[list(flips)]] = 1
        out = np.zeros(ncols, dtype=np.uint8)
        out[order] = x
        candidates.append(out)

    emit(b, ())
    if sweep >= 1 and free.size:
        singles = b[:, None] ^ P
        w1 = singles.sum(axis=0) + 1
        for f in np.flatnonzero(w1 <= (max_weight if weight_fn is None else 2 * max_weight)):
            emit(singles[:, f], (int(f),))
    if sweep >= 2 and free.size > 1:
        cap = max_weight if weight_fn is None else 2 * max_weight
        for f in range(free.size - 1):
            pairs = (b ^ P[:, f])[:, None] ^ P[:, f + 1 :]
            w2 = pairs.sum(axis=0) + 2
            for g in np.flatnonzero(w2 <= cap):
                emit(pairs[:, g], (f, f + 1 + int(g)))

    weigh = weight_fn or (lambda v: int(v.sum()))
    return [x for x in candidates if weigh(x) <= max_weight]
