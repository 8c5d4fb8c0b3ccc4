"""Exact arithmetic and linear algebra over GF(2^s).

Elements are integers in [0, 2^s) interpreted in the polynomial basis;
addition is bitwise XOR, multiplication is modulo a fixed irreducible
polynomial per field size.  The polynomials below are part of the file/wire
contract: coefficient dumps are only interpretable with the declared
polynomial.

Matrices are plain numpy arrays (uint8 for s <= 8, uint16 for s = 16) and
all operations are value-semantic: nothing here mutates its arguments, so a
field instance can be shared freely across threads once built.
"""

from __future__ import annotations

import numpy as np

# Irreducible polynomial per supported field size, bit i = coefficient of x^i.
IRREDUCIBLE_POLY = {
    1: 0x3,      # x + 1
    2: 0x7,      # x^2 + x + 1
    4: 0x13,     # x^4 + x + 1
    8: 0x11B,    # x^8 + x^4 + x^3 + x + 1
    16: 0x1100B, # x^16 + x^12 + x^3 + x + 1
}

SUPPORTED_ORDERS = tuple(sorted(IRREDUCIBLE_POLY))


class FieldSizeError(ValueError):
    """A construction needs more distinct field elements than the field has."""


class RankDeficientError(ValueError):
    """An operation required full-rank input and did not get it."""


class InsufficientRankError(ValueError):
    """Decoding is impossible: the coefficient system does not reach full rank."""


def _poly_mul_mod(a: int, b: int, poly: int, s: int) -> int:
    """Carry-less multiply a*b reduced mod poly (schoolbook; table build only)."""
    result = 0
    top = 1 << s
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= poly
    return result


def _find_generator(poly: int, s: int) -> int:
    """Smallest multiplicative generator of GF(2^s) for the given polynomial."""
    order = (1 << s) - 1
    if order == 1:
        return 1
    # prime factors of the group order
    factors = []
    m = order
    p = 2
    while p * p <= m:
        if m % p == 0:
            factors.append(p)
            while m % p == 0:
                m //= p
        p += 1
    if m > 1:
        factors.append(m)

    def elem_pow(base: int, exp: int) -> int:
        acc, cur = 1, base
        while exp:
            if exp & 1:
                acc = _poly_mul_mod(acc, cur, poly, s)
            cur = _poly_mul_mod(cur, cur, poly, s)
            exp >>= 1
        return acc

    for g in range(2, 1 << s):
        if all(elem_pow(g, order // f) != 1 for f in factors):
            return g
    raise AssertionError("no generator found; polynomial is not irreducible")


class GF:
    """GF(2^s) with numpy-vectorized scalar and matrix operations.

    Multiplication uses log/antilog tables built once at construction; the
    tables are immutable afterwards.
    """

    def __init__(self, s: int):
        if s not in IRREDUCIBLE_POLY:
            raise ValueError(f"unsupported field order 2^{s}; choose s in {SUPPORTED_ORDERS}")
        self.s = s
        self.q = 1 << s
        self.poly = IRREDUCIBLE_POLY[s]
        self.dtype = np.uint8 if s <= 8 else np.uint16

        g = _find_generator(self.poly, s)
        self.generator = g
        order = self.q - 1
        exp = np.zeros(2 * order if order > 1 else 2, dtype=self.dtype)
        log = np.zeros(self.q, dtype=np.uint32)
        x = 1
        for i in range(order):
            exp[i] = x
            log[x] = i
            x = _poly_mul_mod(x, g, self.poly, s)
        if x != 1:
            raise AssertionError(f"0x{self.poly:X} is not irreducible for s={s}")
        # doubled antilog table lets a+b log sums index without a modulo
        if order > 1:
            exp[order:2 * order] = exp[:order]
        else:
            exp[:] = 1
        self._exp = exp
        self._log = log
        self._order = order

    # ------------------------------------------------------------------
    # scalar / elementwise arithmetic
    # ------------------------------------------------------------------

    def add(self, a, b):
        """XOR; every element is its own additive inverse."""
        return a ^ b

    sub = add

    def mul(self, a, b):
        a_arr = np.asarray(a, dtype=self.dtype)
        b_arr = np.asarray(b, dtype=self.dtype)
        out = self._exp[self._log[a_arr].astype(np.uint32) + self._log[b_arr]]
        zero = (a_arr == 0) | (b_arr == 0)
        if out.ndim == 0:
            return self.dtype(0) if zero else out[()]
        out = np.where(zero, self.dtype(0), out)
        return out

    def inv(self, a):
        a_arr = np.asarray(a, dtype=self.dtype)
        if np.any(a_arr == 0):
            raise ZeroDivisionError("0 has no multiplicative inverse")
        return self._exp[(self._order - self._log[a_arr]) % self._order]

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def pow(self, a, e: int):
        a_arr = np.asarray(a, dtype=self.dtype)
        if e == 0:
            return np.ones_like(a_arr)
        out = self._exp[(self._log[a_arr].astype(np.int64) * e) % self._order]
        if np.any(a_arr == 0):
            out = np.where(a_arr == 0, self.dtype(0), out)
        return out

    # ------------------------------------------------------------------
    # matrices
    # ------------------------------------------------------------------

    def asmatrix(self, rows) -> np.ndarray:
        m = np.asarray(rows, dtype=self.dtype)
        if m.ndim == 1:
            m = m.reshape(1, -1)
        return m

    def zeros(self, rows: int, cols: int) -> np.ndarray:
        return np.zeros((rows, cols), dtype=self.dtype)

    def identity(self, n: int) -> np.ndarray:
        return np.eye(n, dtype=self.dtype)

    def random_matrix(self, rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.q, size=(rows, cols), dtype=np.uint16 if self.s > 8 else np.uint8).astype(self.dtype)

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Exact matrix product; XOR-accumulated column-by-column."""
        a = self.asmatrix(a)
        b = self.asmatrix(b)
        if a.shape[1] != b.shape[0]:
            raise ValueError(f"shape mismatch {a.shape} @ {b.shape}")
        out = np.zeros((a.shape[0], b.shape[1]), dtype=self.dtype)
        for k in range(a.shape[1]):
            col = a[:, k]
            if not col.any():
                continue
            out ^= self.mul(col[:, None], b[k][None, :])
        return out

    def row_reduce(self, m: np.ndarray, augment: np.ndarray | None = None):
        """Reduced row echelon form via exact Gaussian elimination.

        Returns (rref, pivot_columns) or (rref, pivot_columns, reduced_augment)
        when an augmented block rides along.
        """
        r = self.asmatrix(m).copy()
        aug = None if augment is None else self.asmatrix(augment).copy()
        n_rows, n_cols = r.shape
        pivots: list[int] = []
        row = 0
        for col in range(n_cols):
            if row >= n_rows:
                break
            nz = np.nonzero(r[row:, col])[0]
            if nz.size == 0:
                continue
            p = row + int(nz[0])
            if p != row:
                r[[row, p]] = r[[p, row]]
                if aug is not None:
                    aug[[row, p]] = aug[[p, row]]
            pivot_inv = self.inv(r[row, col])
            r[row] = self.mul(r[row], pivot_inv)
            if aug is not None:
                aug[row] = self.mul(aug[row], pivot_inv)
            factors = r[:, col].copy()
            factors[row] = 0
            hit = np.nonzero(factors)[0]
            if hit.size:
                r[hit] ^= self.mul(factors[hit, None], r[row][None, :])
                if aug is not None:
                    aug[hit] ^= self.mul(factors[hit, None], aug[row][None, :])
            pivots.append(col)
            row += 1
        if augment is None:
            return r, pivots
        return r, pivots, aug

    def rank(self, m: np.ndarray) -> int:
        m = self.asmatrix(m)
        if 0 in m.shape:
            return 0
        _, pivots = self.row_reduce(m)
        return len(pivots)

    def det(self, m: np.ndarray):
        """Determinant by elimination; intended for small matrices."""
        m = self.asmatrix(m)
        if m.shape[0] != m.shape[1]:
            raise ValueError("determinant needs a square matrix")
        a = m.copy()
        n = a.shape[0]
        det = self.dtype(1)
        for col in range(n):
            nz = np.nonzero(a[col:, col])[0]
            if nz.size == 0:
                return self.dtype(0)
            p = col + int(nz[0])
            if p != col:
                a[[col, p]] = a[[p, col]]  # row swap: sign is +1 in char 2
            det = self.mul(det, a[col, col])
            factors = self.div(a[col + 1:, col], a[col, col])
            hit = np.nonzero(factors)[0]
            if hit.size:
                a[col + 1 + hit] ^= self.mul(factors[hit, None], a[col][None, :])
        return det

    def solve(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Solve a @ x = b for square invertible a."""
        a = self.asmatrix(a)
        b = self.asmatrix(b)
        n = a.shape[0]
        if a.shape[1] != n:
            raise ValueError("solve needs a square system")
        rref, pivots, x = self.row_reduce(a, augment=b)
        if len(pivots) != n:
            raise RankDeficientError("singular coefficient matrix")
        return x

    def inverse(self, a: np.ndarray) -> np.ndarray:
        return self.solve(a, self.identity(self.asmatrix(a).shape[0]))


# Field instances are immutable after construction; share one per order.
_FIELD_CACHE: dict[int, GF] = {}


def get_field(s: int) -> GF:
    if s not in _FIELD_CACHE:
        _FIELD_CACHE[s] = GF(s)
    return _FIELD_CACHE[s]


# ----------------------------------------------------------------------
# coding-theoretic constructions
# ----------------------------------------------------------------------

def mds_generator(gf: GF, n: int, k: int) -> np.ndarray:
    """K x N generator of an [N, K, N-K+1] code; every K columns invertible.

    Realized as a Vandermonde matrix over the N distinct evaluation points
    labelled 0..N-1, so the construction is deterministic and reproducible.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= K <= N, got K={k}, N={n}")
    if n > gf.q:
        raise FieldSizeError(f"N={n} needs more than {gf.q} evaluation points; raise the field order")
    out = np.zeros((k, n), dtype=gf.dtype)
    out[0, :] = 1
    if n > 1 and k > 1:
        logs = gf._log[np.arange(1, n, dtype=gf.dtype)].astype(np.int64)
        powers = (np.arange(1, k, dtype=np.int64)[:, None] * logs[None, :]) % gf._order
        out[1:, 1:] = gf._exp[powers]
        out[1:, 0] = 0  # evaluation point 0 contributes only to the constant row
    elif k > 1:
        out[1:, 0] = 0
    return out


def cauchy_from_labels(gf: GF, row_labels: np.ndarray, col_labels: np.ndarray) -> np.ndarray:
    """Cauchy matrix 1/(a_i + b_j) for disjoint, duplicate-free label sets."""
    a = np.asarray(row_labels, dtype=gf.dtype)
    b = np.asarray(col_labels, dtype=gf.dtype)
    if a.size and b.size:
        diff = a[:, None] ^ b[None, :]
        if np.any(diff == 0):
            raise ValueError("row and column labels must be disjoint")
        return gf.inv(diff)
    return np.zeros((a.size, b.size), dtype=gf.dtype)


def cauchy_matrix(gf: GF, rows: int, cols: int) -> np.ndarray:
    """rows x cols Cauchy matrix; every square submatrix is invertible."""
    if rows + cols > gf.q:
        raise FieldSizeError(
            f"Cauchy {rows}x{cols} needs {rows + cols} distinct elements but the field has {gf.q}")
    return cauchy_from_labels(gf, np.arange(rows, dtype=np.int64),
                              np.arange(rows, rows + cols, dtype=np.int64))


def extend_basis(gf: GF, a_z: np.ndarray, target_dim: int) -> np.ndarray:
    """Rows completing a_z's row space to the full space of dimension target_dim.

    The returned rows are unit vectors on the non-pivot columns of a_z's
    reduced row echelon form, so stacking them on a_z always reaches full rank.
    """
    a_z = gf.asmatrix(a_z) if np.size(a_z) else np.zeros((0, target_dim), dtype=gf.dtype)
    if a_z.shape[0] == 0:
        return gf.identity(target_dim)
    if a_z.shape[1] != target_dim:
        raise ValueError(f"input has {a_z.shape[1]} columns, expected {target_dim}")
    _, pivots = gf.row_reduce(a_z)
    if len(pivots) != a_z.shape[0]:
        raise RankDeficientError(
            f"basis extension needs full-rank input; rank {len(pivots)} < {a_z.shape[0]} rows")
    free_cols = sorted(set(range(target_dim)) - set(pivots))
    out = np.zeros((len(free_cols), target_dim), dtype=gf.dtype)
    for i, col in enumerate(free_cols):
        out[i, col] = 1
    return out


def solve_decode(gf: GF, known_rows: np.ndarray, coded_rows: np.ndarray,
                 coded_payloads: np.ndarray, known_payloads: np.ndarray) -> np.ndarray:
    """Recover all payload rows from unit-known rows plus coded combinations.

    Stacks the coefficient rows, checks the system reaches the ambient
    dimension, and inverts it against the corresponding payload rows.
    """
    known_rows = gf.asmatrix(known_rows) if np.size(known_rows) else np.zeros((0, 0), dtype=gf.dtype)
    coded_rows = gf.asmatrix(coded_rows) if np.size(coded_rows) else None
    if coded_rows is None or coded_rows.shape[0] == 0:
        coeffs = known_rows
        payloads = gf.asmatrix(known_payloads)
    elif known_rows.shape[0] == 0:
        coeffs = coded_rows
        payloads = gf.asmatrix(coded_payloads)
    else:
        coeffs = np.vstack([known_rows, coded_rows])
        payloads = np.vstack([gf.asmatrix(known_payloads), gf.asmatrix(coded_payloads)])
    m = coeffs.shape[1]
    rref, pivots, reduced = gf.row_reduce(coeffs, augment=payloads)
    if len(pivots) != m:
        raise InsufficientRankError(
            f"insufficient rank: coefficient system spans {len(pivots)} of {m} dimensions")
    # rref rows for the pivots are already the identity in column order
    return reduced[:m]
