"""Exact linear algebra over prime fields F_p.

Dense numpy int64 matrices with all arithmetic reduced mod p.  Gaussian
elimination uses deterministic first-nonzero pivoting (rows scanned
top-down, columns left-right) so every run produces bit-identical traces.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InputError

# products a*b with a,b < p must fit in int64
MAX_PRIME = 2**31


def is_prime(n: int) -> bool:
    """Trial-division primality test, adequate for machine-word moduli."""
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    for d in range(3, int(math.isqrt(n)) + 1, 2):
        if n % d == 0:
            return False
    return True


class PrimeFieldMatrix:
    """An immutable dense matrix over F_p.

    Entries are stored reduced to [0, p).  The constructor accepts any
    2-D array-like of integers and reduces it.
    """

    __slots__ = ("p", "_a")

    def __init__(self, p: int, data):
        if not is_prime(p):
            raise InputError(f"modulus {p} is not prime")
        if p >= MAX_PRIME:
            raise InputError(f"modulus {p} exceeds the machine-word limit {MAX_PRIME}")
        a = np.array(data, dtype=np.int64)
        if a.ndim != 2:
            raise InputError(f"matrix data must be 2-dimensional, got shape {a.shape}")
        self.p = p
        self._a = a % p
        self._a.setflags(write=False)

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    def entry(self, i: int, j: int) -> int:
        return int(self._a[i, j])

    def to_array(self) -> np.ndarray:
        """Writable copy of the underlying residue array."""
        return self._a.copy()

    def column(self, j: int) -> np.ndarray:
        return self._a[:, j].copy()

    @classmethod
    def zeros(cls, p: int, rows: int, cols: int) -> "PrimeFieldMatrix":
        return cls(p, np.zeros((rows, cols), dtype=np.int64))

    @classmethod
    def identity(cls, p: int, n: int) -> "PrimeFieldMatrix":
        return cls(p, np.eye(n, dtype=np.int64))

    @classmethod
    def from_entries(cls, p: int, rows: int, cols: int, entries) -> "PrimeFieldMatrix":
        """Build from sparse (row, col, value) triplets; absent cells are zero."""
        a = np.zeros((rows, cols), dtype=np.int64)
        for i, j, v in entries:
            if not (0 <= i < rows and 0 <= j < cols):
                raise InputError(f"entry index ({i},{j}) outside {rows}x{cols}")
            a[i, j] = v
        return cls(p, a)

    @classmethod
    def from_json(cls, obj: dict) -> "PrimeFieldMatrix":
        try:
            return cls.from_entries(
                int(obj["p"]), int(obj["rows"]), int(obj["cols"]), obj["entries"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad matrix JSON: {exc}") from exc

    def to_json(self) -> dict:
        nz = np.argwhere(self._a != 0)
        entries = [[int(i), int(j), int(self._a[i, j])] for i, j in nz]
        return {"p": self.p, "rows": self.rows, "cols": self.cols, "entries": entries}

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PrimeFieldMatrix)
            and self.p == other.p
            and self._a.shape == other._a.shape
            and bool(np.array_equal(self._a, other._a))
        )

    def __hash__(self):
        return hash((self.p, self._a.shape, self._a.tobytes()))

    def __repr__(self) -> str:
        return f"PrimeFieldMatrix(p={self.p}, shape={self.rows}x{self.cols})"


class LinearSystem:
    """A system  M . x = rhs  over F_p."""

    __slots__ = ("matrix", "rhs")

    def __init__(self, matrix: PrimeFieldMatrix, rhs):
        b = np.array(rhs, dtype=np.int64)
        if b.ndim != 1 or b.shape[0] != matrix.rows:
            raise InputError(
                f"rhs length {b.shape} does not match row count {matrix.rows}"
            )
        self.matrix = matrix
        self.rhs = b % matrix.p
        self.rhs.setflags(write=False)

    @property
    def p(self) -> int:
        return self.matrix.p

    @classmethod
    def with_ones(cls, matrix: PrimeFieldMatrix) -> "LinearSystem":
        return cls(matrix, np.ones(matrix.rows, dtype=np.int64))

    def __repr__(self) -> str:
        return f"LinearSystem({self.matrix!r})"


def _rref(a: np.ndarray, p: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form mod p, in place on a writable copy.

    Pivot selection is deterministic: columns left to right, first row with
    a nonzero entry scanning top-down from the current pivot row.

    Returns:
        (R, pivot_cols) where R is the RREF array and pivot_cols lists the
        pivot column indices in order (length = rank).
    """
    m, n = a.shape
    pivot_cols: list[int] = []
    row = 0
    for col in range(n):
        if row >= m:
            break
        pivot = -1
        for r in range(row, m):
            if a[r, col] != 0:
                pivot = r
                break
        if pivot < 0:
            continue
        if pivot != row:
            a[[row, pivot]] = a[[pivot, row]]
        inv = pow(int(a[row, col]), -1, p)
        a[row] = (a[row] * inv) % p
        for r in range(m):
            if r != row and a[r, col] != 0:
                a[r] = (a[r] - a[r, col] * a[row]) % p
        pivot_cols.append(col)
        row += 1
    return a, pivot_cols


def rank(M: PrimeFieldMatrix) -> int:
    """F_p rank by exact Gaussian elimination."""
    _, pivots = _rref(M.to_array(), M.p)
    return len(pivots)


def solve(sys: LinearSystem):
    """Return one solution of M.x = rhs, or None when the system is unsolvable.

    Free variables are set to zero, so the answer is deterministic.  The
    returned vector always satisfies the round-trip check M.x = rhs.
    """
    M, p = sys.matrix, sys.p
    aug = np.hstack([M.to_array(), sys.rhs.reshape(-1, 1)])
    R, pivots = _rref(aug, p)
    if pivots and pivots[-1] == M.cols:
        return None  # a pivot in the rhs column: 0 = nonzero
    x = np.zeros(M.cols, dtype=np.int64)
    for r, c in enumerate(pivots):
        x[c] = R[r, M.cols]
    assert np.array_equal(M.to_array() @ x % p, sys.rhs), "solver self-check failed"
    return x


def is_solvable(sys: LinearSystem) -> bool:
    """Solvability via the rank criterion rank(M) = rank(M | rhs)."""
    M, p = sys.matrix, sys.p
    aug = np.hstack([M.to_array(), sys.rhs.reshape(-1, 1)])
    _, pivots = _rref(aug, p)
    return not (pivots and pivots[-1] == M.cols)


def kernel_basis(M: PrimeFieldMatrix) -> list[np.ndarray]:
    """Basis of the right null space {v : M.v = 0}.

    One basis vector per free column of the RREF; size is cols - rank(M).
    """
    p = M.p
    R, pivots = _rref(M.to_array(), p)
    pivot_set = set(pivots)
    basis = []
    for j in range(M.cols):
        if j in pivot_set:
            continue
        v = np.zeros(M.cols, dtype=np.int64)
        v[j] = 1
        for r, c in enumerate(pivots):
            v[c] = (-R[r, j]) % p
        basis.append(v)
    return basis


def _check_bijection(pi, n: int) -> np.ndarray:
    arr = np.array(pi, dtype=np.int64)
    if arr.shape != (n,) or sorted(arr.tolist()) != list(range(n)):
        raise InputError(f"permutation is not a bijection on 0..{n - 1}")
    return arr


def apply_row_permutation(M: PrimeFieldMatrix, pi) -> PrimeFieldMatrix:
    """Row action: result(a, b) = M(pi(a), b)."""
    arr = _check_bijection(pi, M.rows)
    return PrimeFieldMatrix(M.p, M.to_array()[arr, :])


def apply_col_permutation(M: PrimeFieldMatrix, pi) -> PrimeFieldMatrix:
    """Column action: result(a, b) = M(a, pi(b))."""
    arr = _check_bijection(pi, M.cols)
    return PrimeFieldMatrix(M.p, M.to_array()[:, arr])
