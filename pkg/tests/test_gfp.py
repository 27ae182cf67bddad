import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfiforge.errors import InputError
from cfiforge.gfp import (
    LinearSystem,
    PrimeFieldMatrix,
    apply_col_permutation,
    apply_row_permutation,
    is_prime,
    is_solvable,
    kernel_basis,
    rank,
    solve,
)


def det_mod(a: np.ndarray, p: int) -> int:
    """Determinant mod p via elimination with sign tracking (test oracle)."""
    a = a.copy() % p
    n = a.shape[0]
    det = 1
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r, col] != 0), None)
        if piv is None:
            return 0
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            det = (-det) % p
        det = det * int(a[col, col]) % p
        inv = pow(int(a[col, col]), -1, p)
        for r in range(col + 1, n):
            if a[r, col] != 0:
                a[r] = (a[r] - a[r, col] * inv * a[col]) % p
    return det


def rank_by_minors(a: np.ndarray, p: int) -> int:
    """Largest k with a nonzero k x k minor, by brute enumeration."""
    m, n = a.shape
    for k in range(min(m, n), 0, -1):
        for rows_ in itertools.combinations(range(m), k):
            for cols_ in itertools.combinations(range(n), k):
                if det_mod(a[np.ix_(rows_, cols_)], p) != 0:
                    return k
    return 0


def test_primality_check():
    assert is_prime(2) and is_prime(3) and is_prime(101)
    assert not is_prime(1) and not is_prime(4) and not is_prime(91)
    with pytest.raises(InputError):
        PrimeFieldMatrix(6, [[1]])
    with pytest.raises(InputError):
        PrimeFieldMatrix(2**31 + 11, [[1]])


def test_rank_identity_and_duplicates():
    assert rank(PrimeFieldMatrix.identity(3, 4)) == 4
    assert rank(PrimeFieldMatrix(2, [[1, 1], [1, 1]])) == 1


def test_rank_depends_on_modulus():
    # rows sum to zero mod 2 but not mod 3
    data = [[1, 1, 0], [0, 1, 1], [1, 0, 1]]
    assert rank(PrimeFieldMatrix(2, data)) == 2
    assert rank(PrimeFieldMatrix(3, data)) == 3


def test_rank_against_minor_enumeration():
    rng = np.random.default_rng(7)
    for _ in range(30):
        a = rng.integers(0, 5, size=(8, 8))
        assert rank(PrimeFieldMatrix(5, a)) == rank_by_minors(a, 5)


def test_solve_unique_solution():
    sys = LinearSystem(PrimeFieldMatrix(3, [[1, 1], [1, 2]]), [1, 1])
    x = solve(sys)
    assert x is not None and x.tolist() == [1, 0]


def test_solve_unsolvable_returns_none():
    sys = LinearSystem(PrimeFieldMatrix(2, [[0, 0], [0, 0]]), [1, 0])
    assert solve(sys) is None
    assert not is_solvable(sys)


def test_solve_identity_returns_rhs():
    b = [3, 1, 4, 0]
    x = solve(LinearSystem(PrimeFieldMatrix.identity(5, 4), b))
    assert x.tolist() == b


def test_is_solvable_examples():
    assert is_solvable(LinearSystem(PrimeFieldMatrix.identity(7, 3), [1, 2, 3]))
    assert is_solvable(LinearSystem(PrimeFieldMatrix(2, [[1, 1, 1]]), [1]))
    assert not is_solvable(LinearSystem(PrimeFieldMatrix(7, [[0]]), [3]))


def test_solvability_matches_rank_criterion_exhaustively():
    # all 2x3 systems over F_2 and all 2x2 systems over F_3
    for p, shape in [(2, (2, 3)), (3, (2, 2))]:
        cells = shape[0] * shape[1]
        for vals in itertools.product(range(p), repeat=cells):
            M = PrimeFieldMatrix(p, np.array(vals).reshape(shape))
            aug_rank_eq = None
            for rhs in itertools.product(range(p), repeat=shape[0]):
                sys = LinearSystem(M, rhs)
                aug = PrimeFieldMatrix(
                    p, np.hstack([M.to_array(), np.array(rhs).reshape(-1, 1)])
                )
                aug_rank_eq = rank(M) == rank(aug)
                assert is_solvable(sys) == aug_rank_eq
                assert (solve(sys) is not None) == aug_rank_eq


def test_solve_satisfies_system_randomized():
    rng = np.random.default_rng(11)
    for p in (2, 3, 5):
        for _ in range(40):
            m, n = rng.integers(1, 7, size=2)
            M = PrimeFieldMatrix(p, rng.integers(0, p, size=(m, n)))
            rhs = rng.integers(0, p, size=m)
            x = solve(LinearSystem(M, rhs))
            if x is not None:
                assert np.array_equal(M.to_array() @ x % p, rhs % p)


def test_kernel_basis_trivial_cases():
    assert kernel_basis(PrimeFieldMatrix.identity(2, 3)) == []
    basis = kernel_basis(PrimeFieldMatrix(3, [[0, 0, 0]]))
    assert len(basis) == 3


def incidence_matrix_k5():
    edges = list(itertools.combinations(range(5), 2))
    a = np.zeros((5, len(edges)), dtype=np.int64)
    for j, (u, v) in enumerate(edges):
        a[u, j] = 1
        a[v, j] = 1
    return a


def test_kernel_basis_cycle_space_of_k5():
    M = PrimeFieldMatrix(2, incidence_matrix_k5())
    basis = kernel_basis(M)
    assert len(basis) == 6  # |E| - |V| + 1 = 10 - 5 + 1
    for v in basis:
        assert not np.any(M.to_array() @ v % 2)
    stacked = PrimeFieldMatrix(2, np.array(basis))
    assert rank(stacked) == len(basis)


def test_kernel_rank_nullity_randomized():
    rng = np.random.default_rng(23)
    for p in (2, 3, 5):
        for _ in range(25):
            m, n = rng.integers(1, 7, size=2)
            M = PrimeFieldMatrix(p, rng.integers(0, p, size=(m, n)))
            basis = kernel_basis(M)
            assert len(basis) == n - rank(M)
            for v in basis:
                assert not np.any(M.to_array() @ v % p)


def test_permutation_actions():
    M = PrimeFieldMatrix(5, [[1, 2], [3, 4]])
    n = M.rows
    ident = list(range(n))
    assert apply_row_permutation(M, ident) == M
    assert apply_col_permutation(M, ident) == M

    swapped = apply_row_permutation(PrimeFieldMatrix.identity(2, 2), [1, 0])
    assert swapped.to_array().tolist() == [[0, 1], [1, 0]]

    with pytest.raises(InputError):
        apply_row_permutation(M, [0, 0])


def test_permutation_round_trip_and_rank_invariance():
    rng = np.random.default_rng(31)
    for _ in range(20):
        m, n = rng.integers(2, 7, size=2)
        M = PrimeFieldMatrix(3, rng.integers(0, 3, size=(m, n)))
        pr = rng.permutation(m).tolist()
        pc = rng.permutation(n).tolist()
        inv_r = [pr.index(i) for i in range(m)]
        moved = apply_row_permutation(apply_row_permutation(M, pr), inv_r)
        assert moved == M
        permuted = apply_col_permutation(apply_row_permutation(M, pr), pc)
        assert rank(permuted) == rank(M)


@given(
    p=st.sampled_from([2, 3, 5]),
    data=st.data(),
)
@settings(max_examples=60, deadline=None)
def test_solve_round_trip_property(p, data):
    m = data.draw(st.integers(1, 5))
    n = data.draw(st.integers(1, 5))
    flat = data.draw(st.lists(st.integers(0, p - 1), min_size=m * n, max_size=m * n))
    rhs = data.draw(st.lists(st.integers(0, p - 1), min_size=m, max_size=m))
    M = PrimeFieldMatrix(p, np.array(flat).reshape(m, n))
    sys = LinearSystem(M, rhs)
    x = solve(sys)
    assert (x is not None) == is_solvable(sys)
    if x is not None:
        assert np.array_equal(M.to_array() @ x % p, np.array(rhs) % p)


def test_json_round_trip():
    M = PrimeFieldMatrix(7, [[0, 3], [5, 0], [0, 0]])
    obj = M.to_json()
    assert obj["entries"] == [[0, 1, 3], [1, 0, 5]]
    assert PrimeFieldMatrix.from_json(obj) == M
    with pytest.raises(InputError):
        PrimeFieldMatrix.from_json({"p": 7, "rows": 1})


def test_rhs_validation():
    with pytest.raises(InputError):
        LinearSystem(PrimeFieldMatrix.identity(2, 2), [1, 2, 3])
