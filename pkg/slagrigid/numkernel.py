"""
Dense symmetric eigensolver and restricted minimum eigenvalues.

The eigensolver is a cyclic Jacobi method. Each sweep visits every index
pair once, in round-robin order, so that the n/2 rotations of a round act on
disjoint pairs and can be applied as a single orthogonal similarity.
"""
import functools
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Tuple, Union

import numpy as np

from slagrigid import cfg

if TYPE_CHECKING:
    from slagrigid.stability import DiagonalFormCoefficients
    from slagrigid.sym3tensor import TraceFreeBasis


class NonFiniteError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric n x n matrix stored as its packed upper triangle (row-major, i <= j)."""

    n: int
    entries: Tuple[float, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"matrix dimension must be positive, got {self.n}")
        expected = self.n * (self.n + 1) // 2
        if len(self.entries) != expected:
            raise DimensionMismatchError(
                f"packed upper triangle of a {self.n}x{self.n} matrix needs {expected} entries, got {len(self.entries)}"
            )
        for idx, value in enumerate(self.entries):
            if not math.isfinite(value):
                i, j = _unpack_index(self.n, idx)
                raise NonFiniteError(f"non-finite entry {value} at ({i}, {j})")

    @classmethod
    def from_dense(cls, a) -> "SymMatrix":
        """Build from a square array, keeping its upper triangle."""
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
        rows, cols = np.triu_indices(a.shape[0])
        return cls(a.shape[0], tuple(float(v) for v in a[rows, cols]))

    @classmethod
    def diag(cls, values) -> "SymMatrix":
        return cls.from_dense(np.diag(np.asarray(values, dtype=float)))

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        rows, cols = np.triu_indices(self.n)
        a[rows, cols] = self.entries
        a[cols, rows] = self.entries
        return a

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.to_dense()))


def _unpack_index(n: int, idx: int) -> Tuple[int, int]:
    rows, cols = np.triu_indices(n)
    return int(rows[idx]), int(cols[idx])


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return q @ np.diag(self.eigenvalues) @ q.T


@functools.lru_cache(maxsize=None)
def _round_robin(n: int) -> Tuple[Tuple[Tuple[int, int], ...], ...]:
    """Rounds of disjoint index pairs covering all pairs of range(n) once."""
    m = n if n % 2 == 0 else n + 1
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for i in range(m // 2):
            p, q = players[i], players[m - 1 - i]
            # m - 1 is a bye when n is odd
            if p < n and q < n:
                pairs.append((min(p, q), max(p, q)))
        rounds.append(tuple(sorted(pairs)))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _as_dense(m: Union[SymMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(m, SymMatrix):
        return m.to_dense()
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ValueError("matrix dimension must be positive")
    bad = np.argwhere(~np.isfinite(a))
    if len(bad):
        i, j = bad[0]
        raise NonFiniteError(f"non-finite entry {a[i, j]} at ({i}, {j})")
    upper = np.triu(a)
    return upper + np.triu(a, 1).T


def _off_norm(a: np.ndarray) -> float:
    """Frobenius norm of the strictly off-diagonal part."""
    return math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its first component with magnitude above 1e-12 is positive."""
    vectors = vectors.copy()
    for j in range(vectors.shape[1]):
        nz = np.flatnonzero(np.abs(vectors[:, j]) > 1e-12)
        if len(nz) and vectors[nz[0], j] < 0:
            vectors[:, j] = -vectors[:, j]
    return vectors


def sym_eigen(
    m: Union[SymMatrix, np.ndarray],
    max_sweeps: int = cfg.jacobi_max_sweeps,
    rel_threshold: float = cfg.jacobi_rel_threshold,
) -> EigenDecomposition:
    """
    Eigendecomposition of a real symmetric matrix by cyclic Jacobi sweeps.

    Args:
        m: a SymMatrix, or a square array whose upper triangle is used.
        max_sweeps: cap on the number of full sweeps.
        rel_threshold: stop once the off-diagonal Frobenius norm is at most
            rel_threshold * ||m||_F.

    Returns:
        EigenDecomposition with ascending eigenvalues; ties are ordered by the
        sign-normalized eigenvectors, lexicographically descending.
    """
    a = _as_dense(m)
    n = a.shape[0]
    v = np.eye(n)
    target = rel_threshold * float(np.linalg.norm(a))

    if n > 1:
        rounds = _round_robin(n)
        for _ in range(max_sweeps):
            if _off_norm(a) <= target:
                break
            for pairs in rounds:
                p_idx = np.array([p for p, _ in pairs])
                q_idx = np.array([q for _, q in pairs])
                apq = a[p_idx, q_idx]
                active = apq != 0.0
                if not active.any():
                    continue
                p_idx, q_idx, apq = p_idx[active], q_idx[active], apq[active]

                theta = (a[q_idx, q_idx] - a[p_idx, p_idx]) / (2.0 * apq)
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta**2 + 1.0))
                t[theta == 0.0] = 1.0
                c = 1.0 / np.sqrt(t**2 + 1.0)
                s = t * c

                rot = np.eye(n)
                rot[p_idx, p_idx] = c
                rot[q_idx, q_idx] = c
                rot[p_idx, q_idx] = s
                rot[q_idx, p_idx] = -s

                a = rot.T @ a @ rot
                a = 0.5 * (a + a.T)
                a[p_idx, q_idx] = 0.0
                a[q_idx, p_idx] = 0.0
                v = v @ rot

    values = np.diag(a).copy()
    vectors = _canonical_signs(v)
    order = sorted(range(n), key=lambda j: (values[j], tuple(-vectors[:, j])))
    return EigenDecomposition(values[order], vectors[:, order])


def restricted_min_eigenvalue(
    diagonal_form: "DiagonalFormCoefficients", basis: "TraceFreeBasis"
) -> float:
    """
    Minimum of a component-diagonal quadratic form over unit tensors of a subspace.

    The form sum_c coef(c) x_c^2 reads sum_c ratio(c) y_c^2 in the ambient-orthonormal
    coordinates y_c = sqrt(m(c)) x_c, so the answer is the smallest eigenvalue of
    B^T diag(ratio) B where the columns of B are the basis elements in y-coordinates.
    An empty basis has no unit vectors and yields +inf.
    """
    if diagonal_form.n != basis.n:
        raise DimensionMismatchError(
            f"form has n={diagonal_form.n} but basis has n={basis.n}"
        )
    b = basis.scaled_matrix()
    if b.shape[1] == 0:
        return math.inf
    form = b.T @ (np.asarray(diagonal_form.ratios)[:, None] * b)
    return float(sym_eigen(form).eigenvalues[0])

