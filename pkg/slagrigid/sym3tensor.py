"""
Fully symmetric 3-tensors on R^n, stored by sorted multi-index.

Components are keyed by triples (i, j, k) with i <= j <= k in lexicographic
order; the multiplicity m(c) of a component is the number of distinct
orderings of its triple (1, 3 or 6). The ambient inner product is the sum
over all n^3 ordered entries, computed as sum_c m(c) x_c y_c.
"""
import functools
import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from slagrigid.numkernel import DimensionMismatchError, NonFiniteError

Triple = Tuple[int, int, int]


def n_components(n: int) -> int:
    return n * (n + 1) * (n + 2) // 6


def _multiplicity(triple: Triple) -> int:
    distinct = len(set(triple))
    return {1: 1, 2: 3, 3: 6}[distinct]


@functools.lru_cache(maxsize=None)
def component_table(n: int) -> Tuple[Tuple[Triple, int], ...]:
    """(sorted multi-index, multiplicity) for every component, lexicographic order."""
    if n < 1:
        raise ValueError(f"dimension must be positive, got {n}")
    return tuple(
        (triple, _multiplicity(triple))
        for triple in itertools.combinations_with_replacement(range(n), 3)
    )


@functools.lru_cache(maxsize=None)
def _index_map(n: int) -> Dict[Triple, int]:
    return {triple: idx for idx, (triple, _) in enumerate(component_table(n))}


@functools.lru_cache(maxsize=None)
def multiplicities(n: int) -> np.ndarray:
    m = np.array([mult for _, mult in component_table(n)], dtype=float)
    m.flags.writeable = False
    return m


@functools.lru_cache(maxsize=None)
def trace_matrix(n: int) -> np.ndarray:
    """C with (C x)_k = sum_i h_iik for the tensor with component vector x."""
    index = _index_map(n)
    c = np.zeros((n, n_components(n)))
    for k in range(n):
        for i in range(n):
            c[k, index[tuple(sorted((i, i, k)))]] += 1.0
    c.flags.writeable = False
    return c


@dataclass(frozen=True, eq=False)
class Sym3Tensor:
    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        if len(coeffs) != n_components(self.n):
            raise DimensionMismatchError(
                f"a symmetric 3-tensor on R^{self.n} has {n_components(self.n)} components, got {len(coeffs)}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise NonFiniteError("tensor components must be finite")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, n: int) -> "Sym3Tensor":
        return cls(n, np.zeros(n_components(n)))

    @classmethod
    def from_components(cls, n: int, components: Dict[Sequence[int], float]) -> "Sym3Tensor":
        """Zero tensor with the given entries set; index triples may be unsorted (0-based)."""
        coeffs = np.zeros(n_components(n))
        index = _index_map(n)
        for triple, value in components.items():
            key = tuple(sorted(int(i) for i in triple))
            if len(key) != 3 or key not in index:
                raise DimensionMismatchError(f"index {tuple(triple)} is not a component of a tensor on R^{n}")
            coeffs[index[key]] = value
        return cls(n, coeffs)

    @classmethod
    def from_dense(cls, a) -> "Sym3Tensor":
        """Symmetrize an n x n x n array over all index permutations and keep sorted components."""
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        if a.shape != (n, n, n):
            raise DimensionMismatchError(f"expected an n x n x n array, got shape {a.shape}")
        sym = sum(np.transpose(a, perm) for perm in itertools.permutations(range(3))) / 6.0
        rows = np.array([t for t, _ in component_table(n)])
        return cls(n, sym[rows[:, 0], rows[:, 1], rows[:, 2]])

    def __getitem__(self, triple: Sequence[int]) -> float:
        return float(self.coeffs[_index_map(self.n)[tuple(sorted(triple))]])

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n,) * 3)
        for (triple, _), value in zip(component_table(self.n), self.coeffs):
            for perm in set(itertools.permutations(triple)):
                a[perm] = value
        return a

    def __add__(self, other: "Sym3Tensor") -> "Sym3Tensor":
        _check_same_n(self, other)
        return Sym3Tensor(self.n, self.coeffs + other.coeffs)

    def __sub__(self, other: "Sym3Tensor") -> "Sym3Tensor":
        _check_same_n(self, other)
        return Sym3Tensor(self.n, self.coeffs - other.coeffs)

    def scaled(self, factor: float) -> "Sym3Tensor":
        return Sym3Tensor(self.n, factor * self.coeffs)


def _check_same_n(a: Sym3Tensor, b: Sym3Tensor):
    if a.n != b.n:
        raise DimensionMismatchError(f"tensors on R^{a.n} and R^{b.n} cannot be combined")


def ambient_inner(a: Sym3Tensor, b: Sym3Tensor) -> float:
    _check_same_n(a, b)
    return float(np.sum(multiplicities(a.n) * a.coeffs * b.coeffs))


def ambient_norm_sq(t: Sym3Tensor) -> float:
    """Sum of squares over all n^3 ordered entries."""
    return ambient_inner(t, t)


def traces(t: Sym3Tensor) -> np.ndarray:
    """k-th entry is sum_i h_iik."""
    return trace_matrix(t.n) @ t.coeffs


def _project_coeffs(n: int, x: np.ndarray) -> np.ndarray:
    # orthogonal projection onto ker C in the metric W = diag(m):
    # x - W^-1 C^T (C W^-1 C^T)^-1 C x
    c = trace_matrix(n)
    w_inv = 1.0 / multiplicities(n)
    gram = (c * w_inv) @ c.T
    return x - w_inv * (c.T @ np.linalg.solve(gram, c @ x))


def project_trace_free(t: Sym3Tensor) -> Sym3Tensor:
    """Closest trace-free tensor to t in the ambient norm."""
    return Sym3Tensor(t.n, _project_coeffs(t.n, t.coeffs))


@dataclass(frozen=True, eq=False)
class TraceFreeBasis:
    n: int
    elements: Tuple[Sym3Tensor, ...]

    def __len__(self):
        return len(self.elements)

    def scaled_matrix(self) -> np.ndarray:
        """Columns are the elements in ambient-orthonormal coordinates sqrt(m(c)) x_c."""
        d = n_components(self.n)
        if not self.elements:
            return np.zeros((d, 0))
        root_m = np.sqrt(multiplicities(self.n))
        return np.stack([root_m * e.coeffs for e in self.elements], axis=1)

    def expand(self, t: Sym3Tensor) -> np.ndarray:
        """Ambient inner products of t with each basis element."""
        return np.array([ambient_inner(t, e) for e in self.elements])

    def combine(self, weights: Sequence[float]) -> Sym3Tensor:
        coeffs = np.zeros(n_components(self.n))
        for w, e in zip(weights, self.elements):
            coeffs += w * e.coeffs
        return Sym3Tensor(self.n, coeffs)


@functools.lru_cache(maxsize=None)
def trace_free_basis(n: int) -> TraceFreeBasis:
    """
    Ambient-orthonormal basis of the trace-free subspace.

    Gram-Schmidt, in the multiplicity-weighted inner product, over the trace-free
    projections of the coordinate vectors, with a second orthogonalization pass;
    candidates whose remainder is negligible are dropped. Yields D - n elements.
    """
    if n < 1:
        raise ValueError(f"dimension must be positive, got {n}")
    d = n_components(n)
    w = multiplicities(n)
    kept: List[np.ndarray] = []
    for idx in range(d):
        e = np.zeros(d)
        e[idx] = 1.0
        x = _project_coeffs(n, e)
        for _ in range(2):
            for b in kept:
                x = x - np.sum(w * b * x) * b
        norm = math.sqrt(max(float(np.sum(w * x * x)), 0.0))
        if norm > 1e-8:
            kept.append(x / norm)
    if len(kept) != d - n:
        raise RuntimeError(f"trace-free basis for n={n} has {len(kept)} elements, expected {d - n}")
    return TraceFreeBasis(n, tuple(Sym3Tensor(n, x) for x in kept))


def random_trace_free(n: int, seed: int) -> Sym3Tensor:
    """
    Unit trace-free tensor drawn from a seeded stream.

    Standard normals per component from numpy's PCG64 generator, projected onto the
    trace-free subspace and normalized in the ambient norm.
    """
    if n < 2:
        raise ValueError("the trace-free subspace is trivial for n = 1")
    rng = np.random.default_rng(seed)
    x = _project_coeffs(n, rng.standard_normal(n_components(n)))
    x = _project_coeffs(n, x)
    x = x / math.sqrt(float(np.sum(multiplicities(n) * x * x)))
    return Sym3Tensor(n, x)


def random_tensor(n: int, seed: int) -> Sym3Tensor:
    """Symmetric tensor with standard normal components (not trace-free)."""
    rng = np.random.default_rng(seed)
    return Sym3Tensor(n, rng.standard_normal(n_components(n)))
