"""
Central-difference stencils on uniform grids.

Grid-wide functions take an array of samples (grid axes first, any trailing
component axes after) and return values on the nodes far enough from the
boundary: hessian_grid drops 1 node per side, third_derivative_grid 2 and
laplacian_grid 3. The pointwise functions run the same stencils on a small
patch around one node, so both paths agree to the last bit.
"""
import itertools
from typing import Sequence

import numpy as np
from einops import einsum

from slagrigid.numkernel import SymMatrix
from slagrigid.slagfield.field import GraphField, StencilMarginError
from slagrigid.sym3tensor import Sym3Tensor


def _shift(a: np.ndarray, offset: Sequence[int], margin: int) -> np.ndarray:
    # nodes at least `margin` from every edge, displaced by `offset`
    return a[tuple(slice(margin + o, a.shape[k] - margin + o) for k, o in enumerate(offset))]


def crop(a: np.ndarray, n: int, margin: int) -> np.ndarray:
    return _shift(a, (0,) * n, margin)


def _require_nodes(shape: Sequence[int], needed: int):
    if any(s < needed for s in shape):
        raise StencilMarginError(f"grid {list(shape)} needs at least {needed} nodes per axis")


def hessian_grid(values: np.ndarray, h: float) -> np.ndarray:
    """Second derivatives, shape (s_1 - 2, ..., s_n - 2, n, n)."""
    n = values.ndim
    _require_nodes(values.shape, 3)
    unit = np.eye(n, dtype=int)
    center = crop(values, n, 1)
    hess = np.empty(center.shape + (n, n))
    for i in range(n):
        e = unit[i]
        hess[..., i, i] = (_shift(values, e, 1) - 2.0 * center + _shift(values, -e, 1)) / h**2
        for j in range(i + 1, n):
            f = unit[j]
            cross = (
                _shift(values, e + f, 1)
                - _shift(values, e - f, 1)
                - _shift(values, f - e, 1)
                + _shift(values, -e - f, 1)
            ) / (4.0 * h**2)
            hess[..., i, j] = cross
            hess[..., j, i] = cross
    return hess


def gradient_grid(a: np.ndarray, h: float, n: int) -> np.ndarray:
    """Central first differences along the n grid axes; the derivative axis is inserted right after them."""
    _require_nodes(a.shape[:n], 3)
    unit = np.eye(n, dtype=int)
    parts = [(_shift(a, unit[k], 1) - _shift(a, -unit[k], 1)) / (2.0 * h) for k in range(n)]
    return np.stack(parts, axis=n)


def third_derivative_grid(values: np.ndarray, h: float) -> np.ndarray:
    """Fully symmetrized third derivatives, shape (s_1 - 4, ..., s_n - 4, n, n, n)."""
    n = values.ndim
    _require_nodes(values.shape, 5)
    t = gradient_grid(hessian_grid(values, h), h, n)
    grid_axes = list(range(n))
    return sum(
        np.transpose(t, grid_axes + [n + p for p in perm]) for perm in itertools.permutations(range(3))
    ) / 6.0


def log_omega_grid(hess: np.ndarray) -> np.ndarray:
    """ln *Omega = -ln det(I + H^2) / 2 at every node of a Hessian grid."""
    n = hess.shape[-1]
    _, logdet = np.linalg.slogdet(np.eye(n) + hess @ hess)
    return -0.5 * logdet


def laplacian_grid(values: np.ndarray, h: float) -> np.ndarray:
    """
    Laplace-Beltrami operator of the graph metric applied to ln *Omega,

        (1/sqrt(g)) d_i (sqrt(g) g^ij d_j ln *Omega),   g = I + Hess F Hess F,

    every derivative a central difference; shape (s_1 - 6, ..., s_n - 6).
    """
    n = values.ndim
    _require_nodes(values.shape, 7)
    hess = hessian_grid(values, h)
    metric = np.eye(n) + hess @ hess
    _, logdet = np.linalg.slogdet(metric)
    u = -0.5 * logdet
    root_g = np.exp(0.5 * logdet)
    weight = root_g[..., None, None] * np.linalg.inv(metric)

    flux = einsum(crop(weight, n, 1), gradient_grid(u, h, n), "... i j, ... j -> ... i")
    unit = np.eye(n, dtype=int)
    div = sum(
        (_shift(flux[..., i], unit[i], 1) - _shift(flux[..., i], -unit[i], 1)) / (2.0 * h)
        for i in range(n)
    )
    return div / crop(root_g, n, 2)


def _at_center(grid: np.ndarray, n: int) -> np.ndarray:
    return grid[(0,) * n]


def hessian_at(field: GraphField, p: Sequence[int]) -> SymMatrix:
    return SymMatrix.from_dense(_at_center(hessian_grid(field.patch(p, 1), field.spacing), field.n))


def third_derivatives_at(field: GraphField, p: Sequence[int]) -> Sym3Tensor:
    t = _at_center(third_derivative_grid(field.patch(p, 2), field.spacing), field.n)
    return Sym3Tensor.from_dense(t)


def omega_gradient_at(field: GraphField, p: Sequence[int]) -> np.ndarray:
    """Central-difference gradient of the *Omega field in domain coordinates."""
    hess = hessian_grid(field.patch(p, 2), field.spacing)
    omega = np.exp(log_omega_grid(hess))
    return _at_center(gradient_grid(omega, field.spacing, field.n), field.n)


def surface_laplacian(field: GraphField, p: Sequence[int]) -> float:
    return float(_at_center(laplacian_grid(field.patch(p, 3), field.spacing), field.n))
