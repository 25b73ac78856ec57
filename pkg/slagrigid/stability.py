"""
Stability quadratic forms of minimal Lagrangian graphs.

With lambda_i the slope eigenvalues and h_ijk the (fully symmetric) second
fundamental form in the eigenframe,

    Delta ln *Omega = -F(h),
    F(h) = sum_ijk h_ijk^2 + sum_k,i lambda_i^2 h_iik^2 + 2 sum_k,i<j lambda_i lambda_j h_ijk^2.

F is diagonal in sorted-component coordinates; `form_coefficients` gives the
table, `evaluate_form_24_bruteforce` the literal n^3 summation. The general
(non-Lagrangian) bracket of Delta *Omega = -*Omega {...} is `evaluate_form_22`.
"""
import math
from dataclasses import dataclass

import numpy as np

from slagrigid import cfg
from slagrigid.numkernel import DimensionMismatchError
from slagrigid.sym3tensor import (
    Sym3Tensor,
    ambient_norm_sq,
    component_table,
    multiplicities,
    traces,
)


class TraceError(ValueError):
    def __init__(self, max_trace: float):
        super().__init__(f"tensor is not trace-free: max |sum_i h_iik| = {max_trace:.3e}")
        self.max_trace = max_trace


def spectrum_values(spec) -> np.ndarray:
    """Eigenvalues of a Spectrum (or any sequence of reals) as a float array."""
    values = np.asarray(getattr(spec, "values", spec), dtype=float).reshape(-1)
    if not np.all(np.isfinite(values)):
        raise ValueError(f"spectrum must be finite, got {values.tolist()}")
    return values


@dataclass(frozen=True, eq=False)
class DiagonalFormCoefficients:
    n: int
    coefs: np.ndarray
    mults: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        return self.coefs / self.mults

    def shifted(self, amount: float) -> "DiagonalFormCoefficients":
        """Form F + amount * |h|^2, i.e. every ratio moved by `amount`."""
        return DiagonalFormCoefficients(self.n, self.coefs + amount * self.mults, self.mults)

    def evaluate(self, t: Sym3Tensor) -> float:
        if t.n != self.n:
            raise DimensionMismatchError(f"form has n={self.n} but tensor has n={t.n}")
        return float(np.sum(self.coefs * t.coeffs**2))


def form_coefficients(spec) -> DiagonalFormCoefficients:
    """
    coef(iii) = 1 + l_i^2
    coef(iij) = 3 + l_i^2 + 2 l_i l_j      (i doubled, i != j)
    coef(ijk) = 6 + 2 (l_i l_j + l_j l_k + l_k l_i)
    """
    lam = spectrum_values(spec)
    n = len(lam)
    coefs = []
    for (a, b, c), _ in component_table(n):
        if a == b == c:
            coefs.append(1.0 + lam[a] ** 2)
        elif a == b or b == c:
            doubled, single = (a, c) if a == b else (c, a)
            coefs.append(3.0 + lam[doubled] ** 2 + 2.0 * lam[doubled] * lam[single])
        else:
            coefs.append(6.0 + 2.0 * (lam[a] * lam[b] + lam[b] * lam[c] + lam[c] * lam[a]))
    return DiagonalFormCoefficients(n, np.array(coefs), np.array(multiplicities(n)))


def _check_dims(lam: np.ndarray, t: Sym3Tensor):
    if len(lam) != t.n:
        raise DimensionMismatchError(f"spectrum has n={len(lam)} but tensor has n={t.n}")


def evaluate_form_24(spec, t: Sym3Tensor) -> float:
    """F(h) through the diagonal coefficient table."""
    lam = spectrum_values(spec)
    _check_dims(lam, t)
    return form_coefficients(lam).evaluate(t)


def evaluate_form_24_bruteforce(spec, t: Sym3Tensor) -> float:
    """F(h) summed term by term over all ordered index triples."""
    lam = spectrum_values(spec)
    _check_dims(lam, t)
    h = t.to_dense()
    n = t.n
    total = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                total += h[i, j, k] ** 2
                if i == j:
                    total += lam[i] ** 2 * h[i, i, k] ** 2
                if i < j:
                    total += 2.0 * lam[i] * lam[j] * h[i, j, k] ** 2
    return total


def strengthened_form(spec, t: Sym3Tensor) -> float:
    """G(h) = F(h) - |h|^2; nonnegativity of G on trace-free h gives Delta ln *Omega <= -|A|^2."""
    return evaluate_form_24(spec, t) - ambient_norm_sq(t)


@dataclass(frozen=True, eq=False)
class AmbientSecondForm:
    """h[a][i][k] = <nabla_{e_i} e_k, e_{n+1+a}>, symmetric in (i, k) only."""

    n: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.shape != (self.n,) * 3:
            raise DimensionMismatchError(f"expected shape {(self.n,) * 3}, got {entries.shape}")
        if not np.allclose(entries, np.swapaxes(entries, 1, 2), rtol=0.0, atol=1e-12):
            raise ValueError("ambient second form must be symmetric in its tangent indices")
        object.__setattr__(self, "entries", entries)


def lagrangianize(t: Sym3Tensor) -> AmbientSecondForm:
    """Identify the normal direction J e_i with e_i: h[n+i][j][k] := h_ijk."""
    return AmbientSecondForm(t.n, t.to_dense())


def evaluate_form_22(spec, big_h: AmbientSecondForm) -> float:
    """
    sum_{a,i,k} h_aik^2 - 2 sum_{k,i<j} l_i l_j h_{n+i,ik} h_{n+j,jk}
                        + 2 sum_{k,i<j} l_i l_j h_{n+j,ik} h_{n+i,jk}
    """
    lam = spectrum_values(spec)
    if len(lam) != big_h.n:
        raise DimensionMismatchError(f"spectrum has n={len(lam)} but second form has n={big_h.n}")
    h = big_h.entries
    n = big_h.n
    total = float(np.sum(h**2))
    for k in range(n):
        for i in range(n):
            for j in range(i + 1, n):
                weight = 2.0 * lam[i] * lam[j]
                total -= weight * h[i, i, k] * h[j, j, k]
                total += weight * h[j, i, k] * h[i, j, k]
    return total


def gradient_term(spec, t: Sym3Tensor) -> float:
    """sum_k (sum_i l_i h_iik)^2, the |grad *Omega|^2 / *Omega^2 contribution."""
    lam = spectrum_values(spec)
    _check_dims(lam, t)
    diag = np.arange(t.n)
    weighted = lam @ t.to_dense()[diag, diag, :]
    return float(np.sum(weighted**2))


def bracket_identity_residual(spec, t: Sym3Tensor) -> float:
    """F(h) - bracket_22(lagrangianize(h)) - sum_k (sum_i l_i h_iik)^2; zero for every symmetric h."""
    return evaluate_form_24(spec, t) - evaluate_form_22(spec, lagrangianize(t)) - gradient_term(spec, t)


def _require_trace_free(t: Sym3Tensor, tol: float):
    max_trace = float(np.max(np.abs(traces(t)))) if t.n else 0.0
    if max_trace > tol:
        raise TraceError(max_trace)


def trace_identity_residual(spec, t: Sym3Tensor, trace_tol: float = cfg.trace_tol) -> float:
    """
    |lhs - rhs| of the substitution of h_iii = -sum_{j != i} h_ijj into sum_i l_i^2 h_iii^2:

        lhs = sum_i l_i^2 h_iii^2
        rhs = sum_{i<j} l_i^2 h_ijj^2 + sum_{i>j} l_i^2 h_ijj^2
              + 2 sum_{i != j, i != l, j < l} l_i^2 h_ijj h_ill
    """
    lam = spectrum_values(spec)
    _check_dims(lam, t)
    _require_trace_free(t, trace_tol)
    h = t.to_dense()
    n = t.n
    lhs = sum(lam[i] ** 2 * h[i, i, i] ** 2 for i in range(n))
    rhs = 0.0
    for i in range(n):
        for j in range(n):
            if j != i:
                rhs += lam[i] ** 2 * h[i, j, j] ** 2
        for j in range(n):
            for l in range(j + 1, n):
                if i != j and i != l:
                    rhs += 2.0 * lam[i] ** 2 * h[i, j, j] * h[i, l, l]
    return abs(lhs - rhs)


def pair_inequality_min(spec, t: Sym3Tensor) -> float:
    """
    Minimum of 2 l_i^2 h_ijj h_ill + (l_i + l_l)^2 h_ill^2 + (l_i + l_j)^2 h_ijj^2
    over i and j < l (both different from i) with l_i l_j + l_j l_l + l_l l_i >= 0.

    Returns +inf when no triple satisfies the condition.
    """
    lam = spectrum_values(spec)
    _check_dims(lam, t)
    n = t.n
    if n < 3:
        raise ValueError(f"the pairwise inequality needs n >= 3, got n={n}")
    h = t.to_dense()
    best = math.inf
    for i in range(n):
        for j in range(n):
            for l in range(j + 1, n):
                if i in (j, l):
                    continue
                if lam[i] * lam[j] + lam[j] * lam[l] + lam[l] * lam[i] < 0:
                    continue
                a, b = h[i, j, j], h[i, l, l]
                value = (
                    2.0 * lam[i] ** 2 * a * b
                    + (lam[i] + lam[l]) ** 2 * b**2
                    + (lam[i] + lam[j]) ** 2 * a**2
                )
                best = min(best, value)
    return best
