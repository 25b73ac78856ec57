import logging
import math
from dataclasses import dataclass, field as dataclass_field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from einops import einsum

from slagrigid import cfg
from slagrigid.numkernel import EigenDecomposition, SymMatrix, sym_eigen
from slagrigid.regions import RegionReport, Spectrum, classify
from slagrigid.slagfield.field import GraphField, StencilMarginError, load_field
from slagrigid.slagfield.stencils import (
    hessian_at,
    hessian_grid,
    laplacian_grid,
    omega_gradient_at,
    surface_laplacian,
    third_derivative_grid,
    third_derivatives_at,
)
from slagrigid.stability import evaluate_form_24
from slagrigid.sym3tensor import Sym3Tensor, ambient_norm_sq, project_trace_free, traces


def _descending(eig: EigenDecomposition) -> Tuple[np.ndarray, np.ndarray]:
    return eig.eigenvalues[::-1].copy(), eig.eigenvectors[:, ::-1].copy()


def im_det(lam: np.ndarray) -> np.ndarray:
    """Im det(I + i diag(lam)) as prod sqrt(1 + l^2) * sin(sum arctan l), over the last axis."""
    return np.prod(np.sqrt(1.0 + lam**2), axis=-1) * np.sin(np.sum(np.arctan(lam), axis=-1))


def eigenframe_second_form(lam: np.ndarray, q: np.ndarray, third: np.ndarray) -> Sym3Tensor:
    """
    h_abc = F~_abc / sqrt((1 + l_a^2)(1 + l_b^2)(1 + l_c^2)), F~ the third derivatives
    rotated into the eigenvector columns of q.
    """
    rotated = einsum(q, q, q, third, "i a, j b, k c, i j k -> a b c")
    w = np.sqrt(1.0 + lam**2)
    return Sym3Tensor.from_dense(rotated / einsum(w, w, w, "a, b, c -> a b c"))


@dataclass
class PointAnalysis:
    index: Tuple[int, ...]
    coordinates: np.ndarray
    hessian: SymMatrix
    spectrum: Spectrum
    omega: float
    phase: float
    residual: float
    second_form: Sym3Tensor
    a_norm_sq: float
    rhs24: float
    fd_laplacian: Optional[float]
    region: RegionReport

    def to_dict(self) -> dict:
        return {
            "index": list(self.index),
            "coordinates": self.coordinates.tolist(),
            "spectrum": self.spectrum.tolist(),
            "omega": self.omega,
            "phase": self.phase,
            "residual": self.residual,
            "a_norm_sq": self.a_norm_sq,
            "rhs24": self.rhs24,
            "fd_laplacian": self.fd_laplacian,
            "margins": self.region.margins,
            "flags": self.region.flags,
        }


def _assemble(
    fld: GraphField,
    p: Tuple[int, ...],
    hess: np.ndarray,
    third: np.ndarray,
    fd_laplacian: Optional[float],
    c: float,
    K: float,
    tol: float,
) -> PointAnalysis:
    hessian = SymMatrix.from_dense(hess)
    lam, q = _descending(sym_eigen(hessian))
    spectrum = Spectrum(lam)
    stretch = float(np.prod(np.sqrt(1.0 + lam**2)))
    phase = float(np.sum(np.arctan(lam)))
    second_form = eigenframe_second_form(lam, q, third)
    return PointAnalysis(
        index=p,
        coordinates=fld.coordinates(p),
        hessian=hessian,
        spectrum=spectrum,
        omega=1.0 / stretch,
        phase=phase,
        residual=stretch * math.sin(phase) - c,
        second_form=second_form,
        a_norm_sq=ambient_norm_sq(second_form),
        rhs24=-evaluate_form_24(spectrum, second_form),
        fd_laplacian=fd_laplacian,
        region=classify(spectrum, K, tol),
    )


def analyze_point(
    fld: GraphField,
    p: Sequence[int],
    c: Optional[float] = None,
    K: float = 1.0,
    tol: float = cfg.tol,
) -> PointAnalysis:
    """
    Spectrum, *Omega, residual of Im det(I + i Hess F) = c, second fundamental form and
    the analytic Delta ln *Omega at one node (2-node margin; the finite-difference
    Laplacian is filled in when the margin is at least 3).
    """
    p = tuple(int(i) for i in p)
    third = third_derivatives_at(fld, p).to_dense()
    hess = hessian_at(fld, p).to_dense()
    if c is None:
        c = slag_residual_stats(fld).c
    lap = surface_laplacian(fld, p) if fld.margin_of(p) >= 3 else None
    return _assemble(fld, p, hess, third, lap, c, K, tol)


@dataclass(frozen=True)
class ResidualStats:
    c: float
    c_estimated: bool
    max_abs: float
    mean: float
    stddev: float
    count: int

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "c_estimated": self.c_estimated,
            "max_abs": self.max_abs,
            "mean": self.mean,
            "stddev": self.stddev,
            "count": self.count,
        }


def slag_residual_stats(fld: GraphField, c: Optional[float] = None) -> ResidualStats:
    """Residual of Im det(I + i Hess F) = c over every interior node; c defaults to the median."""
    if any(s < 5 for s in fld.shape):
        raise StencilMarginError(f"residual statistics need at least 5 nodes per axis, got {list(fld.shape)}")
    hess = hessian_grid(fld.values, fld.spacing)
    # batched over every node; the pointwise analysis goes through sym_eigen
    values = im_det(np.linalg.eigvalsh(hess)).reshape(-1)
    estimated = c is None
    if estimated:
        c = float(np.median(values))
        logging.info("estimated constant c=%.12g from %d interior nodes", c, len(values))
    residual = values - c
    return ResidualStats(
        c=float(c),
        c_estimated=estimated,
        max_abs=float(np.max(np.abs(residual))),
        mean=float(np.mean(residual)),
        stddev=float(np.std(residual)),
        count=len(values),
    )


def gradient_identity_residual(fld: GraphField, p: Sequence[int]) -> np.ndarray:
    """
    |D_k *Omega + *Omega sum_i l_i h_iik| for each eigen direction k, where D_k is the
    finite-difference derivative of *Omega along the k-th eigenvector divided by
    sqrt(1 + l_k^2).
    """
    p = tuple(int(i) for i in p)
    margin = fld.margin_of(p)
    if margin < 3:
        raise StencilMarginError(f"index {p} is {margin} nodes from the boundary, the gradient identity needs 3")
    lam, q = _descending(sym_eigen(hessian_at(fld, p)))
    h = eigenframe_second_form(lam, q, third_derivatives_at(fld, p).to_dense()).to_dense()
    omega = 1.0 / float(np.prod(np.sqrt(1.0 + lam**2)))

    diag = np.arange(fld.n)
    directional = (q.T @ omega_gradient_at(fld, p)) / np.sqrt(1.0 + lam**2)
    return np.abs(directional + omega * (lam @ h[diag, diag, :]))


@dataclass
class PointReport:
    analysis: PointAnalysis
    mismatch: float
    trace_defect: float
    rhs24_trace_free: float
    a_norm_sq_trace_free: float
    violations: List[str]

    def to_dict(self) -> dict:
        return {
            **self.analysis.to_dict(),
            "mismatch": self.mismatch,
            "trace_defect": self.trace_defect,
            "rhs24_trace_free": self.rhs24_trace_free,
            "a_norm_sq_trace_free": self.a_norm_sq_trace_free,
            "violations": self.violations,
        }


@dataclass
class FieldReport:
    source: str
    n: int
    spacing: float
    K: float
    tolerance: float
    stride: int
    residual: ResidualStats
    points: List[PointReport] = dataclass_field(repr=False)

    @property
    def max_mismatch(self) -> float:
        return max(p.mismatch for p in self.points)

    @property
    def max_trace_defect(self) -> float:
        return max(p.trace_defect for p in self.points)

    @property
    def violations(self) -> List[dict]:
        return [
            {"index": list(p.analysis.index), "kind": kind}
            for p in self.points
            for kind in p.violations
        ]

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "n": self.n,
            "spacing": self.spacing,
            "K": self.K,
            "tolerance": self.tolerance,
            "stride": self.stride,
            "residual": self.residual.to_dict(),
            "max_mismatch": self.max_mismatch,
            "max_trace_defect": self.max_trace_defect,
            "violations": self.violations,
            "points": [p.to_dict() for p in self.points],
        }


def _check_implications(analysis: PointAnalysis, tol: float) -> Tuple[float, float, List[str]]:
    # region implications are stated for trace-free tensors
    trace_free = project_trace_free(analysis.second_form)
    rhs = -evaluate_form_24(analysis.spectrum, trace_free)
    norm_sq = ambient_norm_sq(trace_free)
    flags = analysis.region.flags
    violations = []
    if flags["in_xi"] and rhs > tol:
        violations.append("xi_not_superharmonic")
    if flags["in_xi_prime"] and rhs > -norm_sq + tol:
        violations.append("xi_prime_not_strengthened")
    return rhs, norm_sq, violations


def superharmonicity_report(
    fld: GraphField,
    K: float,
    c: Optional[float] = None,
    tol: float = cfg.tol,
    stride: int = 1,
    margin: int = cfg.report_margin,
) -> FieldReport:
    """
    Point analyses over the interior nodes (every `stride`-th node, aligned with the
    grid center), the mismatch between the analytic and finite-difference
    Delta ln *Omega, and the checks "in Xi => Delta ln *Omega <= 0" and
    "in Xi' => Delta ln *Omega <= -|A|^2".
    """
    if margin < 3:
        raise ValueError(f"the report needs a margin of at least 3 nodes, got {margin}")
    stats = slag_residual_stats(fld, c)
    h = fld.spacing
    hess = hessian_grid(fld.values, h)
    third = third_derivative_grid(fld.values, h)
    lap = laplacian_grid(fld.values, h)

    points = []
    for p in fld.interior_indices(margin, stride):
        analysis = _assemble(
            fld,
            p,
            hess[tuple(i - 1 for i in p)],
            third[tuple(i - 2 for i in p)],
            float(lap[tuple(i - 3 for i in p)]),
            stats.c,
            K,
            tol,
        )
        rhs_tf, norm_tf, violations = _check_implications(analysis, tol)
        points.append(
            PointReport(
                analysis=analysis,
                mismatch=abs(analysis.rhs24 - analysis.fd_laplacian),
                trace_defect=float(np.max(np.abs(traces(analysis.second_form)))),
                rhs24_trace_free=rhs_tf,
                a_norm_sq_trace_free=norm_tf,
                violations=violations,
            )
        )
    if not points:
        raise StencilMarginError(f"grid {list(fld.shape)} has no node {margin} nodes from the boundary")

    report = FieldReport(fld.source, fld.n, h, float(K), tol, stride, stats, points)
    logging.info(
        "field report %s: %d points, max mismatch %.3e, %d violations",
        fld.source, len(points), report.max_mismatch, len(report.violations),
    )
    return report


def convergence_order(errors: Sequence[float], spacings: Sequence[float]) -> List[float]:
    """Observed orders log(e_i / e_{i+1}) / log(h_i / h_{i+1}) between consecutive refinements."""
    if len(errors) != len(spacings) or len(errors) < 2:
        raise ValueError("need matching errors and spacings for at least two grids")
    if any(e <= 0 for e in errors) or any(s <= 0 for s in spacings):
        raise ValueError("errors and spacings must be positive")
    return [
        math.log(errors[i] / errors[i + 1]) / math.log(spacings[i] / spacings[i + 1])
        for i in range(len(errors) - 1)
    ]


def refinement_study(
    source: str,
    spacing: float,
    levels: int,
    K: float,
    c: Optional[float] = None,
    tol: float = cfg.tol,
    half_width: Optional[float] = None,
    stride: int = 1,
) -> Dict[str, list]:
    """
    Field reports for a builtin at spacing, spacing/2, ...; the stride doubles with each
    halving, and mismatches are compared on the physical points every level analyzes.
    """
    if levels < 2:
        raise ValueError(f"a refinement study needs at least 2 levels, got {levels}")
    step = spacing * stride
    spacings, per_level, residuals = [], [], []
    for level in range(levels):
        h = spacing / 2**level
        report = superharmonicity_report(
            load_field(source, h, half_width), K, c, tol, stride * 2**level
        )
        spacings.append(h)
        per_level.append(
            {
                tuple(int(round(x / step)) for x in p.analysis.coordinates): p.mismatch
                for p in report.points
            }
        )
        residuals.append(report.residual.max_abs)

    shared = set.intersection(*(set(m) for m in per_level))
    if not shared:
        raise StencilMarginError("no analyzed point is shared by every refinement level")
    mismatches = [max(m[key] for key in shared) for m in per_level]
    orders = {}
    for name, errors in (("mismatch", mismatches), ("residual", residuals)):
        orders[name] = convergence_order(errors, spacings) if min(errors) > 0 else []
    logging.info("refinement of %s: mismatch orders %s", source, orders["mismatch"])
    return {
        "spacings": spacings,
        "shared_points": len(shared),
        "max_mismatch": mismatches,
        "max_residual": residuals,
        "order_mismatch": orders["mismatch"],
        "order_residual": orders["residual"],
    }
