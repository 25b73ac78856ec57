"""
Graphical Lagrangian planes and the diagonal unitary rotation acting on them.

Rotating every (x_i, y_i) coordinate plane by the same angle theta shifts the
slope phases arctan(l_i) by -theta, so spectra transform by

    l -> (l cos(theta) - sin(theta)) / (cos(theta) + l sin(theta)).

theta = pi/4 is the Lewy transformation l -> (l - 1)/(l + 1), which takes
convex potentials to potentials with -I <= Hess <= I.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from slagrigid import cfg
from slagrigid.numkernel import SymMatrix, sym_eigen
from slagrigid.regions import Spectrum, as_spectrum, ball_margin, xi_margin


class VerticalPlaneError(ValueError):
    """The rotated plane contains a vertical direction and is no longer a graph."""


@dataclass(frozen=True)
class RotationAngle:
    theta: float

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValueError(f"rotation angle must be finite, got {self.theta}")
        # (-pi/2, pi/2]: theta and theta + pi act identically on slopes
        theta = math.remainder(self.theta, math.pi)
        if theta <= -math.pi / 2:
            theta += math.pi
        object.__setattr__(self, "theta", theta)

    @classmethod
    def lewy(cls) -> "RotationAngle":
        return cls(math.pi / 4)


def plane_spectrum(s: SymMatrix) -> Spectrum:
    return Spectrum(sym_eigen(s).eigenvalues)


@dataclass(frozen=True)
class LagrangianPlane:
    """Graph {(x, L x)} of a symmetric slope matrix L."""

    slope: SymMatrix

    @property
    def spectrum(self) -> Spectrum:
        return plane_spectrum(self.slope)

    def rotated(self, angle: RotationAngle) -> Spectrum:
        return lewy_rotate(self.spectrum, angle)


def lewy_rotate(spec, angle: RotationAngle, pole_tol: float = cfg.pole_tol) -> Spectrum:
    lam = as_spectrum(spec).values
    c, s = math.cos(angle.theta), math.sin(angle.theta)
    den = c + lam * s
    poles = np.flatnonzero(np.abs(den) <= pole_tol)
    if len(poles):
        raise VerticalPlaneError(
            f"slope {lam[poles[0]]} becomes vertical under rotation by theta={angle.theta}"
        )
    return Spectrum((lam * c - s) / den)


@dataclass(frozen=True)
class RotationSearchResult:
    angle: Optional[RotationAngle]
    best_theta: Optional[float]
    ball_margin: float
    xi_margin: float
    admissible: bool
    skipped: int

    def to_dict(self) -> dict:
        return {
            "theta": self.angle.theta if self.angle else None,
            "best_theta": self.best_theta,
            "admissible": self.admissible,
            "margins": {"ball": self.ball_margin, "xi": self.xi_margin},
            "skipped_angles": self.skipped,
        }


def theta_grid(step: float = cfg.theta_step) -> np.ndarray:
    """Uniform grid of (-pi/2, pi/2] with the given step."""
    count = int(round(math.pi / step))
    return -math.pi / 2 + step * np.arange(1, count + 1)


def _worst_margins(spectra: Sequence[Spectrum], angle: RotationAngle, K: float, pole_tol: float):
    worst_ball, worst_xi = math.inf, math.inf
    for spec in spectra:
        rotated = lewy_rotate(spec, angle, pole_tol)
        worst_ball = min(worst_ball, ball_margin(rotated, K))
        worst_xi = min(worst_xi, xi_margin(rotated))
    return worst_ball, worst_xi


def find_admissible_rotation(
    spectra: List,
    K: float,
    tol: float = cfg.tol,
    step: float = cfg.theta_step,
    pole_tol: float = cfg.pole_tol,
) -> RotationSearchResult:
    """
    Grid search for a diagonal rotation placing every spectrum in Xi ∩ B_K.

    The chosen angle maximizes (worst ball margin, worst xi margin)
    lexicographically; ties keep the earliest grid angle. Angles at which some
    slope becomes vertical are skipped.
    """
    if not spectra:
        raise ValueError("need at least one spectrum")
    if not K > 0:
        raise ValueError(f"K must be positive, got {K}")
    spectra = [as_spectrum(s) for s in spectra]

    best = None
    skipped = 0
    for theta in theta_grid(step):
        angle = RotationAngle(float(theta))
        try:
            margins = _worst_margins(spectra, angle, K, pole_tol)
        except VerticalPlaneError:
            skipped += 1
            continue
        if best is None or margins > best[1]:
            best = (angle, margins)

    if best is None:
        logging.warning("every grid angle hits a vertical slope")
        return RotationSearchResult(None, None, -math.inf, -math.inf, False, skipped)

    angle, (ball, xi) = best
    admissible = ball >= -tol and xi >= -tol
    logging.info(
        "best rotation theta=%.6f ball=%.3e xi=%.3e admissible=%s (%d angles skipped)",
        angle.theta, ball, xi, admissible, skipped,
    )
    return RotationSearchResult(
        angle if admissible else None, angle.theta, ball, xi, admissible, skipped
    )
