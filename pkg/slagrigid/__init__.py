import math
from types import SimpleNamespace

__version__ = "0.1.0"

# dimensionless; grid lengths in units of the field's coordinates
cfg = SimpleNamespace(
    tol=1e-9,
    jacobi_max_sweeps=60,
    jacobi_rel_threshold=1e-13,
    rejection_cap=10**6,
    theta_step=math.pi / 720,
    pole_tol=1e-12,
    trace_tol=1e-10,
    report_margin=3,
    quadratic_spacing=1 / 16,
    quadratic_half_width=1.0,
    paraboloid_spacing=1 / 16,
    paraboloid_half_width=1.0,
    expcos_spacing=1 / 64,
    expcos_half_width=0.5,
    max_field_dim=3,
)

from slagrigid.numkernel import SymMatrix, EigenDecomposition, sym_eigen, restricted_min_eigenvalue
from slagrigid.sym3tensor import Sym3Tensor, TraceFreeBasis, trace_free_basis
from slagrigid.stability import DiagonalFormCoefficients, form_coefficients, evaluate_form_24
from slagrigid.regions import Spectrum, RegionReport, classify, m_margin, strengthened_margin
from slagrigid.gaussmap import LagrangianPlane, RotationAngle, lewy_rotate, plane_spectrum
