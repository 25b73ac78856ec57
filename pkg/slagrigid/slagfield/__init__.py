from slagrigid.slagfield.analysis import (
    FieldReport,
    PointAnalysis,
    ResidualStats,
    analyze_point,
    convergence_order,
    gradient_identity_residual,
    refinement_study,
    slag_residual_stats,
    superharmonicity_report,
)
from slagrigid.slagfield.field import (
    FieldFormatError,
    GraphField,
    StencilMarginError,
    builtin_field,
    is_builtin,
    load_field,
    read_field_file,
    write_field_file,
)
from slagrigid.slagfield.stencils import (
    hessian_at,
    surface_laplacian,
    third_derivatives_at,
)
