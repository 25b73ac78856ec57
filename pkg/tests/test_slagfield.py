import json
import math

import numpy as np
import pytest

from slagrigid.slagfield import (
    FieldFormatError,
    GraphField,
    StencilMarginError,
    analyze_point,
    builtin_field,
    convergence_order,
    gradient_identity_residual,
    hessian_at,
    is_builtin,
    load_field,
    read_field_file,
    refinement_study,
    slag_residual_stats,
    superharmonicity_report,
    surface_laplacian,
    third_derivatives_at,
    write_field_file,
)
from slagrigid.slagfield.analysis import eigenframe_second_form
from slagrigid.slagfield.field import harmonic_expcos_field
from slagrigid.stability import evaluate_form_24
from slagrigid.sym3tensor import ambient_norm_sq, traces

from .helpers import random_orthogonal

HALF_ROOT = 1 / (2 * math.sqrt(2))
TILTED = "quadratic:2:1,0.5,-1"


def expcos(h):
    return harmonic_expcos_field(spacing=h, half_width=0.5)


def cubic_1d(h, m, scale=1.0):
    x = h * np.arange(-m, m + 1)
    return GraphField(1, [-m * h], h, (2 * m + 1,), scale * x**3)


def test_quadratic_builtin():
    fld = load_field("quadratic:2:1,0,1", spacing=1 / 16)
    assert fld.shape == (33, 33)
    assert fld.values.size == 1089
    x = fld.origin[0] + fld.spacing * np.arange(33)
    expected = 0.5 * (x[:, None] ** 2 + x[None, :] ** 2)
    np.testing.assert_allclose(fld.values, expected, atol=1e-15)


def test_expcos_builtin():
    fld = load_field("builtin:harmonic_expcos")
    assert fld.n == 2
    assert fld.shape == (65, 65)
    assert fld.coordinates(fld.center_index()).tolist() == [0.0, 0.0]
    x = -0.5 + np.arange(65) / 64
    np.testing.assert_allclose(fld.values, np.exp(x)[:, None] * np.cos(x)[None, :], rtol=1e-15)


def test_paraboloid_builtin():
    fld = builtin_field("paraboloid:3:2", spacing=0.25)
    assert fld.shape == (9, 9, 9)
    assert fld.values[fld.center_index()] == 0.0
    assert fld.values[0, 0, 0] == pytest.approx(3.0)


@pytest.mark.parametrize(
    "descriptor",
    ["cubic:2:1", "quadratic:2:1,0", "quadratic:x:1", "paraboloid:4:1", "paraboloid:2:1,2", "harmonic_expcos:3", "quadratic:2"],
)
def test_bad_builtin(descriptor):
    with pytest.raises(FieldFormatError):
        builtin_field(descriptor)


def test_is_builtin():
    assert is_builtin("harmonic_expcos")
    assert is_builtin("builtin:paraboloid:2:1")
    assert not is_builtin("fields/expcos.json")
    with pytest.raises(FieldFormatError):
        load_field("builtin:cubic:1")


def test_field_file_roundtrip(tmp_path):
    fld = builtin_field(TILTED, spacing=0.25)
    path = tmp_path / "tilted.json"
    write_field_file(fld, path)
    loaded = read_field_file(path)
    assert loaded.shape == fld.shape
    assert loaded.spacing == fld.spacing
    np.testing.assert_array_equal(loaded.values, fld.values)
    assert load_field(str(path)).source == str(path)


def _write(tmp_path, data, text=None):
    path = tmp_path / "field.json"
    path.write_text(text if text is not None else json.dumps(data), encoding="utf-8")
    return path


BASE = {"n": 2, "origin": [0.0, 0.0], "spacing": 0.5, "shape": [5, 5], "values": [0.0] * 25}


@pytest.mark.parametrize(
    "change, message",
    [
        ({"values": [0.0] * 24}, "needs 25 values"),
        ({"extra": 1}, "unknown keys"),
        ({"spacing": [0.5, 0.25]}, "uniform"),
        ({"spacing": -1.0}, "spacing"),
        ({"n": 4, "origin": [0.0] * 4, "shape": [1, 1, 1, 1], "values": [0.0]}, "n must be"),
        ({"origin": [0.0]}, "origin"),
        ({"n": "2"}, "'n'"),
        ({"shape": [5.9, 5]}, "'shape' entry 0 must be an integer"),
        ({"shape": [5, True]}, "'shape' entry 1 must be an integer"),
        ({"origin": ["0", "0"]}, "'origin' entry 0 must be a number"),
        ({"values": [0.0] * 7 + ["1.5"] + [0.0] * 17}, "'values' entry 7 must be a number"),
        ({"values": [0.0] * 24 + [None]}, "'values' entry 24 must be a number"),
        ({"spacing": "0.5"}, "'spacing' must be a number"),
    ],
)
def test_bad_field_file(tmp_path, change, message):
    path = _write(tmp_path, {**BASE, **change})
    with pytest.raises(FieldFormatError, match=message) as info:
        read_field_file(path)
    assert str(path) in str(info.value)


def test_field_file_missing_key(tmp_path):
    data = dict(BASE)
    del data["values"]
    with pytest.raises(FieldFormatError, match="missing keys"):
        read_field_file(_write(tmp_path, data))


def test_field_file_uniform_spacing_list(tmp_path):
    fld = read_field_file(_write(tmp_path, {**BASE, "spacing": [0.5, 0.5]}))
    assert fld.spacing == 0.5


def test_field_file_syntax_and_nan(tmp_path):
    with pytest.raises(FieldFormatError, match="invalid JSON"):
        read_field_file(_write(tmp_path, None, text='{"n": 2,'))
    values = ["NaN" if i == 7 else "0" for i in range(25)]
    text = json.dumps({**BASE, "values": []}).replace("[]", "[" + ", ".join(values) + "]")
    with pytest.raises(FieldFormatError, match=r"non-finite value at node \(1, 2\)"):
        read_field_file(_write(tmp_path, None, text=text))


def test_interior_indices_are_centered():
    fld = builtin_field("paraboloid:2:1", spacing=1 / 8)
    assert fld.shape == (17, 17)
    points = list(fld.interior_indices(3, stride=4))
    assert len(points) == 9
    assert (8, 8) in points
    assert {p[0] for p in points} == {4, 8, 12}
    assert len(list(fld.interior_indices(3))) == 11 * 11


def test_hessian_of_quadratic_is_exact():
    fld = builtin_field(TILTED)
    for p in fld.interior_indices(1, stride=3):
        np.testing.assert_allclose(hessian_at(fld, p).to_dense(), [[1.0, 0.5], [0.5, -1.0]], atol=1e-10)


def test_hessian_of_expcos():
    fld = expcos(1 / 64)
    np.testing.assert_allclose(hessian_at(fld, fld.center_index()).to_dense(), [[1.0, 0.0], [0.0, -1.0]], atol=1e-3)


def test_hessian_of_odd_cubic():
    fld = cubic_1d(0.1, 5)
    assert abs(hessian_at(fld, (5,)).entries[0]) <= 1e-12


def test_hessian_needs_margin():
    fld = builtin_field(TILTED)
    with pytest.raises(StencilMarginError):
        hessian_at(fld, (0, 5))
    with pytest.raises(StencilMarginError):
        hessian_at(fld, (5, 40))


def test_third_derivatives():
    fld = cubic_1d(0.1, 5, scale=1 / 6)
    assert third_derivatives_at(fld, (5,))[(0, 0, 0)] == pytest.approx(1.0, abs=1e-10)
    quad = builtin_field(TILTED)
    assert np.max(np.abs(third_derivatives_at(quad, (10, 20)).coeffs)) <= 1e-10
    t = third_derivatives_at(expcos(1 / 64), (32, 32))
    np.testing.assert_allclose(
        [t[(0, 0, 0)], t[(0, 0, 1)], t[(0, 1, 1)], t[(1, 1, 1)]], [1.0, 0.0, -1.0, 0.0], atol=1e-3
    )
    with pytest.raises(StencilMarginError):
        third_derivatives_at(fld, (1,))


def test_analyze_quadratic_point():
    fld = builtin_field(TILTED)
    result = analyze_point(fld, (12, 20), c=0.0, K=2.0)
    assert abs(result.residual) <= 1e-12
    assert result.a_norm_sq <= 1e-20
    assert abs(result.rhs24) <= 1e-10
    assert result.fd_laplacian == pytest.approx(0.0, abs=1e-10)
    np.testing.assert_allclose(result.spectrum.tolist(), [math.sqrt(1.25), -math.sqrt(1.25)], atol=1e-12)
    assert result.omega == pytest.approx(1 / 2.25)


def test_analyze_point_estimates_c():
    fld = builtin_field("paraboloid:2:1.5")
    result = analyze_point(fld, fld.center_index())
    assert abs(result.residual) <= 1e-12


def test_analyze_expcos_origin():
    fld = expcos(1 / 64)
    result = analyze_point(fld, fld.center_index(), c=0.0, K=2.0)
    np.testing.assert_allclose(result.spectrum.tolist(), [1.0, -1.0], atol=1e-3)
    assert result.omega == pytest.approx(0.5, abs=1e-3)
    assert abs(result.residual) <= 1e-3
    assert abs(result.second_form[(0, 0, 0)]) == pytest.approx(HALF_ROOT, abs=1e-3)
    assert abs(result.second_form[(0, 1, 1)]) == pytest.approx(HALF_ROOT, abs=1e-3)
    assert abs(result.second_form[(1, 1, 1)]) <= 1e-3
    assert result.rhs24 == pytest.approx(-0.5, abs=1e-3)
    assert result.fd_laplacian == pytest.approx(-0.5, abs=1e-2)
    assert result.region.flags["in_xi"]


def test_analyze_point_near_boundary_skips_laplacian():
    fld = expcos(1 / 16)
    result = analyze_point(fld, (2, 8), c=0.0)
    assert result.fd_laplacian is None
    with pytest.raises(StencilMarginError):
        analyze_point(fld, (1, 8), c=0.0)


def test_omega_is_the_determinant_modulus():
    fld = expcos(1 / 32)
    for p in fld.interior_indices(2, stride=5):
        result = analyze_point(fld, p, c=0.0)
        det = np.linalg.det(np.eye(2) + 1j * result.hessian.to_dense())
        assert result.omega == pytest.approx(1 / abs(det), abs=1e-10)
        assert 0 < result.omega <= 1
        assert result.a_norm_sq >= 0


def test_residual_stats_of_quadratics():
    stats = slag_residual_stats(builtin_field(TILTED))
    assert stats.stddev <= 1e-12
    assert stats.c_estimated
    stats = slag_residual_stats(builtin_field("paraboloid:2:1.5"))
    assert stats.c == pytest.approx(3.0, abs=1e-9)
    assert stats.stddev <= 1e-12
    stats = slag_residual_stats(builtin_field("paraboloid:2:1.5"), c=3.0)
    assert not stats.c_estimated
    assert stats.max_abs <= 1e-12


def test_residual_stats_needs_five_nodes():
    with pytest.raises(StencilMarginError):
        slag_residual_stats(cubic_1d(0.1, 1))


def test_expcos_residual_converges():
    spacings = [1 / 64, 1 / 128, 1 / 256]
    errors = [slag_residual_stats(expcos(h), c=0.0).max_abs for h in spacings]
    assert errors[0] / errors[1] >= 3.5
    assert min(convergence_order(errors, spacings)) >= 1.8


def test_residual_stats_agree_with_pointwise_analysis():
    fld = expcos(1 / 16)
    stats = slag_residual_stats(fld, c=0.0)
    assert stats.count == 15 * 15
    pointwise = [abs(analyze_point(fld, p, c=0.0).residual) for p in fld.interior_indices(2)]
    assert max(pointwise) <= stats.max_abs + 1e-13
    tilted = builtin_field(TILTED)
    stats = slag_residual_stats(tilted)
    center = analyze_point(tilted, tilted.center_index())
    assert center.residual == pytest.approx(0.0, abs=1e-12)
    assert stats.max_abs <= 1e-12


def test_expcos_trace_defect_converges():
    # shared nodes at every spacing
    points = [(0.25, 0.25), (-0.25, 0.125), (0.125, -0.25)]
    spacings = [1 / 32, 1 / 64, 1 / 128]
    defects = []
    for h in spacings:
        fld = expcos(h)
        center = np.array(fld.center_index())
        worst = 0.0
        for x in points:
            p = tuple(center + np.rint(np.array(x) / h).astype(int))
            second_form = analyze_point(fld, p, c=0.0).second_form
            worst = max(worst, float(np.max(np.abs(traces(second_form)))))
        defects.append(worst)
    assert defects[-1] <= 1e-4
    assert defects[0] / defects[1] >= 3
    assert min(convergence_order(defects, spacings)) >= 1.5
    assert superharmonicity_report(expcos(1 / 64), 2.0, c=0.0, stride=4).max_trace_defect <= 1e-4


def test_gradient_identity_on_quadratic():
    fld = builtin_field(TILTED)
    assert np.max(gradient_identity_residual(fld, (10, 22))) <= 1e-10


def test_gradient_identity_converges_on_expcos():
    spacings = [1 / 64, 1 / 128, 1 / 256]
    errors = []
    for h in spacings:
        fld = expcos(h)
        errors.append(float(np.max(gradient_identity_residual(fld, fld.center_index()))))
    assert errors[-1] <= 1e-4
    assert min(convergence_order(errors, spacings)) >= 1.8


def test_gradient_identity_one_dimensional():
    # F = x^3 / 6 has *Omega = (1 + x^2)^(-1/2); both sides equal -x / (1 + x^2)^2
    fld = cubic_1d(0.01, 50, scale=1 / 6)
    assert gradient_identity_residual(fld, (80,))[0] <= 1e-4
    assert gradient_identity_residual(fld, (50,))[0] <= 1e-12
    with pytest.raises(StencilMarginError):
        gradient_identity_residual(fld, (2,))


def test_surface_laplacian_of_quadratic():
    fld = builtin_field(TILTED)
    assert surface_laplacian(fld, (16, 16)) == pytest.approx(0.0, abs=1e-10)


def test_surface_laplacian_on_expcos():
    fld = expcos(1 / 256)
    assert surface_laplacian(fld, fld.center_index()) == pytest.approx(-0.5, rel=0.05)

    spacings = [1 / 16, 1 / 32, 1 / 64]
    errors = []
    for h in spacings:
        coarse = expcos(h)
        errors.append(abs(surface_laplacian(coarse, coarse.center_index()) + 0.5))
    assert errors[0] / errors[1] >= 3
    assert min(convergence_order(errors, spacings)) >= 1.5


def test_report_on_quadratic():
    report = superharmonicity_report(builtin_field("quadratic:2:1,0,1"), 2.0, stride=4)
    assert report.violations == []
    assert report.max_mismatch <= 1e-10
    assert report.max_trace_defect <= 1e-10
    assert all(abs(p.analysis.rhs24) <= 1e-10 for p in report.points)
    assert report.residual.stddev <= 1e-12
    data = report.to_dict()
    assert data["stride"] == 4
    assert len(data["points"]) == len(report.points)


def test_report_on_expcos():
    report = superharmonicity_report(expcos(1 / 64), 2.0, c=0.0, stride=4)
    assert report.violations == []
    in_xi = [p for p in report.points if p.analysis.region.flags["in_xi"]]
    assert in_xi
    assert all(p.analysis.rhs24 <= 1e-9 for p in in_xi)
    assert all(p.analysis.coordinates[0] <= 0 for p in in_xi)
    assert report.max_mismatch <= 1e-2


def test_report_needs_interior():
    with pytest.raises(StencilMarginError):
        superharmonicity_report(cubic_1d(0.1, 2), 1.0)
    with pytest.raises(ValueError):
        superharmonicity_report(expcos(1 / 16), 1.0, margin=2)


def test_refinement_study():
    study = refinement_study("harmonic_expcos", 1 / 16, 3, 2.0, c=0.0)
    assert study["spacings"] == [1 / 16, 1 / 32, 1 / 64]
    assert study["shared_points"] == 11 * 11
    assert min(study["order_mismatch"]) >= 1.5
    assert min(study["order_residual"]) >= 1.8
    with pytest.raises(ValueError):
        refinement_study("harmonic_expcos", 1 / 16, 1, 2.0)


def test_second_form_in_degenerate_eigenspace(rng):
    lam = np.array([1.0, 1.0, -0.5])
    third = rng.normal(size=(3, 3, 3))
    q = random_orthogonal(rng, 3)
    for _ in range(5):
        angle = rng.uniform(0, 2 * math.pi)
        mix = np.eye(3)
        mix[:2, :2] = [[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]]
        a = eigenframe_second_form(lam, q, third)
        b = eigenframe_second_form(lam, q @ mix, third)
        assert evaluate_form_24(lam, b) == pytest.approx(evaluate_form_24(lam, a), abs=1e-10)
        assert ambient_norm_sq(b) == pytest.approx(ambient_norm_sq(a), abs=1e-10)


def test_convergence_order():
    assert convergence_order([4e-2, 1e-2, 2.5e-3], [0.2, 0.1, 0.05]) == pytest.approx([2.0, 2.0])
    with pytest.raises(ValueError):
        convergence_order([1.0], [0.1])
    with pytest.raises(ValueError):
        convergence_order([1.0, 0.0], [0.1, 0.05])
