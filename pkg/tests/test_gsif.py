"""Reciprocal-work GSIF extraction.

The extraction functional pairs the discrete solution with a dual
(negative-exponent) eigenfield through a plateau-weighted domain integral.
Checked here: the plateau weight itself, the dual field's traction-free
faces, radius independence and mode orthogonality of the calibration
pairing, exactness on interpolated eigenfields, linearity, and the
convergence of extracted amplitudes on solved problems (frozen regression
values).
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from smoothfem.analytic import MODE_I, MODE_II, AnalyticError
from smoothfem.benchmarks import LShapeBenchmark
from smoothfem.gsif import (
    GsifError,
    PlateauFunction,
    calibration_constant,
    contour_pairing,
    extract_gsif,
    extract_gsifs,
)
from smoothfem.solver import Formulation, interpolate_solution

BM = LShapeBenchmark()

# calibration pairings of the 3pi/2 notch in the benchmark material,
# frozen from a converged Gauss evaluation (radius-independent, see below)
C_I = 0.019631389706144267
C_II = 0.006408638275563891


def interpolated(benchmark, level=2):
    mesh = benchmark.mesh(level)
    bcs = benchmark.boundary_conditions(mesh)
    sol = interpolate_solution(
        mesh, benchmark.material, Formulation("sfem", 4),
        benchmark.exact_displacement,
    )
    return sol, bcs


# ---------------------------------------------------------------------------
# plateau weight
# ---------------------------------------------------------------------------


def test_plateau_values():
    q = PlateauFunction(center=(1.0, 2.0), r_plateau=0.4, r_outer=0.8)
    pts = np.array([
        [1.0, 2.0],        # center
        [1.3, 2.0],        # on the plateau
        [1.6, 2.0],        # ramp midpoint
        [1.8, 2.0],        # at r_outer
        [3.0, 2.0],        # outside
    ])
    assert_allclose(q.value(pts), [1.0, 1.0, 0.5, 0.0, 0.0], atol=1e-15)


def test_plateau_gradient_support_and_direction():
    q = PlateauFunction(center=(0.0, 0.0), r_plateau=0.45, r_outer=0.9)
    g = q.gradient(np.array([[0.2, 0.1], [2.0, 0.0]]))
    assert_allclose(g, 0.0, atol=0)
    g_ramp = q.gradient(np.array([[0.6, 0.0], [0.0, -0.7]]))
    assert_allclose(g_ramp[0], [-1.0 / 0.45, 0.0], atol=1e-12)
    assert_allclose(g_ramp[1], [0.0, 1.0 / 0.45], atol=1e-12)


def test_plateau_gradient_matches_finite_differences():
    q = PlateauFunction(center=(0.3, -0.2), r_plateau=0.3, r_outer=1.0)
    rng = np.random.default_rng(4)
    pts = rng.uniform(-0.4, 1.0, size=(20, 2))
    h = 1e-7
    for p in pts:
        r = np.hypot(*(p - [0.3, -0.2]))
        if abs(r - 0.3) < 1e-3 or abs(r - 1.0) < 1e-3:
            continue  # kink
        gx = (q.value(p + [h, 0]) - q.value(p - [h, 0])) / (2 * h)
        gy = (q.value(p + [0, h]) - q.value(p - [0, h])) / (2 * h)
        assert_allclose(q.gradient(p), [gx, gy], atol=1e-6)


def test_plateau_validation():
    with pytest.raises(ValueError):
        PlateauFunction(r_plateau=0.9, r_outer=0.45)
    with pytest.raises(ValueError):
        PlateauFunction(r_plateau=0.0, r_outer=0.5)


# ---------------------------------------------------------------------------
# the dual extraction field
# ---------------------------------------------------------------------------


def test_dual_faces_are_traction_free():
    from smoothfem.gsif import _dual_for

    # notch faces of the benchmark: the +x axis (outward normal -y) and the
    # -y axis (outward normal +x)
    for mode in (MODE_I, MODE_II):
        dual = _dual_for(BM.singular_field.solution, BM.singular_field.frame, mode)
        for pts, n in [
            (np.array([[0.3, 0.0], [0.9, 0.0]]), np.array([0.0, -1.0])),
            (np.array([[0.0, -0.3], [0.0, -0.9]]), np.array([1.0, 0.0])),
        ]:
            s = dual.stress(pts)
            t = np.stack(
                [s[:, 0] * n[0] + s[:, 2] * n[1], s[:, 2] * n[0] + s[:, 1] * n[1]],
                axis=-1,
            )
            assert np.abs(t).max() < 1e-10 * np.abs(s).max()


def test_dual_scales_like_negative_exponent():
    from smoothfem.gsif import _dual_for

    dual = _dual_for(BM.singular_field.solution, BM.singular_field.frame, MODE_I)
    lam = BM.singular_field.solution.lambda_I
    p1 = np.array([[-0.2, 0.3]])
    u1, u2 = dual.displacement(p1), dual.displacement(2.0 * p1)
    assert_allclose(u2, u1 * 2.0 ** (-lam), rtol=1e-12)
    s1, s2 = dual.stress(p1), dual.stress(2.0 * p1)
    assert_allclose(s2, s1 * 2.0 ** (-lam - 1.0), rtol=1e-12)


def test_dual_rejects_the_vertex():
    from smoothfem.gsif import _dual_for

    dual = _dual_for(BM.singular_field.solution, BM.singular_field.frame, MODE_I)
    with pytest.raises(AnalyticError):
        dual.displacement(np.array([[0.0, 0.0]]))


# ---------------------------------------------------------------------------
# calibration pairing
# ---------------------------------------------------------------------------


def test_pairing_is_radius_independent():
    sol = BM.singular_field.solution
    base = contour_pairing(sol, MODE_I, MODE_I, r=1.0)
    for r in (0.25, 0.5, 2.0, 7.5):
        assert abs(contour_pairing(sol, MODE_I, MODE_I, r=r) - base) < 1e-12 * abs(base)


def test_cross_mode_pairings_vanish():
    sol = BM.singular_field.solution
    assert abs(contour_pairing(sol, MODE_I, MODE_II)) < 1e-15
    assert abs(contour_pairing(sol, MODE_II, MODE_I)) < 1e-15


def test_calibration_constants_frozen():
    sol = BM.singular_field.solution
    assert_allclose(calibration_constant(sol, MODE_I), C_I, rtol=1e-12)
    assert_allclose(calibration_constant(sol, MODE_II), C_II, rtol=1e-12)


# ---------------------------------------------------------------------------
# extraction on interpolated eigenfields (no solver error in the way)
# ---------------------------------------------------------------------------


def test_interpolated_mode_one_recovers_unit_amplitude():
    sol, bcs = interpolated(BM)
    est = extract_gsifs(sol, BM.singular_field, bcs)
    assert abs(est.K_I - 1.0015738054985355) < 1e-9  # frozen
    assert abs(est.K_II) < 1e-12
    assert est.ring_elements > 0
    assert est.plateau.center == (0.0, 0.0)
    assert_allclose([est.C_I, est.C_II], [C_I, C_II], rtol=1e-12)
    # nothing imposes traction inside the plateau support, so the boundary
    # correction is numerically nil
    assert max(abs(b) for b in est.boundary_terms) < 1e-12


def test_interpolated_mode_two_is_orthogonal():
    bm2 = LShapeBenchmark(K_I=0.0, K_II=1.0)
    sol, bcs = interpolated(bm2)
    est = extract_gsifs(sol, bm2.singular_field, bcs)
    assert abs(est.K_I) < 1e-12
    assert abs(est.K_II - 1.0) < 2e-3


def test_extraction_is_linear_in_the_solution():
    sol1, bcs1 = interpolated(LShapeBenchmark(K_I=1.0, K_II=0.0), level=1)
    sol2, bcs2 = interpolated(LShapeBenchmark(K_I=2.0, K_II=0.0), level=1)
    e1 = extract_gsifs(sol1, BM.singular_field, bcs1)
    e2 = extract_gsifs(sol2, BM.singular_field, bcs2)
    assert_allclose(e2.K_I, 2.0 * e1.K_I, rtol=1e-12)


def test_mixed_mode_amplitudes_separate():
    bm = LShapeBenchmark(K_I=0.7, K_II=-0.4)
    sol, bcs = interpolated(bm, level=1)
    est = extract_gsifs(sol, bm.singular_field, bcs)
    assert abs(est.K_I - 0.7) < 0.02
    assert abs(est.K_II + 0.4) < 0.02


def test_plateau_size_barely_matters():
    sol, bcs = interpolated(BM)
    base = extract_gsifs(sol, BM.singular_field, bcs).K_I
    wide = PlateauFunction(center=(0.0, 0.0), r_plateau=0.45, r_outer=1.1)
    k_wide = extract_gsifs(sol, BM.singular_field, bcs, plateau=wide).K_I
    assert abs(k_wide - base) / abs(base) < 0.01


# ---------------------------------------------------------------------------
# extraction on solved problems
# ---------------------------------------------------------------------------


def test_solved_sequence_converges_to_unit_gsif(solve_cached):
    # frozen from this discretization; the point is the monotone approach
    expected = {1: 0.9855385644898265, 2: 0.9947002440430427, 3: 0.9963207149423241}
    got = {}
    for level, k_ref in expected.items():
        mesh, bcs, sol = solve_cached("lshape", level, "sfem", 4)
        est = extract_gsifs(sol, BM.singular_field, bcs)
        got[level] = est.K_I
        assert abs(est.K_I - k_ref) < 1e-6
        assert abs(est.K_II) < 1e-3
    errs = [abs(got[l] - 1.0) for l in (1, 2, 3)]
    assert errs[0] > errs[1] > errs[2]


def test_single_mode_wrapper(solve_cached):
    mesh, bcs, sol = solve_cached("lshape", 1, "sfem", 4)
    full = extract_gsifs(sol, BM.singular_field, bcs)
    assert extract_gsif(sol, BM.singular_field, bcs, MODE_I) == full.K_I
    assert extract_gsif(sol, BM.singular_field, bcs, MODE_II) == full.K_II
    assert full.gsif(MODE_I) == full.K_I
    assert full.gsif(MODE_II) == full.K_II


def test_empty_ring_raises(solve_cached):
    mesh, bcs, sol = solve_cached("lshape", 1, "sfem", 4)
    needle = PlateauFunction(center=(0.0, 0.0), r_plateau=1e-7, r_outer=2e-7)
    with pytest.raises(GsifError, match="widen the plateau"):
        extract_gsifs(sol, BM.singular_field, bcs, plateau=needle)
