"""Energy-norm error measures, effectivity statistics and convergence rates.

All norms are energy norms of stress differences,
||e||^2 = integral (ds)^T D^-1 (ds) dOmega, integrated element by element
with a 4x4 Gauss rule (16x16 on elements touching a singular vertex, where
the exact integrand is steep but integrable).  Global norms are the exact
sums of the element squares by construction — the same quadrature.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .elasticity import compliance_matrix
from .quadmap import gauss_points_2d, jacobian_det, map_point
from .recovery import RecoveredStressField
from .solver import DiscreteSolution

log = logging.getLogger(__name__)

# elements with exact error below this fraction of the global norm are
# excluded from local-effectivity statistics (0/0 noise)
_EXCLUDE_REL = 1e-14


class ErrorComputationError(ValueError):
    """Invalid input to an error/effectivity computation."""


@dataclass(frozen=True)
class ElementError:
    element_id: int
    estimated: float
    exact: float
    theta_e: float  # nan when excluded
    D: float  # nan when excluded


@dataclass(frozen=True)
class ErrorReport:
    """Global and per-element error metrics of one solved case."""

    dof: int
    estimated: float
    exact: float
    recovered: float
    theta: float
    m_abs_D: float
    sigma_D: float
    elements: tuple
    excluded: int


@dataclass(frozen=True)
class ConvergenceSeries:
    dofs: tuple
    values: tuple

    def __post_init__(self) -> None:
        if len(self.dofs) != len(self.values):
            raise ErrorComputationError("dof and value counts differ")
        if any(b <= a for a, b in zip(self.dofs, self.dofs[1:])):
            raise ErrorComputationError("dof counts must increase strictly")


@dataclass(frozen=True)
class RateResult:
    s: float  # global log-log least-squares slope, sign-flipped
    pairwise: tuple
    s_avg: float


def local_deviation(theta_e: float) -> float:
    """Symmetric local effectivity deviation.

    D = theta - 1 for theta >= 1 (overestimation), 1 - 1/theta otherwise, so
    that a factor-two overestimate and a factor-two underestimate sit at
    +1 / -1 symmetrically.
    """
    if theta_e >= 1.0:
        return theta_e - 1.0
    return 1.0 - 1.0 / theta_e


# ---------------------------------------------------------------------------
# quadrature core
# ---------------------------------------------------------------------------


def _element_quadrature(solution: DiscreteSolution, e: int, order: int):
    pts, w = gauss_points_2d(order)
    corners = solution.mesh.element_corners(e)
    det = jacobian_det(corners, pts[:, 0], pts[:, 1])
    phys = map_point(corners, pts[:, 0], pts[:, 1])
    return pts, w * det, phys


def _singular_elements(solution: DiscreteSolution, singular_point) -> np.ndarray:
    """Mask of elements with a corner at the singular vertex."""
    mesh = solution.mesh
    mask = np.zeros(mesh.n_elements, dtype=bool)
    if singular_point is None:
        return mask
    sp = np.asarray(singular_point, float)
    on_vertex = np.linalg.norm(mesh.coords - sp, axis=1) < 1e-12
    hit_nodes = np.nonzero(on_vertex)[0]
    for n in hit_nodes:
        for e in mesh.node_patch(int(n)):
            mask[e] = True
    return mask


def element_error_squares(
    solution: DiscreteSolution,
    recovered_field: RecoveredStressField | None = None,
    exact_stress=None,
    singular_point=None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-element squared energy norms (estimated, exact, recovered-exact).

    estimated: ||sigma* - sigma_h||, exact: ||sigma_ex - sigma_h||,
    recovered: ||sigma* - sigma_ex||.  Entries stay zero when the
    corresponding field is not supplied.
    """
    mesh = solution.mesh
    Dinv = compliance_matrix(solution.material)
    singular = _singular_elements(solution, singular_point)
    est2 = np.zeros(mesh.n_elements)
    ex2 = np.zeros(mesh.n_elements)
    rec2 = np.zeros(mesh.n_elements)
    for e in range(mesh.n_elements):
        order = 16 if singular[e] else 4
        pts, wdet, phys = _element_quadrature(solution, e, order)
        sh = solution.stress_at_parents(e, pts)
        s_star = (
            recovered_field.evaluate_at_parent(e, pts[:, 0], pts[:, 1])
            if recovered_field is not None
            else None
        )
        s_ex = np.asarray(exact_stress(phys), float) if exact_stress is not None else None
        if s_star is not None:
            d = s_star - sh
            est2[e] = np.sum(wdet * np.einsum("ki,ij,kj->k", d, Dinv, d))
        if s_ex is not None:
            d = s_ex - sh
            ex2[e] = np.sum(wdet * np.einsum("ki,ij,kj->k", d, Dinv, d))
        if s_star is not None and s_ex is not None:
            d = s_star - s_ex
            rec2[e] = np.sum(wdet * np.einsum("ki,ij,kj->k", d, Dinv, d))
    return est2, ex2, rec2


def estimated_error_norm(
    solution: DiscreteSolution,
    recovered_field: RecoveredStressField,
    region=None,
) -> float:
    """Zienkiewicz-Zhu estimate ||sigma* - sigma_h|| over the mesh or a region.

    ``region`` is None (whole mesh), an element id, or an iterable of ids.
    """
    est2, _, _ = element_error_squares(solution, recovered_field=recovered_field)
    return float(np.sqrt(_region_sum(est2, region)))


def exact_error_norm(
    solution: DiscreteSolution,
    exact_stress,
    region=None,
    singular_point=None,
) -> float:
    """True energy-norm error ||sigma_ex - sigma_h|| (same quadrature)."""
    _, ex2, _ = element_error_squares(
        solution, exact_stress=exact_stress, singular_point=singular_point
    )
    return float(np.sqrt(_region_sum(ex2, region)))


def _region_sum(values: np.ndarray, region) -> float:
    if region is None:
        return float(values.sum())
    idx = np.atleast_1d(np.asarray(region, dtype=int))
    return float(values[idx].sum())


# ---------------------------------------------------------------------------
# effectivity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EffectivityStats:
    theta: float
    elements: tuple
    m_abs_D: float
    sigma_D: float
    excluded: int


def effectivity(estimated_elem: np.ndarray, exact_elem: np.ndarray) -> EffectivityStats:
    """Global theta plus the local-deviation statistics m(|D|), sigma(D).

    Inputs are per-element energy norms (not squares).  Elements whose exact
    error is below 1e-14 of the global exact norm are excluded from the D
    statistics (logged); sigma uses population normalization.
    """
    estimated_elem = np.asarray(estimated_elem, float)
    exact_elem = np.asarray(exact_elem, float)
    global_est = float(np.sqrt(np.sum(estimated_elem**2)))
    global_ex = float(np.sqrt(np.sum(exact_elem**2)))
    if global_ex <= 0.0:
        raise ErrorComputationError("global exact error is zero; theta undefined")
    theta = global_est / global_ex

    elements = []
    Ds = []
    excluded = 0
    cutoff = _EXCLUDE_REL * global_ex
    for e, (est, ex) in enumerate(zip(estimated_elem, exact_elem)):
        if ex <= cutoff:
            excluded += 1
            elements.append(ElementError(e, float(est), float(ex), np.nan, np.nan))
            continue
        th = float(est / ex)
        D = local_deviation(th)
        Ds.append(D)
        elements.append(ElementError(e, float(est), float(ex), th, D))
    if excluded:
        log.info("effectivity: excluded %d element(s) with ~zero exact error", excluded)
    Ds = np.asarray(Ds)
    if len(Ds) == 0:
        raise ErrorComputationError("all elements excluded from D statistics")
    return EffectivityStats(
        theta=theta,
        elements=tuple(elements),
        m_abs_D=float(np.mean(np.abs(Ds))),
        sigma_D=float(np.std(Ds)),  # population normalization
        excluded=excluded,
    )


def compute_error_report(
    solution: DiscreteSolution,
    recovered_field: RecoveredStressField,
    exact_stress,
    singular_point=None,
) -> ErrorReport:
    """One-pass estimated/exact/recovered norms + effectivity statistics."""
    est2, ex2, rec2 = element_error_squares(
        solution,
        recovered_field=recovered_field,
        exact_stress=exact_stress,
        singular_point=singular_point,
    )
    stats = effectivity(np.sqrt(est2), np.sqrt(ex2))
    return ErrorReport(
        dof=2 * solution.mesh.n_nodes,
        estimated=float(np.sqrt(est2.sum())),
        exact=float(np.sqrt(ex2.sum())),
        recovered=float(np.sqrt(rec2.sum())),
        theta=stats.theta,
        m_abs_D=stats.m_abs_D,
        sigma_D=stats.sigma_D,
        elements=stats.elements,
        excluded=stats.excluded,
    )


# ---------------------------------------------------------------------------
# convergence rates
# ---------------------------------------------------------------------------


def convergence_rate(series: ConvergenceSeries) -> RateResult:
    """Rate s of value ~ dof^(-s): global log-log fit + pairwise average."""
    dofs = np.asarray(series.dofs, float)
    vals = np.asarray(series.values, float)
    if len(dofs) < 2:
        raise ErrorComputationError("need at least two points for a rate")
    if np.any(vals <= 0.0):
        raise ErrorComputationError("rates need strictly positive values")
    ld, lv = np.log(dofs), np.log(vals)
    slope = np.polyfit(ld, lv, 1)[0]
    pair = -(np.diff(lv) / np.diff(ld))
    return RateResult(s=float(-slope), pairwise=tuple(pair), s_avg=float(np.mean(pair)))
