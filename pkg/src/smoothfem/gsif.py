"""Generalized stress-intensity-factor extraction.

The GSIFs of a solved notch problem are extracted with a reciprocal-work
(Betti) functional.  For each mode the extraction field is the dual
eigenfield with exponent -lambda (which solves the same characteristic
equation); pairing a unit primal mode with its own dual over any contour
around the vertex gives a nonzero constant C, while cross-mode pairings
vanish by parity.  The contour integral is evaluated as an equivalent
domain integral with a plateau weight q (1 near the vertex, linear ramp to
0), plus a boundary correction on the parts of the outer boundary the q
support reaches:

    K C = sum_{boundary edges, q>0} int q [(tau n) . u_h - t . v] ds
          - int_Omega grad(q) . F dOmega,
    F_j = tau_ij u_h_i - sigma_h_ij v_i,

with (v, tau) the calibrated dual and t the imposed traction (the raw
discrete traction on constrained edges).  Notch faces drop out exactly:
both t and tau n vanish there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analytic import (
    MODE_I,
    MODE_II,
    AnalyticError,
    NotchFrame,
    SingularField,
    SingularSolution,
    angular_displacement_eigenfunction,
    angular_stress_eigenfunction,
    q_constant,
)
from .elasticity import elastic_constants
from .quadmap import PARENT_CORNERS, gauss_points_1d, gauss_points_2d, jacobian_det, map_point
from .solver import NEUMANN, BoundaryConditions, DiscreteSolution

__all__ = [
    "GsifError",
    "PlateauFunction",
    "ExtractionDual",
    "GsifEstimate",
    "contour_pairing",
    "calibration_constant",
    "extract_gsif",
    "extract_gsifs",
]


class GsifError(RuntimeError):
    """Extraction cannot proceed (empty ring, degenerate pairing)."""


@dataclass(frozen=True)
class PlateauFunction:
    """Radial cutoff weight: 1 up to r_plateau, linear ramp to 0 at r_outer.

    The gradient is supported only on the ramp annulus, where it points
    inward with magnitude 1/(r_outer - r_plateau).
    """

    center: tuple[float, float] = (0.0, 0.0)
    r_plateau: float = 0.45
    r_outer: float = 0.9

    def __post_init__(self) -> None:
        if not 0.0 < self.r_plateau < self.r_outer:
            raise ValueError(
                f"need 0 < r_plateau < r_outer, got "
                f"({self.r_plateau}, {self.r_outer})"
            )

    def _radii(self, points):
        d = np.asarray(points, dtype=float) - np.asarray(self.center)
        return d, np.hypot(d[..., 0], d[..., 1])

    def value(self, points) -> np.ndarray:
        _, r = self._radii(points)
        ramp = (self.r_outer - r) / (self.r_outer - self.r_plateau)
        return np.clip(ramp, 0.0, 1.0)

    def gradient(self, points) -> np.ndarray:
        d, r = self._radii(points)
        on_ramp = (r > self.r_plateau) & (r < self.r_outer)
        scale = np.where(on_ramp, -1.0 / (self.r_outer - self.r_plateau), 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            rhat = np.where(r[..., None] > 0.0, d / np.maximum(r, 1e-300)[..., None], 0.0)
        return scale[..., None] * rhat


@dataclass(frozen=True)
class ExtractionDual:
    """The dual (negative-exponent) eigenfield of one mode, placed globally.

    v = r^(-lam) Psi(-lam, Q(-lam)) / (2 mu),  tau = -lam r^(-lam-1) Phi(...)
    in the notch frame; both are rotated to global components.
    """

    mode: str
    lam: float  # primal exponent; the dual uses -lam
    Q_dual: float
    frame: NotchFrame
    mu: float
    kappa: float

    def displacement(self, points) -> np.ndarray:
        r, phi = self.frame.to_polar(points)
        if np.any(r <= 0.0):
            raise AnalyticError("extraction dual evaluated at the vertex")
        psi = angular_displacement_eigenfunction(
            -self.lam, self.Q_dual, self.mode, phi, self.kappa
        )
        v = r[..., None] ** (-self.lam) * psi / (2.0 * self.mu)
        return self.frame.vector_to_global(v)

    def stress(self, points) -> np.ndarray:
        r, phi = self.frame.to_polar(points)
        if np.any(r <= 0.0):
            raise AnalyticError("extraction dual evaluated at the vertex")
        Phi = angular_stress_eigenfunction(-self.lam, self.Q_dual, self.mode, phi)
        tau = -self.lam * r[..., None] ** (-self.lam - 1.0) * Phi
        return self.frame.stress_to_global(tau)


def _dual_for(solution: SingularSolution, frame: NotchFrame, mode: str) -> ExtractionDual:
    mu, kappa = elastic_constants(solution.material)
    lam = solution.lambda_I if mode == MODE_I else solution.lambda_II
    return ExtractionDual(
        mode=mode,
        lam=lam,
        Q_dual=q_constant(solution.alpha, -lam, mode),
        frame=frame,
        mu=mu,
        kappa=kappa,
    )


def _traction(stress3: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """sigma . n for stress 3-vectors; normal broadcasts over points."""
    nx, ny = normal[..., 0], normal[..., 1]
    return np.stack(
        [
            stress3[..., 0] * nx + stress3[..., 2] * ny,
            stress3[..., 2] * nx + stress3[..., 1] * ny,
        ],
        axis=-1,
    )


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------


def contour_pairing(
    solution: SingularSolution,
    primal_mode: str,
    dual_mode: str,
    r: float = 1.0,
    n: int = 200,
) -> float:
    """Reciprocal-work pairing of a unit primal mode with a dual mode.

    int_{-alpha/2}^{alpha/2} [(tau rhat) . u - (sigma rhat) . v] r dphi on the
    circle of radius r.  Radius-independent; zero for cross-mode pairs.
    Computed in the notch frame (the pairing is rotation invariant).
    """
    mu, kappa = elastic_constants(solution.material)
    lam_p = solution.lambda_I if primal_mode == MODE_I else solution.lambda_II
    Q_p = solution.Q_I if primal_mode == MODE_I else solution.Q_II
    lam_d = solution.lambda_I if dual_mode == MODE_I else solution.lambda_II
    Q_d = q_constant(solution.alpha, -lam_d, dual_mode)

    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * solution.alpha
    phi = half * x
    w = half * w

    u = r**lam_p * angular_displacement_eigenfunction(lam_p, Q_p, primal_mode, phi, kappa) / (2.0 * mu)
    sig = lam_p * r ** (lam_p - 1.0) * angular_stress_eigenfunction(lam_p, Q_p, primal_mode, phi)
    v = r ** (-lam_d) * angular_displacement_eigenfunction(-lam_d, Q_d, dual_mode, phi, kappa) / (2.0 * mu)
    tau = -lam_d * r ** (-lam_d - 1.0) * angular_stress_eigenfunction(-lam_d, Q_d, dual_mode, phi)

    rhat = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    integrand = np.einsum("ki,ki->k", _traction(tau, rhat), u) - np.einsum(
        "ki,ki->k", _traction(sig, rhat), v
    )
    return float(np.sum(w * integrand) * r)


def calibration_constant(solution: SingularSolution, mode: str) -> float:
    """The C in K C = (extraction functional of the mode's dual)."""
    C = contour_pairing(solution, mode, mode)
    if abs(C) < 1e-10:
        raise GsifError(f"degenerate extraction pairing for mode {mode}")
    return C


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GsifEstimate:
    """Extracted GSIFs with the raw functional pieces kept for diagnosis."""

    K_I: float
    K_II: float
    C_I: float
    C_II: float
    domain_terms: tuple  # (mode I, mode II) values of -int grad(q).F
    boundary_terms: tuple
    plateau: PlateauFunction
    ring_elements: int = 0  # elements with quadrature points on the ramp

    def gsif(self, mode: str) -> float:
        return self.K_I if mode == MODE_I else self.K_II


def _domain_term(
    solution: DiscreteSolution, dual: ExtractionDual, plateau: PlateauFunction, order: int
) -> tuple[float, int]:
    mesh = solution.mesh
    pts, w = gauss_points_2d(order)
    total = 0.0
    n_ring = 0
    for e in range(mesh.n_elements):
        corners = mesh.element_corners(e)
        phys = map_point(corners, pts[:, 0], pts[:, 1])
        gq = plateau.gradient(phys)
        if not np.any(gq):
            continue  # entirely on the plateau or outside the support
        n_ring += 1
        det = jacobian_det(corners, pts[:, 0], pts[:, 1])
        u_h = solution.displacement_at_parent(e, pts[:, 0], pts[:, 1])
        s_h = solution.stress_at_parents(e, pts)
        v = dual.displacement(phys)
        tau = dual.stress(phys)
        F = np.stack(
            [
                tau[:, 0] * u_h[:, 0] + tau[:, 2] * u_h[:, 1]
                - (s_h[:, 0] * v[:, 0] + s_h[:, 2] * v[:, 1]),
                tau[:, 2] * u_h[:, 0] + tau[:, 1] * u_h[:, 1]
                - (s_h[:, 2] * v[:, 0] + s_h[:, 1] * v[:, 1]),
            ],
            axis=-1,
        )
        total += float(np.sum(w * det * np.einsum("ki,ki->k", gq, F)))
    return -total, n_ring


def _boundary_term(
    solution: DiscreteSolution,
    dual: ExtractionDual,
    bcs: BoundaryConditions,
    plateau: PlateauFunction,
) -> float:
    mesh = solution.mesh
    gp, gw = gauss_points_1d(4)
    total = 0.0
    for be in mesh.boundary:
        a, b = be.node_ids
        pa, pb = mesh.coords[a], mesh.coords[b]
        half = 0.5 * (pb - pa)
        x = 0.5 * (pa + pb) + gp[:, None] * half
        q = plateau.value(x)
        if not np.any(q > 0.0):
            continue
        jac = np.linalg.norm(half)
        tang = half / jac
        normal = np.array([tang[1], -tang[0]])  # outward for CCW elements
        u_a = solution.U[2 * a : 2 * a + 2]
        u_b = solution.U[2 * b : 2 * b + 2]
        u_h = np.outer(0.5 * (1.0 - gp), u_a) + np.outer(0.5 * (1.0 + gp), u_b)
        if be.kind == NEUMANN:
            t = np.asarray(bcs.tractions[be.name](x, normal), dtype=float).reshape(-1, 2)
        else:
            # constrained edge inside the support: use the discrete traction
            pc0 = PARENT_CORNERS[be.local_edge]
            pc1 = PARENT_CORNERS[(be.local_edge + 1) % 4]
            par = np.outer(0.5 * (1.0 - gp), pc0) + np.outer(0.5 * (1.0 + gp), pc1)
            t = _traction(solution.stress_at_parents(be.element_id, par), normal)
        tau_n = _traction(dual.stress(x), normal)
        v = dual.displacement(x)
        integrand = np.einsum("ki,ki->k", tau_n, u_h) - np.einsum("ki,ki->k", t, v)
        total += float(np.sum(gw * jac * q * integrand))
    return total


def extract_gsifs(
    solution: DiscreteSolution,
    singular_field: SingularField,
    bcs: BoundaryConditions,
    plateau: PlateauFunction | None = None,
    quad_order: int = 6,
) -> GsifEstimate:
    """Extract both GSIFs of a solved notch problem.

    Args:
        solution: the discrete solution (any formulation).
        singular_field: supplies the notch placement and eigen-constants;
            its amplitudes are ignored.
        bcs: the boundary conditions the solution was computed with (the
            imposed tractions enter the boundary correction).
        plateau: cutoff weight; defaults to the 0.45 / 0.9 plateau centered
            at the notch vertex.
        quad_order: 1D Gauss order per element direction for the domain term.
    """
    frame = singular_field.frame
    sol = singular_field.solution
    if plateau is None:
        plateau = PlateauFunction(center=tuple(np.asarray(frame.vertex, float)))

    Ks, Cs, doms, bnds = [], [], [], []
    n_ring = 0
    for mode in (MODE_I, MODE_II):
        dual = _dual_for(sol, frame, mode)
        C = calibration_constant(sol, mode)
        dom, n_ring = _domain_term(solution, dual, plateau, quad_order)
        if n_ring == 0:
            raise GsifError(
                f"no element quadrature points on the extraction ramp "
                f"({plateau.r_plateau}, {plateau.r_outer}); widen the plateau"
            )
        bnd = _boundary_term(solution, dual, bcs, plateau)
        Ks.append((dom + bnd) / C)
        Cs.append(C)
        doms.append(dom)
        bnds.append(bnd)
    return GsifEstimate(
        K_I=Ks[0],
        K_II=Ks[1],
        C_I=Cs[0],
        C_II=Cs[1],
        domain_terms=tuple(doms),
        boundary_terms=tuple(bnds),
        plateau=plateau,
        ring_elements=n_ring,
    )


def extract_gsif(
    solution: DiscreteSolution,
    singular_field: SingularField,
    bcs: BoundaryConditions,
    mode: str,
    plateau: PlateauFunction | None = None,
) -> float:
    """Single-mode convenience wrapper around extract_gsifs."""
    return extract_gsifs(solution, singular_field, bcs, plateau).gsif(mode)
