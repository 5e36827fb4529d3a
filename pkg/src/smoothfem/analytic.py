"""Closed-form benchmark solutions.

Two families live here:

* the pressurized thick-wall cylinder (smooth axisymmetric solution), and
* the leading symmetric/antisymmetric eigenfields of a traction-free V-notch
  (displacement exponents lambda_I, lambda_II from the characteristic
  equations), including the eigenvalue solver and the notch constant Q.

Notch-field conventions: the angle ``phi`` is measured from the notch
*bisector*, so the free faces sit at phi = +/- alpha/2, and vector/tensor
components refer to the frame whose x-axis is the bisector.  Callers working
in a rotated global frame (e.g. the L-shaped domain) apply the rotation
themselves.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .elasticity import PLANE_STRAIN, Material, elastic_constants

log = logging.getLogger(__name__)

MODE_I = "I"
MODE_II = "II"


class AnalyticError(ValueError):
    """Invalid input to an analytic evaluator (geometry, angle, mode...)."""


# ---------------------------------------------------------------------------
# characteristic equation
# ---------------------------------------------------------------------------


def characteristic_residual(lam, alpha: float, mode: str):
    """Residual of the notch characteristic equation.

    sin(lambda alpha) + lambda sin(alpha) = 0   (mode I)
    sin(lambda alpha) - lambda sin(alpha) = 0   (mode II)
    """
    lam = np.asarray(lam, dtype=float)
    sign = 1.0 if mode == MODE_I else -1.0
    return np.sin(lam * alpha) + sign * lam * np.sin(alpha)


def _angular_grid(alpha: float, n: int = 64) -> np.ndarray:
    return np.linspace(-alpha / 2.0, alpha / 2.0, n)


def _eigenfunction_scale(alpha: float, lam: float, mode: str) -> float:
    """Normalized magnitude of the stress eigenfunction over the notch sector.

    Spurious characteristic roots (e.g. lambda = 1 in mode II: a rigid
    rotation) have identically vanishing stress eigenfunctions; this scale is
    ~0 for them and O(1) for genuine roots.
    """
    try:
        Q = q_constant(alpha, lam, mode)
    except AnalyticError:
        return 1.0  # degenerate Q: cannot be the zero eigenfunction
    phi = _angular_grid(alpha)
    F = angular_stress_eigenfunction(lam, Q, mode, phi)
    mag = np.sqrt(np.mean(F * F))
    ref = 1.0 + abs(Q) * (1.0 + abs(lam)) + abs(lam)
    return float(mag / ref)


def solve_singularity_eigenvalue(alpha: float, mode: str) -> float:
    """Smallest positive root of the characteristic equation for the mode.

    Brackets sign changes of the residual on a 400-interval grid over
    (0.1, 1.999) and bisects each to 1e-14, skipping spurious roots whose
    stress eigenfunction vanishes identically.

    Raises:
        AnalyticError: alpha outside (pi, 2 pi], unknown mode, or no root.
    """
    if mode not in (MODE_I, MODE_II):
        raise AnalyticError(f"mode must be 'I' or 'II', got {mode!r}")
    if not (np.pi < alpha <= 2.0 * np.pi + 1e-12):
        raise AnalyticError(
            f"notch opening angle must lie in (pi, 2 pi], got {alpha!r}"
        )

    grid = np.linspace(0.1, 1.999, 401)
    res = characteristic_residual(grid, alpha, mode)
    for i in range(len(grid) - 1):
        lo, hi = grid[i], grid[i + 1]
        flo, fhi = res[i], res[i + 1]
        if flo == 0.0:
            root = float(lo)
        elif flo * fhi > 0.0:
            continue
        else:
            for _ in range(60):  # bisection: interval ~4.7e-3 -> < 1e-14
                mid = 0.5 * (lo + hi)
                fmid = characteristic_residual(mid, alpha, mode)
                if flo * fmid <= 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fmid
                if hi - lo < 1e-15:
                    break
            root = float(0.5 * (lo + hi))
        if _eigenfunction_scale(alpha, root, mode) < 1e-8:
            log.debug("skipping spurious characteristic root %g (mode %s)", root, mode)
            continue
        return root
    raise AnalyticError(
        f"no characteristic root in (0, 2) for alpha={alpha}, mode {mode}"
    )


def q_constant(alpha: float, lam: float, mode: str) -> float:
    """Notch constant Q tying the two trigonometric families of the eigenfield.

    Q_I  = -cos((lam-1) alpha/2) / cos((lam+1) alpha/2)
    Q_II = -sin((lam-1) alpha/2) / sin((lam+1) alpha/2)

    At isolated degenerate angles (e.g. the crack limit alpha = 2 pi with
    lam = 1/2) the formula is 0/0; the value is then recovered as the limit
    along the characteristic-root curve by perturbing alpha and
    Richardson-extrapolating, and a warning is logged.
    """
    if mode == MODE_I:
        num = -np.cos((lam - 1.0) * alpha / 2.0)
        den = np.cos((lam + 1.0) * alpha / 2.0)
    elif mode == MODE_II:
        num = -np.sin((lam - 1.0) * alpha / 2.0)
        den = np.sin((lam + 1.0) * alpha / 2.0)
    else:
        raise AnalyticError(f"mode must be 'I' or 'II', got {mode!r}")
    if abs(den) >= 1e-14:
        return float(num / den)

    if abs(num) >= 1e-10:
        # genuinely infinite limit: refuse rather than guess
        raise AnalyticError(
            f"Q denominator vanishes at alpha={alpha}, lambda={lam} (mode {mode})"
        )
    # 0/0: follow the root curve lambda(alpha) toward the degenerate angle
    log.warning(
        "Q formula degenerate at alpha=%g, lambda=%g (mode %s); "
        "using perturbed-angle limit",
        alpha, lam, mode,
    )
    values = []
    deltas = (1e-4, 2e-4)
    for d in deltas:
        a = alpha - d
        lam_d = solve_singularity_eigenvalue(a, mode)
        values.append(q_constant(a, lam_d, mode))
    # linear Richardson extrapolation to delta -> 0
    return float(2.0 * values[0] - values[1])


# ---------------------------------------------------------------------------
# notch eigenfields
# ---------------------------------------------------------------------------


def angular_stress_eigenfunction(lam: float, Q: float, mode: str, phi):
    """Angular part Phi(phi) of the stress eigenfield, rows (xx, yy, xy).

    The full stress of a single mode is  sigma = K lam r^(lam-1) Phi(phi).
    Valid for any exponent (extraction duals use lam < 0).  Shape: phi (...,)
    -> (..., 3).
    """
    phi = np.asarray(phi, dtype=float)
    a = (lam - 1.0) * phi
    b = (lam - 3.0) * phi
    q1 = Q * (lam + 1.0)
    if mode == MODE_I:
        sxx = (2.0 - q1) * np.cos(a) - (lam - 1.0) * np.cos(b)
        syy = (2.0 + q1) * np.cos(a) + (lam - 1.0) * np.cos(b)
        sxy = q1 * np.sin(a) + (lam - 1.0) * np.sin(b)
    elif mode == MODE_II:
        sxx = (2.0 - q1) * np.sin(a) - (lam - 1.0) * np.sin(b)
        syy = (2.0 + q1) * np.sin(a) + (lam - 1.0) * np.sin(b)
        sxy = -q1 * np.cos(a) - (lam - 1.0) * np.cos(b)
    else:
        raise AnalyticError(f"mode must be 'I' or 'II', got {mode!r}")
    return np.stack([sxx, syy, sxy], axis=-1)


def angular_displacement_eigenfunction(lam: float, Q: float, mode: str, phi, kappa: float):
    """Angular part Psi(phi) of the displacement eigenfield.

    The full displacement of a single mode is u = K r^lam Psi(phi) / (2 mu);
    the 1/(2 mu) factor is NOT included here, so the material enters only
    through kappa.  Valid for any exponent (extraction duals use lam < 0).
    Shape: phi (...,) -> (..., 2).
    """
    phi = np.asarray(phi, dtype=float)
    q1 = Q * (lam + 1.0)
    if mode == MODE_I:
        ux = (kappa - q1) * np.cos(lam * phi) - lam * np.cos((lam - 2.0) * phi)
        uy = (kappa + q1) * np.sin(lam * phi) + lam * np.sin((lam - 2.0) * phi)
    elif mode == MODE_II:
        ux = (kappa - q1) * np.sin(lam * phi) - lam * np.sin((lam - 2.0) * phi)
        uy = -(kappa + q1) * np.cos(lam * phi) - lam * np.cos((lam - 2.0) * phi)
    else:
        raise AnalyticError(f"mode must be 'I' or 'II', got {mode!r}")
    return np.stack([ux, uy], axis=-1)


@dataclass(frozen=True)
class SingularSolution:
    """A two-mode V-notch eigenfield with generalized intensity factors.

    Attributes:
        alpha: notch opening angle (radians), in (pi, 2 pi].
        lambda_I, lambda_II: characteristic exponents of the two modes.
        Q_I, Q_II: notch constants.
        K_I, K_II: generalized stress intensity factors (amplitudes).
        material: elastic material (kappa, mu enter the displacements).
    """

    alpha: float
    lambda_I: float
    lambda_II: float
    Q_I: float
    Q_II: float
    K_I: float
    K_II: float
    material: Material

    def __post_init__(self) -> None:
        for lam, mode in ((self.lambda_I, MODE_I), (self.lambda_II, MODE_II)):
            res = abs(characteristic_residual(lam, self.alpha, mode))
            if res > 1e-12:
                raise AnalyticError(
                    f"lambda_{mode}={lam} does not solve the characteristic "
                    f"equation (residual {res:.2e})"
                )
            if not (0.0 < lam < 2.0):
                raise AnalyticError(f"lambda_{mode}={lam} outside (0, 2)")
        if self.alpha > np.pi and not self.lambda_I < 1.0:
            raise AnalyticError(
                f"reentrant notch (alpha={self.alpha}) must have a singular "
                f"mode I, got lambda_I={self.lambda_I}"
            )

    def with_gsifs(self, K_I: float, K_II: float) -> "SingularSolution":
        return SingularSolution(
            self.alpha, self.lambda_I, self.lambda_II,
            self.Q_I, self.Q_II, K_I, K_II, self.material,
        )


def make_singular_solution(
    alpha: float, material: Material, K_I: float = 1.0, K_II: float = 0.0
) -> SingularSolution:
    """Solve both characteristic equations and package a SingularSolution."""
    lam_I = solve_singularity_eigenvalue(alpha, MODE_I)
    lam_II = solve_singularity_eigenvalue(alpha, MODE_II)
    return SingularSolution(
        alpha=alpha,
        lambda_I=lam_I,
        lambda_II=lam_II,
        Q_I=q_constant(alpha, lam_I, MODE_I),
        Q_II=q_constant(alpha, lam_II, MODE_II),
        K_I=K_I,
        K_II=K_II,
        material=material,
    )


def _check_radius(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise AnalyticError("notch fields require r > 0")
    return r


def williams_displacement(solution: SingularSolution, r, phi) -> np.ndarray:
    """Two-mode notch displacement at polar points (r, phi), notch frame.

    u = K_I r^lambda_I Psi_I(phi) + K_II r^lambda_II Psi_II(phi), including
    the 1/(2 mu) factor.  Broadcasts over arrays; returns shape (..., 2).
    r = 0 is allowed (both exponents are positive, so u -> 0 there); negative
    radii are rejected.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0):
        raise AnalyticError("notch fields require r >= 0")
    phi = np.asarray(phi, dtype=float)
    mu, kappa = elastic_constants(solution.material)
    u = np.zeros(np.broadcast_shapes(r.shape, phi.shape) + (2,))
    for K, lam, Q, mode in (
        (solution.K_I, solution.lambda_I, solution.Q_I, MODE_I),
        (solution.K_II, solution.lambda_II, solution.Q_II, MODE_II),
    ):
        if K == 0.0:
            continue
        psi = angular_displacement_eigenfunction(lam, Q, mode, phi, kappa)
        u = u + (K / (2.0 * mu)) * r[..., None] ** lam * psi
    return u


def williams_stress(solution: SingularSolution, r, phi) -> np.ndarray:
    """Two-mode notch stress at polar points (r, phi), notch frame.

    sigma = K_I lambda_I r^(lambda_I - 1) Phi_I(phi)
          + K_II lambda_II r^(lambda_II - 1) Phi_II(phi).
    Returns shape (..., 3) ordered (xx, yy, xy).
    """
    r = _check_radius(r)
    phi = np.asarray(phi, dtype=float)
    s = np.zeros(np.broadcast_shapes(r.shape, phi.shape) + (3,))
    for K, lam, Q, mode in (
        (solution.K_I, solution.lambda_I, solution.Q_I, MODE_I),
        (solution.K_II, solution.lambda_II, solution.Q_II, MODE_II),
    ):
        if K == 0.0:
            continue
        Phi = angular_stress_eigenfunction(lam, Q, mode, phi)
        s = s + K * lam * r[..., None] ** (lam - 1.0) * Phi
    return s


# ---------------------------------------------------------------------------
# notch frame: global-coordinates view of the eigenfields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NotchFrame:
    """Placement of a notch in global coordinates.

    The notch-frame x-axis is the bisector; ``bisector_angle`` is its global
    direction and ``vertex`` the corner position.  Provides the polar map and
    the vector/tensor rotations between frames.
    """

    vertex: tuple[float, float] = (0.0, 0.0)
    bisector_angle: float = 0.0

    def to_polar(self, points) -> tuple[np.ndarray, np.ndarray]:
        """(r, phi) of global points, phi measured from the bisector."""
        p = np.asarray(points, dtype=float) - np.asarray(self.vertex)
        c, s = np.cos(self.bisector_angle), np.sin(self.bisector_angle)
        xn = c * p[..., 0] + s * p[..., 1]
        yn = -s * p[..., 0] + c * p[..., 1]
        return np.hypot(xn, yn), np.arctan2(yn, xn)

    def vector_to_global(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        c, s = np.cos(self.bisector_angle), np.sin(self.bisector_angle)
        return np.stack(
            [c * v[..., 0] - s * v[..., 1], s * v[..., 0] + c * v[..., 1]],
            axis=-1,
        )

    def stress_to_global(self, sig) -> np.ndarray:
        """Rotate stress 3-vectors (xx, yy, xy) from the notch frame."""
        sig = np.asarray(sig, dtype=float)
        c, s = np.cos(self.bisector_angle), np.sin(self.bisector_angle)
        sxx, syy, sxy = sig[..., 0], sig[..., 1], sig[..., 2]
        return np.stack(
            [
                c * c * sxx + s * s * syy - 2.0 * c * s * sxy,
                s * s * sxx + c * c * syy + 2.0 * c * s * sxy,
                c * s * (sxx - syy) + (c * c - s * s) * sxy,
            ],
            axis=-1,
        )


@dataclass(frozen=True)
class SingularField:
    """A SingularSolution placed in global coordinates via a NotchFrame."""

    solution: SingularSolution
    frame: NotchFrame

    def displacement(self, points) -> np.ndarray:
        r, phi = self.frame.to_polar(points)
        return self.frame.vector_to_global(
            williams_displacement(self.solution, r, phi)
        )

    def stress(self, points) -> np.ndarray:
        r, phi = self.frame.to_polar(points)
        return self.frame.stress_to_global(williams_stress(self.solution, r, phi))

    def traction(self, points, normal) -> np.ndarray:
        """sigma . n with a fixed unit normal; points (..., 2) -> (..., 2)."""
        s = self.stress(points)
        nx, ny = normal
        return np.stack(
            [s[..., 0] * nx + s[..., 2] * ny, s[..., 2] * nx + s[..., 1] * ny],
            axis=-1,
        )

    def with_gsifs(self, K_I: float, K_II: float) -> "SingularField":
        return SingularField(self.solution.with_gsifs(K_I, K_II), self.frame)


# ---------------------------------------------------------------------------
# thick-wall cylinder
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CylinderProblem:
    """Thick-wall cylinder under internal pressure, plane strain.

    Attributes:
        a, b: inner/outer radii with 0 < a < b.
        P: internal pressure (positive = pushing outward on the inner wall).
        material: must be plane strain (the closed form assumes it).
    """

    a: float
    b: float
    P: float
    material: Material

    def __post_init__(self) -> None:
        if not (0.0 < self.a < self.b):
            raise AnalyticError(
                f"radii must satisfy 0 < a < b, got a={self.a}, b={self.b}"
            )
        if not np.isfinite(self.P):
            raise AnalyticError("pressure must be finite")
        if self.material.state != PLANE_STRAIN:
            raise AnalyticError("cylinder closed form assumes plane strain")

    @property
    def c(self) -> float:
        return self.b / self.a


# Relative slack on the annulus containment check.  Quadrature points of
# elements along the curved walls fall inside the chord by O(h^2); the check
# exists to catch misuse (points in the hole / far outside), not that.
_ANNULUS_SLACK = 0.02


def _cylinder_radius(problem: CylinderProblem, x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    if np.any(r < (1.0 - _ANNULUS_SLACK) * problem.a) or np.any(
        r > (1.0 + _ANNULUS_SLACK) * problem.b
    ):
        raise AnalyticError(
            f"point outside the annulus [a={problem.a}, b={problem.b}]"
        )
    return r


def cylinder_displacement(problem: CylinderProblem, x, y) -> np.ndarray:
    """Cartesian displacement of the pressurized cylinder at (x, y).

    Radial closed form u_r(r) = P (1+nu) / (E (c^2-1)) (r (1-2 nu) + b^2 / r),
    rotated to cartesian components.  Returns shape (..., 2).
    """
    r = _cylinder_radius(problem, x, y)
    E, nu = problem.material.E, problem.material.nu
    c2 = problem.c**2
    ur = problem.P * (1.0 + nu) / (E * (c2 - 1.0)) * (
        r * (1.0 - 2.0 * nu) + problem.b**2 / r
    )
    scale = ur / r
    return np.stack([np.asarray(x, float) * scale, np.asarray(y, float) * scale], axis=-1)


def cylinder_stress(problem: CylinderProblem, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Cartesian stress of the pressurized cylinder at (x, y).

    Returns (sigma, sigma_z) where sigma has shape (..., 3) ordered
    (xx, yy, xy) and sigma_z = 2 nu P / (c^2 - 1) is the constant out-of-plane
    stress of the plane-strain solution (reported, never part of 2D energy
    norms).
    """
    r = _cylinder_radius(problem, x, y)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c2 = problem.c**2
    b2r2 = problem.b**2 / r**2
    sr = problem.P * (1.0 - b2r2) / (c2 - 1.0)
    st = problem.P * (1.0 + b2r2) / (c2 - 1.0)
    cs, sn = x / r, y / r
    sxx = sr * cs * cs + st * sn * sn
    syy = sr * sn * sn + st * cs * cs
    sxy = (sr - st) * sn * cs
    sz = 2.0 * problem.material.nu * problem.P / (c2 - 1.0)
    return np.stack([sxx, syy, sxy], axis=-1), np.broadcast_to(sz, r.shape).copy()


def cylinder_radial_stress(problem: CylinderProblem, r) -> tuple[np.ndarray, np.ndarray]:
    """(sigma_r, sigma_theta) at radius r — the polar form, handy in tests."""
    r = np.asarray(r, dtype=float)
    c2 = problem.c**2
    b2r2 = problem.b**2 / r**2
    return (
        problem.P * (1.0 - b2r2) / (c2 - 1.0),
        problem.P * (1.0 + b2r2) / (c2 - 1.0),
    )
