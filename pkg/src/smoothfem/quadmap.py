"""Bilinear (Q4) reference-element machinery shared across modules.

Parent domain is the square [-1, 1]^2 with corners ordered counter-clockwise:
(-1,-1), (1,-1), (1,1), (-1,1).  ``corners`` arguments are (4, 2) arrays of
the physical corner coordinates in the same order.
"""

from __future__ import annotations

import numpy as np

PARENT_CORNERS = np.array(
    [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]
)


class QuadMapError(RuntimeError):
    """Bilinear-map inversion failed (degenerate or severely distorted quad)."""


def shape_functions(xi, eta) -> np.ndarray:
    """Q4 shape functions N_I(xi, eta); broadcasts, returns (..., 4)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return 0.25 * np.stack(
        [
            (1.0 - xi) * (1.0 - eta),
            (1.0 + xi) * (1.0 - eta),
            (1.0 + xi) * (1.0 + eta),
            (1.0 - xi) * (1.0 + eta),
        ],
        axis=-1,
    )


def shape_gradients(xi, eta) -> np.ndarray:
    """Parent-space gradients dN_I/d(xi, eta); broadcasts, returns (..., 4, 2)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    dxi = 0.25 * np.stack(
        [-(1.0 - eta), (1.0 - eta), (1.0 + eta), -(1.0 + eta)], axis=-1
    )
    deta = 0.25 * np.stack(
        [-(1.0 - xi), -(1.0 + xi), (1.0 + xi), (1.0 - xi)], axis=-1
    )
    return np.stack([dxi, deta], axis=-1)


def map_point(corners: np.ndarray, xi, eta) -> np.ndarray:
    """Physical image of parent point(s); returns (..., 2)."""
    N = shape_functions(xi, eta)
    return N @ corners


def jacobian(corners: np.ndarray, xi, eta) -> np.ndarray:
    """Jacobian dx/d(xi, eta) of the bilinear map; returns (..., 2, 2)."""
    G = shape_gradients(xi, eta)  # (..., 4, 2)
    # J[i, j] = sum_I corners[I, i] * G[I, j]
    return np.einsum("...ij,ik->...kj", G, corners)


def jacobian_det(corners: np.ndarray, xi, eta) -> np.ndarray:
    J = jacobian(corners, xi, eta)
    return J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]


def corner_jacobians(corners: np.ndarray) -> np.ndarray:
    """Jacobian determinants at the 4 parent corners (positivity check)."""
    xi, eta = PARENT_CORNERS[:, 0], PARENT_CORNERS[:, 1]
    return jacobian_det(corners, xi, eta)


def invert_map(
    corners: np.ndarray,
    point: np.ndarray,
    tol: float = 1e-12,
    maxiter: int = 20,
) -> np.ndarray:
    """Parent coordinates of a physical point by Newton iteration.

    Converges on parent-increment norm < tol (well inside machine precision
    for the mildly distorted quads used here; quadratic convergence means
    2-4 iterations in practice).

    Raises:
        QuadMapError: no convergence within maxiter iterations.
    """
    point = np.asarray(point, dtype=float)
    xi = np.zeros(2)
    for _ in range(maxiter):
        res = map_point(corners, xi[0], xi[1]) - point
        J = jacobian(corners, xi[0], xi[1])
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if abs(det) < 1e-30:
            raise QuadMapError("singular Jacobian during bilinear-map inversion")
        step = (
            np.array(
                [
                    J[1, 1] * res[0] - J[0, 1] * res[1],
                    -J[1, 0] * res[0] + J[0, 0] * res[1],
                ]
            )
            / det
        )
        xi = xi - step
        if np.hypot(step[0], step[1]) < tol:
            return xi
    raise QuadMapError(
        f"bilinear-map inversion did not converge in {maxiter} iterations "
        f"for point {point}"
    )


def gauss_points_1d(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    return np.polynomial.legendre.leggauss(order)


def gauss_points_2d(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss rule on the parent square: (n^2, 2) points, (n^2,) weights."""
    x, w = gauss_points_1d(order)
    XI, ETA = np.meshgrid(x, x, indexing="ij")
    WX, WY = np.meshgrid(w, w, indexing="ij")
    pts = np.stack([XI.ravel(), ETA.ravel()], axis=-1)
    return pts, (WX * WY).ravel()
