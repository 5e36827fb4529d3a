"""Structured quadrilateral meshes for the benchmark domains.

Meshes are immutable after construction: nodes (dense ids), counter-clockwise
Q4 elements, tagged boundary edges covering the whole boundary, and the
node -> elements adjacency ("patch") map.  Local edge k of an element joins
its local nodes k and (k+1) % 4.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadmap import corner_jacobians, map_point

NEUMANN = "neumann"
DIRICHLET = "dirichlet"


class MeshError(ValueError):
    """Invalid mesh construction input or inconsistent mesh data."""


@dataclass(frozen=True)
class Node:
    id: int
    position: np.ndarray


@dataclass(frozen=True)
class QuadElement:
    id: int
    node_ids: tuple[int, int, int, int]


@dataclass(frozen=True)
class BoundaryEdge:
    """A tagged element edge on the domain boundary.

    kind is "neumann" or "dirichlet"; name identifies the traction function /
    constraint spec supplied at solve time.
    """

    element_id: int
    local_edge: int
    node_ids: tuple[int, int]
    kind: str
    name: str

    @property
    def tag(self) -> str:
        return f"{self.kind}:{self.name}"


@dataclass(frozen=True)
class SmoothingCell:
    """A straight-sided quadrilateral subcell of an element.

    Edges are stored as midpoints, outward unit normals and lengths, ordered
    counter-clockwise; ``parent_rect`` is (xi0, xi1, eta0, eta1) in the
    element's parent domain.
    """

    element_id: int
    cell_index: int
    corners: np.ndarray  # (4, 2) physical, CCW
    area: float
    edge_midpoints: np.ndarray  # (4, 2)
    edge_normals: np.ndarray  # (4, 2) outward unit
    edge_lengths: np.ndarray  # (4,)
    parent_rect: tuple[float, float, float, float]


def quad_area(corners: np.ndarray) -> float:
    """Shoelace area of a straight-sided quadrilateral (positive for CCW)."""
    x, y = corners[:, 0], corners[:, 1]
    return 0.5 * float(
        np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))
    )


class Mesh:
    """Immutable quadrilateral mesh with tagged boundary."""

    def __init__(
        self,
        coords: np.ndarray,
        elements: np.ndarray,
        boundary: list[BoundaryEdge],
    ):
        coords = np.array(coords, dtype=float)
        elements = np.array(elements, dtype=int)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise MeshError("coords must be (n_nodes, 2)")
        if not np.all(np.isfinite(coords)):
            raise MeshError("node positions must be finite")
        if elements.ndim != 2 or elements.shape[1] != 4:
            raise MeshError("elements must be (n_elements, 4)")
        if elements.size and (
            elements.min() < 0 or elements.max() >= len(coords)
        ):
            raise MeshError("element connectivity references unknown nodes")

        coords.setflags(write=False)
        elements.setflags(write=False)
        self.coords = coords
        self.elements = elements
        self.boundary = tuple(boundary)

        # element orientation / degeneracy: bilinear Jacobian positive at all
        # four corners
        for e in range(len(elements)):
            dets = corner_jacobians(self.element_corners(e))
            if np.any(dets <= 0.0):
                raise MeshError(
                    f"element {e} is inverted or degenerate "
                    f"(corner Jacobians {dets})"
                )

        # node -> elements adjacency
        patches: list[list[int]] = [[] for _ in range(len(coords))]
        for e, conn in enumerate(elements):
            for n in conn:
                patches[n].append(e)
        self._patches = tuple(tuple(p) for p in patches)

        self._check_boundary_cover()

    # -- basic queries ------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.coords)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def node(self, node_id: int) -> Node:
        if not (0 <= node_id < self.n_nodes):
            raise MeshError(f"unknown node id {node_id}")
        return Node(node_id, self.coords[node_id])

    def element(self, element_id: int) -> QuadElement:
        if not (0 <= element_id < self.n_elements):
            raise MeshError(f"unknown element id {element_id}")
        return QuadElement(element_id, tuple(int(n) for n in self.elements[element_id]))

    def element_corners(self, element_id: int) -> np.ndarray:
        """(4, 2) physical corner coordinates of an element."""
        return self.coords[self.elements[element_id]]

    def element_area(self, element_id: int) -> float:
        return quad_area(self.element_corners(element_id))

    def edge_nodes(self, element_id: int, local_edge: int) -> tuple[int, int]:
        conn = self.elements[element_id]
        return int(conn[local_edge]), int(conn[(local_edge + 1) % 4])

    def node_patch(self, node_id: int) -> tuple[int, ...]:
        """Element ids whose connectivity contains the node."""
        if not (0 <= node_id < self.n_nodes):
            raise MeshError(f"unknown node id {node_id}")
        return self._patches[node_id]

    def find_node(self, position, tol: float = 1e-9) -> int:
        """Id of the node nearest ``position``; errors if farther than tol."""
        d = np.linalg.norm(self.coords - np.asarray(position, float), axis=1)
        i = int(np.argmin(d))
        if d[i] > tol:
            raise MeshError(f"no node at {position} (nearest is {d[i]:.3e} away)")
        return i

    # -- topology checks ----------------------------------------------------

    def _topological_boundary(self) -> set[tuple[int, int]]:
        """(element, local_edge) pairs whose undirected edge is used once."""
        count: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for e in range(self.n_elements):
            for k in range(4):
                a, b = self.edge_nodes(e, k)
                key = (min(a, b), max(a, b))
                count.setdefault(key, []).append((e, k))
        return {owners[0] for owners in count.values() if len(owners) == 1}

    def _check_boundary_cover(self) -> None:
        topo = self._topological_boundary()
        tagged = {(be.element_id, be.local_edge) for be in self.boundary}
        if len(tagged) != len(self.boundary):
            raise MeshError("duplicate boundary edge tags")
        if tagged != topo:
            missing = topo - tagged
            extra = tagged - topo
            raise MeshError(
                f"boundary tags do not cover the boundary exactly "
                f"(missing {sorted(missing)[:5]}, extra {sorted(extra)[:5]})"
            )

    def boundary_by_name(self, name: str) -> list[BoundaryEdge]:
        return [be for be in self.boundary if be.name == name]


def node_patch(mesh: Mesh, node_id: int) -> tuple[int, ...]:
    """Free-function form of Mesh.node_patch."""
    return mesh.node_patch(node_id)


# ---------------------------------------------------------------------------
# smoothing-cell subdivision
# ---------------------------------------------------------------------------

# Parent-domain subcell grids: (n_xi, n_eta) columns x rows.  The 2-cell
# layout splits at xi = 0; the 8-cell layout is 4 columns x 2 rows.
_SUBCELL_GRID = {1: (1, 1), 2: (2, 1), 4: (2, 2), 8: (4, 2)}


def subcell_grid(nc: int) -> tuple[int, int]:
    if nc not in _SUBCELL_GRID:
        raise MeshError(f"unsupported subcell count {nc} (use 1, 2, 4 or 8)")
    return _SUBCELL_GRID[nc]


def subcell_parent_rects(nc: int) -> list[tuple[float, float, float, float]]:
    """Parent rectangles (xi0, xi1, eta0, eta1), row-major (eta rows outer)."""
    n_xi, n_eta = subcell_grid(nc)
    xs = np.linspace(-1.0, 1.0, n_xi + 1)
    es = np.linspace(-1.0, 1.0, n_eta + 1)
    rects = []
    for j in range(n_eta):
        for i in range(n_xi):
            rects.append((xs[i], xs[i + 1], es[j], es[j + 1]))
    return rects


def subcell_index_at(nc: int, xi: float, eta: float) -> int:
    """Index of the subcell whose parent rectangle contains (xi, eta)."""
    n_xi, n_eta = subcell_grid(nc)
    i = min(int((xi + 1.0) / 2.0 * n_xi), n_xi - 1)
    j = min(int((eta + 1.0) / 2.0 * n_eta), n_eta - 1)
    return j * n_xi + i


def subdivide_element(mesh: Mesh, element_id: int, nc: int) -> list[SmoothingCell]:
    """Partition an element into nc straight-sided smoothing cells.

    Subdivision happens in the parent domain and is pushed through the
    bilinear map; because the parent rectangles are axis-aligned, their
    images have straight edges and the mapped corners describe them exactly.
    """
    corners = mesh.element_corners(element_id)
    cells = []
    for idx, (x0, x1, e0, e1) in enumerate(subcell_parent_rects(nc)):
        pc = np.array([[x0, e0], [x1, e0], [x1, e1], [x0, e1]])
        phys = map_point(corners, pc[:, 0], pc[:, 1])
        area = quad_area(phys)
        if area <= 0.0:
            raise MeshError(
                f"non-positive smoothing-cell area in element {element_id}"
            )
        nxt = np.roll(phys, -1, axis=0)
        tang = nxt - phys
        lengths = np.linalg.norm(tang, axis=1)
        normals = np.stack([tang[:, 1], -tang[:, 0]], axis=-1) / lengths[:, None]
        cells.append(
            SmoothingCell(
                element_id=element_id,
                cell_index=idx,
                corners=phys,
                area=area,
                edge_midpoints=0.5 * (phys + nxt),
                edge_normals=normals,
                edge_lengths=lengths,
                parent_rect=(x0, x1, e0, e1),
            )
        )
    return cells


# ---------------------------------------------------------------------------
# boundary tagging helper
# ---------------------------------------------------------------------------


def _tag_boundary(coords, elements, classify) -> list[BoundaryEdge]:
    """Tag every topological boundary edge via ``classify(p0, p1) -> (kind, name)``."""
    probe = Mesh.__new__(Mesh)  # topology only; bypass full validation
    probe.coords = np.asarray(coords, float)
    probe.elements = np.asarray(elements, int)
    out = []
    for e, k in sorted(probe._topological_boundary()):
        a, b = probe.edge_nodes(e, k)
        kind, name = classify(probe.coords[a], probe.coords[b])
        out.append(BoundaryEdge(e, k, (a, b), kind, name))
    return out


# ---------------------------------------------------------------------------
# benchmark meshes
# ---------------------------------------------------------------------------


def build_cylinder_mesh(a: float, b: float, n: int) -> Mesh:
    """Structured quarter-annulus mesh, m x m elements with m = 4 * 2^(n-1).

    Nodes are uniform in (r, phi) over [a, b] x [0, pi/2] mapped to cartesian.
    Boundary names: "pressure" (inner arc, Neumann), "free" (outer arc,
    Neumann), "sym_y" (phi = 0 edge, Dirichlet u_y = 0), "sym_x"
    (phi = pi/2 edge, Dirichlet u_x = 0).
    """
    if not (0 < a < b):
        raise MeshError(f"inner radius must be smaller than outer (a={a}, b={b})")
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise MeshError(f"refinement level must be an integer >= 1, got {n}")

    m = 4 * 2 ** (n - 1)
    r = np.linspace(a, b, m + 1)
    phi = np.linspace(0.0, np.pi / 2.0, m + 1)
    R, PHI = np.meshgrid(r, phi, indexing="ij")
    coords = np.stack([(R * np.cos(PHI)).ravel(), (R * np.sin(PHI)).ravel()], axis=-1)

    def nid(i, j):
        return i * (m + 1) + j

    elements = np.array(
        [
            [nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)]
            for i in range(m)
            for j in range(m)
        ]
    )

    rtol = 1e-9 * b

    def classify(p0, p1):
        if abs(p0[1]) < rtol and abs(p1[1]) < rtol:
            return DIRICHLET, "sym_y"
        if abs(p0[0]) < rtol and abs(p1[0]) < rtol:
            return DIRICHLET, "sym_x"
        r0, r1 = np.hypot(*p0), np.hypot(*p1)
        if abs(r0 - a) < rtol and abs(r1 - a) < rtol:
            return NEUMANN, "pressure"
        if abs(r0 - b) < rtol and abs(r1 - b) < rtol:
            return NEUMANN, "free"
        raise MeshError(f"unclassifiable cylinder boundary edge {p0}-{p1}")

    return Mesh(coords, elements, _tag_boundary(coords, elements, classify))


def graded_intervals(level: int, grading: float) -> np.ndarray:
    """Graded 1D partition of [0, 1] with 4 * 2^level intervals.

    Interval lengths form a geometric progression, smallest at 0, with total
    largest/smallest ratio grading^level (level 0 or grading 1 is uniform).
    """
    k = 4 * 2**level
    total_ratio = float(grading) ** level
    if total_ratio == 1.0:
        h = np.full(k, 1.0 / k)
    else:
        rho = total_ratio ** (1.0 / (k - 1))
        h = rho ** np.arange(k)
        h /= h.sum()
    t = np.concatenate([[0.0], np.cumsum(h)])
    t[-1] = 1.0
    return t


def build_lshape_mesh(level: int, grading: float) -> Mesh:
    """Graded mesh of the L-shaped domain [-1,1]^2 minus {x>0, y<0}.

    The reentrant corner sits at the origin (a mesh node); the material spans
    global angles [0, 3 pi/2].  Tensor-product grading refines geometrically
    toward the corner, mirrored across both axes.  Boundary names: "outer"
    (the four outer segments, Neumann) and "notch" (the two faces meeting at
    the corner, Neumann).
    """
    if not (isinstance(level, (int, np.integer)) and level >= 0):
        raise MeshError(f"level must be an integer >= 0, got {level}")
    if not (1.0 <= grading <= 20.0):
        raise MeshError(f"grading must lie in [1, 20], got {grading}")

    t = graded_intervals(level, grading)
    ax = np.concatenate([-t[::-1], t[1:]])  # -1 ... 0 ... 1, graded toward 0
    nv = len(ax)

    ids = -np.ones((nv, nv), dtype=int)
    coords = []
    for i in range(nv):
        for j in range(nv):
            x, y = ax[i], ax[j]
            if x > 1e-12 and y < -1e-12:  # inside the removed quadrant
                continue
            ids[i, j] = len(coords)
            coords.append((x, y))
    coords = np.array(coords)

    elements = []
    for i in range(nv - 1):
        for j in range(nv - 1):
            cx = 0.5 * (ax[i] + ax[i + 1])
            cy = 0.5 * (ax[j] + ax[j + 1])
            if cx > 0.0 and cy < 0.0:
                continue
            elements.append(
                [ids[i, j], ids[i + 1, j], ids[i + 1, j + 1], ids[i, j + 1]]
            )
    elements = np.array(elements)

    def classify(p0, p1):
        mx, my = 0.5 * (p0 + p1)
        tol = 1e-12
        if (
            abs(mx - 1.0) < tol
            or abs(mx + 1.0) < tol
            or abs(my - 1.0) < tol
            or abs(my + 1.0) < tol
        ):
            return NEUMANN, "outer"
        if abs(my) < tol and mx > 0.0:
            return NEUMANN, "notch"
        if abs(mx) < tol and my < 0.0:
            return NEUMANN, "notch"
        raise MeshError(f"unclassifiable L-shape boundary edge at ({mx}, {my})")

    mesh = Mesh(coords, elements, _tag_boundary(coords, elements, classify))
    mesh.find_node((0.0, 0.0))  # the singular vertex must be a node
    return mesh


def build_square_mesh(
    n: int, distortion: float = 0.0, seed: int = 0
) -> Mesh:
    """n x n mesh of the unit square, optionally with distorted interior nodes.

    Interior nodes are shifted by uniform(-distortion, distortion) * h in each
    coordinate (deterministic for a given seed).  All boundary edges carry the
    Dirichlet tag "exact" — the patch-test configuration.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise MeshError(f"subdivision count must be an integer >= 1, got {n}")
    if not (0.0 <= distortion <= 0.3):
        raise MeshError("distortion must lie in [0, 0.3] to keep elements valid")

    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t, indexing="ij")
    coords = np.stack([X.ravel(), Y.ravel()], axis=-1)
    if distortion > 0.0:
        rng = np.random.default_rng(seed)
        h = 1.0 / n
        shift = rng.uniform(-distortion * h, distortion * h, size=coords.shape)
        interior = (
            (coords[:, 0] > 1e-12)
            & (coords[:, 0] < 1 - 1e-12)
            & (coords[:, 1] > 1e-12)
            & (coords[:, 1] < 1 - 1e-12)
        )
        coords[interior] += shift[interior]

    def nid(i, j):
        return i * (n + 1) + j

    elements = np.array(
        [
            [nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)]
            for i in range(n)
            for j in range(n)
        ]
    )

    def classify(p0, p1):
        return DIRICHLET, "exact"

    return Mesh(coords, elements, _tag_boundary(coords, elements, classify))


# ---------------------------------------------------------------------------
# plain-text export / import
# ---------------------------------------------------------------------------


def save_mesh(mesh: Mesh, path) -> None:
    """Write the plain-text mesh format (lossless %.17g coordinates)."""
    lines = [f"{mesh.n_nodes} {mesh.n_elements} {len(mesh.boundary)}"]
    for i, (x, y) in enumerate(mesh.coords):
        lines.append(f"{i} {x:.17g} {y:.17g}")
    for e, conn in enumerate(mesh.elements):
        lines.append(f"{e} {conn[0]} {conn[1]} {conn[2]} {conn[3]}")
    for be in mesh.boundary:
        lines.append(f"{be.element_id} {be.local_edge} {be.tag}")
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")


def load_mesh(path) -> Mesh:
    """Read the plain-text mesh format written by save_mesh."""
    with open(path, encoding="ascii") as f:
        tokens = [line.split() for line in f if line.strip()]
    try:
        n_nodes, n_elems, n_bound = (int(v) for v in tokens[0])
        rows = tokens[1:]
        coords = np.empty((n_nodes, 2))
        for row in rows[:n_nodes]:
            coords[int(row[0])] = (float(row[1]), float(row[2]))
        elements = np.empty((n_elems, 4), dtype=int)
        for row in rows[n_nodes : n_nodes + n_elems]:
            elements[int(row[0])] = [int(v) for v in row[1:5]]
        boundary = []
        for row in rows[n_nodes + n_elems : n_nodes + n_elems + n_bound]:
            e, k = int(row[0]), int(row[1])
            kind, name = row[2].split(":", 1)
            a = int(elements[e][k])
            b = int(elements[e][(k + 1) % 4])
            boundary.append(BoundaryEdge(e, k, (a, b), kind, name))
    except (IndexError, ValueError) as exc:
        raise MeshError(f"malformed mesh file {path}: {exc}") from exc
    return Mesh(coords, elements, boundary)
