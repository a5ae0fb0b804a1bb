"""Curved triangulations of a rectangle fitted to a closed interface.

A mesh of degree k stores, per element, the (k+1)(k+2)/2 node indices of
its geometry map (Gmsh node ordering).  Elements are labelled by phase
(+1 outside the interface, -1 inside).  Only interface edges are curved;
the outer rectangle boundary stays exactly polygonal.

The built-in generator lays a structured grid over the rectangle,
removes grid points in a band around the interface polyline, inserts the
interface nodes verbatim, triangulates with Delaunay, recovers the
interface segments by edge flips, and smooths the free points.  Degree-k
geometry is obtained afterwards by inserting edge/interior nodes, with
the interface edge nodes placed on the exact interface curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import Delaunay

from .reference import edge_local_nodes, lattice_nodes, reference_element
from .quadrature import triangle_rule

PLUS = 1
MINUS = -1

# Gmsh element types for degree-k triangles and edges.
TRIANGLE_TYPE = {1: 2, 2: 9, 3: 21}
EDGE_TYPE = {1: 1, 2: 8, 3: 26}



def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]

class MeshError(Exception):
    pass


class MeshGenerationError(MeshError):
    pass


class TangledElementError(MeshError):
    def __init__(self, element: int, detj: float):
        super().__init__(
            f"element {element} has non-positive Jacobian determinant {detj:.3e}"
        )
        self.element = element
        self.detj = detj


@dataclass(frozen=True)
class MeshQuality:
    min_angle: float      # radians, over straight vertex triangles
    min_jacobian: float   # min detJ / (2*straight area), dimensionless
    h_max: float


@dataclass(frozen=True)
class Mesh:
    """Immutable degree-k triangulation with phase labels.

    x                flat nodal vector (2M,), interleaved (x0, y0, x1, y1, ...)
    elements         (E, n_k) node indices per element, Gmsh ordering
    phase            (E,) values +1 / -1
    interface_edges  (I, 2) rows (element, local_edge); element is the
                     minus-side element of the edge
    boundary_edges   (B, 2) rows (element, local_edge)
    degree           geometry degree k
    """

    x: np.ndarray
    elements: np.ndarray
    phase: np.ndarray
    interface_edges: np.ndarray
    boundary_edges: np.ndarray
    degree: int

    def __post_init__(self):
        for name in ("x", "elements", "phase", "interface_edges", "boundary_edges"):
            getattr(self, name).setflags(write=False)
        n_expected = (self.degree + 1) * (self.degree + 2) // 2
        if self.elements.shape[1] != n_expected:
            raise MeshError(
                f"degree-{self.degree} elements need {n_expected} nodes, "
                f"got {self.elements.shape[1]}"
            )
        _check_interface_pairing(self.elements, self.phase, self.interface_edges)

    @property
    def coords(self) -> np.ndarray:
        return self.x.reshape(-1, 2)

    @property
    def n_nodes(self) -> int:
        return len(self.x) // 2

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @cached_property
    def vertex_ids(self) -> np.ndarray:
        return np.unique(self.elements[:, :3])

    def edge_nodes(self, element: int, local_edge: int) -> np.ndarray:
        """Node ids along an element edge, ordered along its direction."""
        return self.elements[element, edge_local_nodes(self.degree, local_edge)]

    def interface_node_ids(self) -> np.ndarray:
        """All node ids lying on the interface."""
        if len(self.interface_edges) == 0:
            return np.empty(0, dtype=int)
        ids = [self.edge_nodes(e, le) for e, le in self.interface_edges]
        return np.unique(np.concatenate(ids))

    def boundary_node_ids(self) -> np.ndarray:
        if len(self.boundary_edges) == 0:
            return np.empty(0, dtype=int)
        ids = [self.edge_nodes(e, le) for e, le in self.boundary_edges]
        return np.unique(np.concatenate(ids))


def _check_interface_pairing(elements, phase, interface_edges) -> None:
    """Every interface edge must separate a plus and a minus element and be
    stored with its minus-side incidence."""
    if len(interface_edges) == 0:
        return
    tri = elements[:, :3]
    a = tri.ravel().astype(np.int64)
    b = tri[:, [1, 2, 0]].ravel().astype(np.int64)
    m = int(tri.max()) + 1
    keys = np.minimum(a, b) * m + np.maximum(a, b)
    owner = np.repeat(np.arange(len(tri)), 3)
    order = np.argsort(keys, kind="stable")
    keys_sorted = keys[order]
    owner_sorted = owner[order]

    e = interface_edges[:, 0]
    le = interface_edges[:, 1]
    sa = tri[e, le].astype(np.int64)
    sb = tri[e, (le + 1) % 3].astype(np.int64)
    skeys = np.minimum(sa, sb) * m + np.maximum(sa, sb)
    lo = np.searchsorted(keys_sorted, skeys, side="left")
    hi = np.searchsorted(keys_sorted, skeys, side="right")
    if np.any(hi - lo != 2):
        raise MeshError("an interface edge is not shared by exactly 2 elements")
    p1 = phase[owner_sorted[lo]]
    p2 = phase[owner_sorted[hi - 1]]
    if np.any(p1 == p2):
        raise MeshError("an interface edge does not separate the two phases")
    if np.any(phase[e] != MINUS):
        raise MeshError("interface edges must be stored with minus-side incidence")


# ---------------------------------------------------------------------------
# geometry map


def element_map(mesh: Mesh, element: int, ref_pts):
    """Evaluate the geometry map of one element at reference points.

    Returns (x, J, detJ) with shapes (n, 2), (n, 2, 2), (n,).  J[q, i, j]
    is the derivative of physical coordinate i w.r.t. reference
    coordinate j.  Raises TangledElementError if any detJ <= 0.
    """
    ref_pts = np.atleast_2d(np.asarray(ref_pts, dtype=float))
    x, J, detJ = _element_map_raw(mesh, element, ref_pts)
    if np.any(detJ <= 0.0):
        raise TangledElementError(element, float(detJ.min()))
    return x, J, detJ


def _element_map_raw(mesh: Mesh, element: int, ref_pts: np.ndarray):
    ref = reference_element(mesh.degree)
    xe = mesh.coords[mesh.elements[element]]          # (n_loc, 2)
    vals = ref.shape_values(ref_pts)                  # (n_loc, n)
    grads = ref.shape_gradients(ref_pts)              # (n_loc, n, 2)
    x = vals.T @ xe                                   # (n, 2)
    J = np.einsum("lnj,li->nij", grads, xe)           # (n, 2, 2)
    detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    return x, J, detJ


def quality(mesh: Mesh) -> MeshQuality:
    """Minimum vertex angle, scaled Jacobian bound, and largest edge."""
    tri = mesh.coords[mesh.elements[:, :3]]           # (E, 3, 2)
    edges = tri[:, [1, 2, 0]] - tri[:, [0, 1, 2]]
    h_max = float(np.linalg.norm(edges, axis=2).max())
    angles = np.empty((len(tri), 3))
    for i in range(3):
        u = tri[:, (i + 1) % 3] - tri[:, i]
        v = tri[:, (i + 2) % 3] - tri[:, i]
        c = (u * v).sum(axis=1) / np.maximum(
            np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1), 1e-300
        )
        angles[:, i] = np.arccos(np.clip(c, -1.0, 1.0))
    min_angle = float(angles.min())

    rule = triangle_rule(2 * mesh.degree + 2)
    ref = reference_element(mesh.degree)
    grads = ref.shape_gradients(rule.points)          # (n_loc, Q, 2)
    xs = mesh.coords[mesh.elements]                   # (E, n_loc, 2)
    J = np.einsum("lqj,eli->eqij", grads, xs)
    detJ = J[:, :, 0, 0] * J[:, :, 1, 1] - J[:, :, 0, 1] * J[:, :, 1, 0]
    straight_area2 = np.abs(_cross2(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]))
    scaled = detJ / np.maximum(straight_area2, 1e-300)[:, None]
    return MeshQuality(min_angle=min_angle, min_jacobian=float(scaled.min()),
                       h_max=h_max)


def displace(mesh: Mesh, d: np.ndarray) -> Mesh:
    """Mesh with nodes x + d; connectivity and labels are shared."""
    d = np.asarray(d, dtype=float)
    if d.shape != mesh.x.shape:
        raise MeshError(f"displacement has shape {d.shape}, expected {mesh.x.shape}")
    return Mesh(
        x=mesh.x + d,
        elements=mesh.elements,
        phase=mesh.phase,
        interface_edges=mesh.interface_edges,
        boundary_edges=mesh.boundary_edges,
        degree=mesh.degree,
    )


# ---------------------------------------------------------------------------
# generation


def generate_rect_mesh(rect, h: float, k: int) -> Mesh:
    """Structured single-phase triangulation of a rectangle (no interface)."""
    x0, y0, x1, y1 = rect
    if h <= 0 or x1 <= x0 or y1 <= y0:
        raise MeshGenerationError("invalid rectangle or mesh size")
    nx = max(2, round((x1 - x0) / h))
    ny = max(2, round((y1 - y0) / h))
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    tris = np.array(tris, dtype=int)
    phase = np.full(len(tris), PLUS, dtype=np.int8)
    return _elevate(pts, tris, phase, {}, rect, k)


def generate_bubble_mesh(rect, center, radius: float, h: float, k: int) -> Mesh:
    """Fitted mesh of a rectangle with a circular interface.

    Interface nodes (including the curved-edge nodes for k >= 2) lie
    exactly on the circle; interior elements are straight.
    """
    x0, y0, x1, y1 = rect
    cx, cy = center
    if k not in (1, 2, 3):
        raise MeshGenerationError(f"degree k={k} not supported")
    if h <= 0:
        raise MeshGenerationError("mesh size must be positive")
    clearance = min(cx - radius - x0, x1 - cx - radius,
                    cy - radius - y0, y1 - cy - radius)
    if radius <= 0 or clearance <= h:
        raise MeshGenerationError(
            f"circle (center {center}, radius {radius}) must lie strictly inside "
            f"{rect} with clearance > h={h}; clearance is {clearance:.4g}"
        )
    # keep the ring density proportional to 1/h so nested-mesh studies
    # refine the interface by the same factor as the bulk
    n_ring = max(8, int(round(2.0 * math.pi * radius / h)))
    theta = 2.0 * math.pi * np.arange(n_ring) / n_ring
    ring = np.column_stack([cx + radius * np.cos(theta), cy + radius * np.sin(theta)])

    def curve(i0, i1, s):
        # arc-equidistant parametrization of the ring segment i0 -> i1
        t0, t1 = theta[i0], theta[i1]
        dt = (t1 - t0 + math.pi) % (2.0 * math.pi) - math.pi
        t = t0 + dt * np.asarray(s, dtype=float)
        return np.column_stack([cx + radius * np.cos(t), cy + radius * np.sin(t)])

    return fit_interface_mesh(rect, ring, h, k, segment_curve=curve)


def fit_interface_mesh(rect, ring: np.ndarray, h: float, k: int,
                       segment_curve=None,
                       min_angle: float = math.pi / 18.0) -> Mesh:
    """Fitted mesh of the rectangle around a closed interface polyline.

    ring           (n, 2) ordered vertices of the closed interface; kept
                   verbatim as mesh nodes
    segment_curve  optional callable (i0, i1, s) -> (len(s), 2) giving
                   points of the curved interface at parameters s along
                   the directed ring segment i0 -> i1 (s=0 and s=1 are the
                   segment endpoints); straight edges if omitted
    """
    ring = np.asarray(ring, dtype=float)
    if len(ring) < 3:
        raise MeshGenerationError("interface polyline needs at least 3 points")
    last_err = None
    for band in (0.55, 0.45, 0.65, 0.35):
        try:
            pts, tris, ring_ids = _fit_points(rect, ring, h, band)
            phase = _classify(pts, tris, ring)
            mesh = _build_fitted(pts, tris, phase, ring_ids, rect, k,
                                 segment_curve)
            q = quality(mesh)
            if q.min_angle > min_angle and q.min_jacobian > 0.0:
                return mesh
            last_err = MeshGenerationError(
                f"fitted mesh quality too low: min angle "
                f"{math.degrees(q.min_angle):.2f} deg, scaled Jacobian "
                f"{q.min_jacobian:.3f} (band {band})"
            )
        except MeshGenerationError as err:
            last_err = err
    raise last_err


def _fit_points(rect, ring, h, band_factor, n_smooth: int = 4):
    x0, y0, x1, y1 = rect
    nx = max(2, round((x1 - x0) / h))
    ny = max(2, round((y1 - y0) / h))
    gx, gy = (x1 - x0) / nx, (y1 - y0) / ny
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    grid = np.column_stack([X.ravel(), Y.ravel()])
    on_bnd = (
        np.isclose(grid[:, 0], x0) | np.isclose(grid[:, 0], x1)
        | np.isclose(grid[:, 1], y0) | np.isclose(grid[:, 1], y1)
    )
    band = band_factor * max(gx, gy)
    d = _dist_to_polyline(grid, ring)
    keep = (d >= band) | on_bnd
    grid = grid[keep]
    on_bnd = on_bnd[keep]

    pts = np.vstack([grid, ring])
    n_grid = len(grid)
    ring_ids = np.arange(n_grid, n_grid + len(ring))
    free = np.zeros(len(pts), dtype=bool)
    free[:n_grid] = ~on_bnd
    segments = [(int(ring_ids[i]), int(ring_ids[(i + 1) % len(ring)]))
                for i in range(len(ring))]

    tris = None
    for it in range(n_smooth + 1):
        tris = _oriented_simplices(pts)
        tris = _recover_edges(pts, tris, segments)
        if it == n_smooth:
            break
        pts = _smooth(pts, tris, free)
    return pts, tris, ring_ids


def _oriented_simplices(pts):
    tris = Delaunay(pts).simplices.copy()
    a, b, c = pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]]
    flip = _cross2(b - a, c - a) < 0.0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def _smooth(pts, tris, free):
    from scipy.sparse import coo_matrix

    n = len(pts)
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    A = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    A.data[:] = 1.0
    deg = np.asarray(A.sum(axis=1)).ravel()
    new = A @ pts / np.maximum(deg, 1.0)[:, None]
    out = pts.copy()
    out[free] = new[free]
    return out


def _dist_to_polyline(pts, ring):
    a = ring
    b = np.roll(ring, -1, axis=0)
    ab = b - a                                        # (S, 2)
    ap = pts[:, None, :] - a[None, :, :]              # (N, S, 2)
    denom = np.maximum((ab * ab).sum(axis=1), 1e-300)
    t = np.clip((ap * ab[None]).sum(axis=2) / denom[None], 0.0, 1.0)
    proj = a[None] + t[..., None] * ab[None]
    return np.sqrt(((pts[:, None, :] - proj) ** 2).sum(axis=2)).min(axis=1)


def _point_in_polygon(pts, ring):
    """Crossing-number test, vectorized over points."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    xa, ya = ring[:, 0], ring[:, 1]
    xb, yb = np.roll(xa, -1), np.roll(ya, -1)
    for i in range(len(ring)):
        crosses = (ya[i] > y) != (yb[i] > y)
        if not crosses.any():
            continue
        xc = xa[i] + (y - ya[i]) / (yb[i] - ya[i] + 1e-300) * (xb[i] - xa[i])
        inside ^= crosses & (x < xc)
    return inside


def _classify(pts, tris, ring):
    centroids = pts[tris].mean(axis=1)
    inside = _point_in_polygon(centroids, ring)
    return np.where(inside, MINUS, PLUS).astype(np.int8)


# ---------------------------------------------------------------------------
# constrained-edge recovery by flipping


def _ekey(a, b):
    return (a, b) if a < b else (b, a)


def _recover_edges(pts, tris, segments):
    tri_list = [tuple(int(v) for v in t) for t in tris]
    edge_map: dict[tuple[int, int], list[int]] = {}
    for idx, t in enumerate(tri_list):
        for i in range(3):
            edge_map.setdefault(_ekey(t[i], t[(i + 1) % 3]), []).append(idx)

    def replace(idx, t):
        old = tri_list[idx]
        for i in range(3):
            edge_map[_ekey(old[i], old[(i + 1) % 3])].remove(idx)
        tri_list[idx] = t
        for i in range(3):
            edge_map.setdefault(_ekey(t[i], t[(i + 1) % 3]), []).append(idx)

    def present(a, b):
        return bool(edge_map.get(_ekey(a, b)))

    for a, b in segments:
        guard = 0
        while not present(a, b):
            guard += 1
            if guard > 200:
                raise MeshGenerationError(
                    f"failed to recover interface segment {a}-{b} by edge flips"
                )
            u, v = _find_crossing_edge(pts, edge_map, a, b)
            t1, t2 = edge_map[_ekey(u, v)][:2]
            p = _opposite(tri_list[t1], u, v)
            q = _opposite(tri_list[t2], u, v)
            if not _seg_intersect(pts[p], pts[q], pts[u], pts[v]):
                raise MeshGenerationError(
                    f"non-flippable configuration while recovering {a}-{b}"
                )
            replace(t1, _orient(pts, (p, q, u)))
            replace(t2, _orient(pts, (p, q, v)))
    return np.array(tri_list, dtype=int)


def _opposite(tri, u, v):
    return next(n for n in tri if n != u and n != v)


def _orient(pts, tri):
    a, b, c = pts[tri[0]], pts[tri[1]], pts[tri[2]]
    if _cross2(b - a, c - a) < 0.0:
        return (tri[0], tri[2], tri[1])
    return tuple(tri)


def _seg_intersect(p1, p2, p3, p4):
    """Proper intersection of open segments p1-p2 and p3-p4."""
    d1 = _cross2(p4 - p3, p1 - p3)
    d2 = _cross2(p4 - p3, p2 - p3)
    d3 = _cross2(p2 - p1, p3 - p1)
    d4 = _cross2(p2 - p1, p4 - p1)
    return bool((d1 * d2 < 0.0) and (d3 * d4 < 0.0))


def _find_crossing_edge(pts, edge_map, a, b):
    pa, pb = pts[a], pts[b]
    for key, owners in edge_map.items():
        if not owners:
            continue
        u, v = key
        if u in (a, b) or v in (a, b):
            continue
        if _seg_intersect(pa, pb, pts[u], pts[v]):
            return key
    raise MeshGenerationError(f"no edge crosses missing segment {a}-{b}")


# ---------------------------------------------------------------------------
# degree elevation


def _build_fitted(pts, tris, phase, ring_ids, rect, k, segment_curve):
    """Attach interface metadata and elevate to degree k."""
    n_ring = len(ring_ids)
    ring_pos = {int(ring_ids[i]): i for i in range(n_ring)}

    # map undirected interface edge key -> directed ring segment (i0, i1)
    interface_pairs: dict[tuple[int, int], tuple[int, int]] = {}
    for tri in tris:
        for le in range(3):
            a, b = int(tri[le]), int(tri[(le + 1) % 3])
            ia, ib = ring_pos.get(a), ring_pos.get(b)
            if ia is None or ib is None:
                continue
            if (ia + 1) % n_ring == ib:
                interface_pairs[_ekey(a, b)] = (ia, ib)
            elif (ib + 1) % n_ring == ia:
                interface_pairs[_ekey(a, b)] = (ib, ia)
    return _elevate(pts, tris, phase, interface_pairs, rect, k,
                    segment_curve=segment_curve, ring_ids=ring_ids)


def _elevate(pts, tris, phase, interface_pairs, rect, k,
             segment_curve=None, ring_ids=None):
    """Insert degree-k edge/interior nodes and assemble the Mesh."""
    ring_id_of = {} if ring_ids is None else {
        i: int(ring_ids[i]) for i in range(len(ring_ids))
    }
    n_loc = (k + 1) * (k + 2) // 2
    nodes = [np.asarray(pts, dtype=float)]
    next_id = len(pts)
    edge_ids: dict[tuple[int, int], np.ndarray] = {}
    elements = np.empty((len(tris), n_loc), dtype=int)
    elements[:, :3] = tris
    # undirected key -> deviation of the curve midpoint from the chord
    # midpoint; drives the interior-node correction of adjacent cubics
    mid_deviation: dict[tuple[int, int], np.ndarray] = {}

    if k >= 2:
        for e, tri in enumerate(tris):
            for le in range(3):
                a, b = int(tri[le]), int(tri[(le + 1) % 3])
                key = _ekey(a, b)
                if key not in edge_ids:
                    if segment_curve is not None and key in interface_pairs:
                        i0, i1 = interface_pairs[key]
                        s = np.arange(1, k) / k
                        mids = np.asarray(segment_curve(i0, i1, s), dtype=float)
                        # mids run from ring vertex i0 to i1; store along the
                        # sorted key direction key[0] -> key[1]
                        if ring_id_of[i0] != key[0]:
                            mids = mids[::-1]
                        chord_mid = 0.5 * (pts[key[0]] + pts[key[1]])
                        curve_mid = np.asarray(
                            segment_curve(i0, i1, np.array([0.5])), dtype=float)[0]
                        mid_deviation[key] = curve_mid - chord_mid
                    else:
                        # straight placement, along the sorted key direction
                        pa, pb = pts[key[0]], pts[key[1]]
                        s = (np.arange(1, k) / k)[:, None]
                        mids = pa[None] * (1 - s) + pb[None] * s
                    ids = np.arange(next_id, next_id + (k - 1))
                    next_id += k - 1
                    nodes.append(mids)
                    edge_ids[key] = ids
                ids = edge_ids[key]
                ordered = ids if a < b else ids[::-1]
                elements[e, 3 + le * (k - 1): 3 + (le + 1) * (k - 1)] = ordered
    if k == 3:
        centers = pts[tris].mean(axis=1)
        ids = np.arange(next_id, next_id + len(tris))
        next_id += len(tris)
        nodes.append(centers)
        elements[:, 9] = ids

    coords = np.vstack(nodes)
    if k == 3 and mid_deviation:
        _shift_interior_nodes(coords, elements, tris, mid_deviation)

    interface_edges, boundary_edges = _find_edge_sets(tris, phase, rect, coords)
    return Mesh(
        x=coords.ravel(),
        elements=elements,
        phase=np.asarray(phase, dtype=np.int8),
        interface_edges=interface_edges,
        boundary_edges=boundary_edges,
        degree=k,
    )


def _shift_interior_nodes(coords, elements, tris, mid_deviation):
    """Move cubic interior nodes with the curved edges.

    The curved map decomposes into the straight map, the quadratic edge
    bump carrying the O(h^2) midpoint deviation, and cubic residuals that
    are O(h^3).  Optimal-order geometry requires the interior node to
    follow the quadratic part, whose bump function 4*lam_a*lam_b equals
    4/9 at the barycenter; the cubic edge basis functions vanish there.
    """
    for e, tri in enumerate(tris):
        delta = np.zeros(2)
        moved = False
        for le in range(3):
            key = _ekey(int(tri[le]), int(tri[(le + 1) % 3]))
            dev = mid_deviation.get(key)
            if dev is not None:
                delta = delta + (4.0 / 9.0) * dev
                moved = True
        if moved:
            coords[elements[e, 9]] += delta


def _find_edge_sets(tris, phase, rect, coords):
    x0, y0, x1, y1 = rect
    edge_map: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for e, tri in enumerate(tris):
        for le in range(3):
            a, b = int(tri[le]), int(tri[(le + 1) % 3])
            edge_map.setdefault(_ekey(a, b), []).append((e, le))
    interface = []
    boundary = []
    for key, owners in edge_map.items():
        if len(owners) == 2:
            (e1, le1), (e2, le2) = owners
            if phase[e1] != phase[e2]:
                interface.append((e1, le1) if phase[e1] == MINUS else (e2, le2))
        else:
            e, le = owners[0]
            a, b = key
            pa, pb = coords[a], coords[b]
            on_wall = (
                (np.isclose(pa[0], x0) and np.isclose(pb[0], x0))
                or (np.isclose(pa[0], x1) and np.isclose(pb[0], x1))
                or (np.isclose(pa[1], y0) and np.isclose(pb[1], y0))
                or (np.isclose(pa[1], y1) and np.isclose(pb[1], y1))
            )
            if not on_wall:
                raise MeshGenerationError(
                    f"dangling edge {key} is not on the rectangle boundary"
                )
            boundary.append((e, le))
    interface = np.array(sorted(interface), dtype=int).reshape(-1, 2)
    boundary = np.array(sorted(boundary), dtype=int).reshape(-1, 2)
    return interface, boundary


# ---------------------------------------------------------------------------
# interface traversal


def interface_cycle(mesh: Mesh):
    """Order the interface into one closed vertex cycle.

    Returns (vertex_ids, edges): vertex_ids is the ordered cycle of
    interface vertex node ids, counterclockwise around the minus phase,
    and edges[i] is the (element, local_edge) of the segment from
    vertex_ids[i] to vertex_ids[i+1 mod n].
    """
    if len(mesh.interface_edges) == 0:
        raise MeshError("mesh has no interface")
    by_end: dict[int, list[tuple[int, tuple[int, int]]]] = {}
    seg_lookup: dict[tuple[int, int], tuple[int, int]] = {}
    for e, le in mesh.interface_edges:
        tri = mesh.elements[e, :3]
        a, b = int(tri[le]), int(tri[(le + 1) % 3])
        seg_lookup[(a, b)] = (int(e), int(le))
        seg_lookup[(b, a)] = (int(e), int(le))
        by_end.setdefault(a, []).append((b, (int(e), int(le))))
        by_end.setdefault(b, []).append((a, (int(e), int(le))))
    start = min(by_end)
    cycle = [start]
    prev = None
    cur = start
    while True:
        nxts = [n for n, _ in by_end[cur] if n != prev]
        if not nxts:
            raise MeshError("interface is not a closed cycle")
        nxt = nxts[0]
        if nxt == start:
            break
        cycle.append(nxt)
        prev, cur = cur, nxt
    if len(cycle) != len(mesh.interface_edges):
        raise MeshError("interface has more than one component")
    verts = np.array(cycle, dtype=int)
    pos = mesh.coords[verts]
    area2 = _cross2(pos, np.roll(pos, -1, axis=0)).sum()
    if area2 < 0.0:
        verts = verts[::-1]
    edges = [seg_lookup[(int(verts[i]), int(verts[(i + 1) % len(verts)]))]
             for i in range(len(verts))]
    return verts, edges
