"""Lagrange finite element spaces on a (possibly curved) mesh.

Spaces are scalar; vector fields store the two components interleaved,
so the vector coefficient of scalar DOF i occupies entries 2i, 2i+1.
The velocity space of degree k on a degree-k mesh reuses the mesh nodes
as DOFs, which makes mesh nodes and velocity DOFs interchangeable.

The pressure space of a Taylor-Hood pair is subdomain-discontinuous by
default: DOFs sitting on the interface are duplicated, one copy per
phase, so pressure may jump across the interface while staying
continuous inside each subdomain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .mesh import MINUS, PLUS, Mesh, _element_map_raw
from .reference import (
    bubble_gradients,
    bubble_values,
    edge_local_nodes,
    lattice_nodes,
    reference_element,
)

GLOBAL = "global"
SUBDOMAIN = "subdomain-discontinuous"


class PointLocationError(Exception):
    pass


class NewtonError(Exception):
    def __init__(self, element: int):
        super().__init__(f"reference-coordinate Newton did not converge "
                         f"in element {element}")
        self.element = element


@dataclass(frozen=True, eq=False)
class ScalarSpace:
    """Scalar Lagrange space of the given degree on a mesh.

    dof_of     (E, n_loc) global DOF per element and local node; when the
               space carries per-element bubbles the bubble DOF is the
               last local column
    positions  (n_dofs, 2) physical node positions (bubble rows hold the
               element barycenter image)
    dof_phase  (n_dofs,) phase of the owning subdomain; 0 when shared by
               both phases (only possible for globally continuous spaces)
    """

    mesh: Mesh
    degree: int
    continuity: str
    dof_of: np.ndarray
    n_dofs: int
    positions: np.ndarray
    dof_phase: np.ndarray
    bubble: bool = False

    def __post_init__(self):
        self.dof_of.setflags(write=False)
        self.positions.setflags(write=False)
        self.dof_phase.setflags(write=False)

    @property
    def n_local(self) -> int:
        return self.dof_of.shape[1]

    def basis_values(self, ref_pts) -> np.ndarray:
        """Local basis at reference points; (n_local, n_pts)."""
        vals = reference_element(self.degree).shape_values(ref_pts)
        if self.bubble:
            vals = np.vstack([vals, bubble_values(ref_pts)[None, :]])
        return vals

    def basis_gradients(self, ref_pts) -> np.ndarray:
        """Local reference gradients; (n_local, n_pts, 2)."""
        grads = reference_element(self.degree).shape_gradients(ref_pts)
        if self.bubble:
            grads = np.concatenate([grads, bubble_gradients(ref_pts)[None]], axis=0)
        return grads

    @cached_property
    def locator(self) -> "PointLocator":
        return PointLocator(self.mesh)


@dataclass(frozen=True, eq=False)
class FESpacePair:
    """Velocity/pressure pair with the velocity ring DOF sets.

    interface_dofs / boundary_dofs are scalar velocity DOF ids; the
    complement of their union is the zero-trace test space used for the
    harmonic mesh motion.
    """

    velocity: ScalarSpace
    pressure: ScalarSpace
    interface_dofs: np.ndarray
    boundary_dofs: np.ndarray

    def __post_init__(self):
        self.interface_dofs.setflags(write=False)
        self.boundary_dofs.setflags(write=False)

    @property
    def mesh(self) -> Mesh:
        return self.velocity.mesh

    def vector_dofs(self, scalar_ids: np.ndarray) -> np.ndarray:
        """Interleaved vector DOF ids of the given scalar DOF ids."""
        return np.column_stack([2 * scalar_ids, 2 * scalar_ids + 1]).ravel()


def build_scalar_space(mesh: Mesh, degree: int, continuity: str = GLOBAL,
                       bubble: bool = False) -> ScalarSpace:
    if continuity not in (GLOBAL, SUBDOMAIN):
        raise ValueError(f"unknown continuity {continuity!r}")

    if degree == mesh.degree and continuity == GLOBAL and not bubble:
        dof_of = mesh.elements
        n_dofs = mesh.n_nodes
        positions = mesh.coords
        dof_phase = _phase_of_dofs(mesh, dof_of, n_dofs)
        return ScalarSpace(mesh, degree, continuity, dof_of, n_dofs,
                           positions, dof_phase)

    tri = mesh.elements[:, :3]
    n_loc = (degree + 1) * (degree + 2) // 2
    dof_of = np.empty((mesh.n_elements, n_loc + (1 if bubble else 0)), dtype=int)

    iface_vertices: set[int] = set()
    iface_edges: set[tuple[int, int]] = set()
    for e, le in mesh.interface_edges:
        a, b = int(tri[e, le]), int(tri[e, (le + 1) % 3])
        iface_vertices.update((a, b))
        iface_edges.add((min(a, b), max(a, b)))
    duplicated = continuity == SUBDOMAIN

    dof_ids: dict[tuple, int] = {}

    def get(key):
        if key not in dof_ids:
            dof_ids[key] = len(dof_ids)
        return dof_ids[key]

    for e in range(mesh.n_elements):
        side = int(mesh.phase[e])
        for lv in range(3):
            v = int(tri[e, lv])
            tag = side if (duplicated and v in iface_vertices) else 0
            dof_of[e, lv] = get(("v", v, tag))
        for le in range(3):
            a, b = int(tri[e, le]), int(tri[e, (le + 1) % 3])
            key = (min(a, b), max(a, b))
            tag = side if (duplicated and key in iface_edges) else 0
            ids = [get(("e", *key, tag, j)) for j in range(degree - 1)]
            if a > b:
                ids = ids[::-1]
            dof_of[e, 3 + le * (degree - 1): 3 + (le + 1) * (degree - 1)] = ids
        base = 3 + 3 * (degree - 1)
        for j in range(n_loc - base):
            dof_of[e, base + j] = get(("i", e, j))
        if bubble:
            dof_of[e, -1] = get(("b", e))
    n_dofs = len(dof_ids)

    positions = np.zeros((n_dofs, 2))
    ref_geom = reference_element(mesh.degree)
    lat = lattice_nodes(degree)
    if bubble:
        lat = np.vstack([lat, [[1.0 / 3.0, 1.0 / 3.0]]])
    geom_vals = ref_geom.shape_values(lat)              # (n_geom, n_lat)
    xs = mesh.coords[mesh.elements]                     # (E, n_geom, 2)
    pos = np.einsum("gl,egi->eli", geom_vals, xs)       # (E, n_lat, 2)
    positions[dof_of.ravel()] = pos.reshape(-1, 2)

    dof_phase = _phase_of_dofs(mesh, dof_of, n_dofs)
    return ScalarSpace(mesh, degree, continuity, dof_of, n_dofs,
                       positions, dof_phase, bubble=bubble)


def _phase_of_dofs(mesh, dof_of, n_dofs):
    phase = np.zeros(n_dofs, dtype=np.int8)
    seen_plus = np.zeros(n_dofs, dtype=bool)
    seen_minus = np.zeros(n_dofs, dtype=bool)
    plus_rows = mesh.phase == PLUS
    seen_plus[np.unique(dof_of[plus_rows])] = True
    seen_minus[np.unique(dof_of[~plus_rows])] = True
    phase[seen_plus & ~seen_minus] = PLUS
    phase[seen_minus & ~seen_plus] = MINUS
    return phase


def build_taylor_hood(mesh: Mesh, k: int,
                      pressure_continuity: str = SUBDOMAIN) -> FESpacePair:
    """Velocity/pressure pair of degree k.

    k = 2, 3 gives the continuous degree-k velocity with degree-(k-1)
    subdomain-discontinuous pressure.  k = 1 gives the Mini pair
    (vertex velocity enriched with a per-element cubic bubble, continuous
    linear pressure); this pair is experimental.
    """
    if k not in (1, 2, 3):
        raise ValueError(f"unsupported degree k={k}")
    if mesh.degree != k:
        raise ValueError(f"mesh degree {mesh.degree} does not match k={k}")
    if k == 1:
        velocity = build_scalar_space(mesh, 1, GLOBAL, bubble=True)
        pressure = build_scalar_space(mesh, 1, GLOBAL)
    else:
        velocity = build_scalar_space(mesh, k, GLOBAL)
        pressure = build_scalar_space(mesh, k - 1, pressure_continuity)
    interface_dofs = mesh.interface_node_ids()
    boundary_dofs = mesh.boundary_node_ids()
    return FESpacePair(velocity, pressure, interface_dofs, boundary_dofs)


# ---------------------------------------------------------------------------
# interpolation and evaluation


def interpolate(space: ScalarSpace, f, vector: bool = False) -> np.ndarray:
    """Nodal interpolation of f onto the space.

    f maps (x, y) -> value (scalar, or length-2 for vector=True); a pair
    (f_plus, f_minus) supplies per-phase values for two-valued functions
    on the interface.  Bubble coefficients are set to zero.
    """
    if isinstance(f, tuple):
        f_plus, f_minus = f
    else:
        f_plus = f_minus = f
    pos = space.positions
    width = 2 if vector else 1
    out = np.zeros((space.n_dofs, width))
    minus = space.dof_phase == MINUS
    for rows, fn in (((~minus), f_plus), (minus, f_minus)):
        if rows.any():
            vals = np.asarray([fn(x, y) for x, y in pos[rows]], dtype=float)
            out[rows] = vals.reshape(-1, width)
    if space.bubble:
        bub = np.unique(space.dof_of[:, -1])
        out[bub] = 0.0
    return out.ravel() if vector else out[:, 0]


@dataclass
class PointLocator:
    """Bin-accelerated element lookup with curved-element Newton inversion."""

    mesh: Mesh

    def __post_init__(self):
        coords = self.mesh.coords
        el_pts = coords[self.mesh.elements]            # (E, n_loc, 2)
        lo = el_pts.min(axis=1)
        hi = el_pts.max(axis=1)
        pad = 0.125 * (hi - lo).max(axis=1, keepdims=True)
        self._lo = lo - pad
        self._hi = hi + pad
        dom_lo = coords.min(axis=0)
        dom_hi = coords.max(axis=0)
        diam = np.linalg.norm(hi - lo, axis=1)
        bin_size = max(float(np.median(diam)), 1e-12)
        self._origin = dom_lo
        self._nbins = np.maximum(
            np.ceil((dom_hi - dom_lo) / bin_size).astype(int), 1)
        self._bin_size = (dom_hi - dom_lo) / self._nbins
        self._bins: dict[tuple[int, int], np.ndarray] = {}
        cells_lo = self._cell_of(self._lo)
        cells_hi = self._cell_of(self._hi)
        members: dict[tuple[int, int], list[int]] = {}
        for e in range(len(el_pts)):
            for i in range(cells_lo[e, 0], cells_hi[e, 0] + 1):
                for j in range(cells_lo[e, 1], cells_hi[e, 1] + 1):
                    members.setdefault((i, j), []).append(e)
        self._bins = {k: np.array(v, dtype=int) for k, v in members.items()}

    def _cell_of(self, pts):
        c = ((pts - self._origin) / np.maximum(self._bin_size, 1e-300)).astype(int)
        return np.clip(c, 0, self._nbins - 1)

    def locate(self, pts, phase=None, tol: float = 1e-10):
        """Locate points; returns (element ids, reference coordinates).

        phase restricts the search to elements of that phase (scalar or
        per-point array); if no matching element contains a point, the
        best matching-phase element is used and the reference
        coordinates extrapolate slightly outside the triangle.  Without
        a phase, points outside the mesh raise PointLocationError.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = len(pts)
        if phase is None:
            phase_arr = np.zeros(n, dtype=int)
        else:
            phase_arr = np.broadcast_to(np.asarray(phase, dtype=int), (n,))

        pair_pt: list[int] = []
        pair_el: list[int] = []
        cells = self._cell_of(pts)
        for i in range(n):
            cands = self._bins.get((cells[i, 0], cells[i, 1]))
            if cands is None:
                cands = np.empty(0, dtype=int)
            inbox = cands[
                (pts[i, 0] >= self._lo[cands, 0]) & (pts[i, 0] <= self._hi[cands, 0])
                & (pts[i, 1] >= self._lo[cands, 1]) & (pts[i, 1] <= self._hi[cands, 1])
            ]
            if len(inbox) == 0:
                inbox = cands
            pair_pt.extend([i] * len(inbox))
            pair_el.extend(inbox.tolist())
        pair_pt = np.asarray(pair_pt, dtype=int)
        pair_el = np.asarray(pair_el, dtype=int)
        if len(pair_pt) == 0 and n > 0:
            raise PointLocationError("points outside the mesh bounding box")

        ref, converged = self._invert(pts[pair_pt], pair_el)
        lam = np.column_stack([1.0 - ref.sum(axis=1), ref[:, 0], ref[:, 1]])
        score = np.where(converged, lam.min(axis=1), -np.inf)
        el_phase = self.mesh.phase[pair_el]
        want = phase_arr[pair_pt]
        phase_ok = (want == 0) | (el_phase == want)

        best_el = np.full(n, -1, dtype=int)
        best_ref = np.zeros((n, 2))
        best_score = np.full(n, -np.inf)
        ok = np.flatnonzero(phase_ok)
        if len(ok):
            order = np.lexsort((score[ok], pair_pt[ok]))
            sel = ok[order]
            pts_sorted = pair_pt[sel]
            last = np.searchsorted(pts_sorted, np.arange(n), side="right") - 1
            has = (last >= 0) & (pts_sorted[np.clip(last, 0, None)] == np.arange(n))
            rows = sel[last[has]]
            best_el[has] = pair_el[rows]
            best_ref[has] = ref[rows]
            best_score[has] = score[rows]

        missing = best_el < 0
        if missing.any():
            raise PointLocationError(
                f"{int(missing.sum())} points have no candidate element "
                f"(first: {pts[missing][0]})")
        if phase is None and (best_score < -tol).any():
            worst = int(np.argmin(best_score))
            raise PointLocationError(
                f"point {pts[worst]} lies outside the mesh "
                f"(containment defect {-best_score[worst]:.2e})")
        return best_el, best_ref

    def _invert(self, pts, elems, max_iter: int = 30, tol: float = 1e-12):
        """Per-pair Newton inversion of the geometry maps, vectorized.

        Returns (ref, converged).  Pairs that wander far outside the
        reference triangle are frozen and flagged as non-converged; they
        only occur for candidate elements that do not contain the point.
        """
        mesh = self.mesh
        coords = mesh.coords
        ref_el = reference_element(mesh.degree)
        xe = coords[mesh.elements[elems]]               # (P, n_loc, 2)
        # affine initial guess from the vertex triangle
        a, b, c = xe[:, 0], xe[:, 1], xe[:, 2]
        M = np.stack([b - a, c - a], axis=2)            # columns are edges
        det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
        rhs = pts - a
        ref = np.empty_like(rhs)
        ref[:, 0] = (M[:, 1, 1] * rhs[:, 0] - M[:, 0, 1] * rhs[:, 1]) / det
        ref[:, 1] = (-M[:, 1, 0] * rhs[:, 0] + M[:, 0, 0] * rhs[:, 1]) / det
        converged = np.ones(len(pts), dtype=bool)
        if mesh.degree == 1:
            return ref, converged
        active = np.ones(len(pts), dtype=bool)
        for _ in range(max_iter):
            vals = ref_el.shape_values(ref)             # (n_loc, P)
            grads = ref_el.shape_gradients(ref)         # (n_loc, P, 2)
            x = np.einsum("lp,pli->pi", vals, xe)
            J = np.einsum("lpj,pli->pij", grads, xe)
            r = x - pts
            resid = np.abs(r).max(axis=1)
            active &= resid >= tol
            wandered = np.abs(ref).max(axis=1) > 10.0
            active &= ~wandered
            if not active.any():
                break
            detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
            detJ = np.where(np.abs(detJ) < 1e-300, 1e-300, detJ)
            step = np.empty_like(r)
            step[:, 0] = (J[:, 1, 1] * r[:, 0] - J[:, 0, 1] * r[:, 1]) / detJ
            step[:, 1] = (-J[:, 1, 0] * r[:, 0] + J[:, 0, 0] * r[:, 1]) / detJ
            ref[active] -= step[active]
        final_resid = np.abs(r).max(axis=1) if len(pts) else np.empty(0)
        converged = final_resid < np.maximum(tol, 1e-9 * np.abs(pts).max(initial=1.0))
        return ref, converged


def evaluate_many(space: ScalarSpace, coeffs: np.ndarray, pts,
                  phase=None, vector: bool = False) -> np.ndarray:
    """Evaluate a FE function at many physical points.

    phase picks the branch for subdomain-discontinuous spaces (and
    allows slight polynomial extension past the interface when a point
    falls just inside the other phase's elements).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    elems, ref = space.locator.locate(pts, phase=phase)
    return evaluate_at(space, coeffs, elems, ref, vector=vector)


def evaluate_at(space: ScalarSpace, coeffs: np.ndarray, elems, ref,
                vector: bool = False) -> np.ndarray:
    """Evaluate at per-point (element, reference coordinate) pairs."""
    vals = space.basis_values(ref.T if ref.ndim == 1 else ref)  # (n_loc, P)
    dofs = space.dof_of[elems]                                  # (P, n_loc)
    if vector:
        cf = coeffs.reshape(-1, 2)
        return np.einsum("lp,pli->pi", vals, cf[dofs])
    return np.einsum("lp,pl->p", vals, coeffs[dofs])


def evaluate(space: ScalarSpace, coeffs: np.ndarray, x,
             phase=None, vector: bool = False):
    """Evaluate a FE function at one physical point."""
    out = evaluate_many(space, coeffs, np.asarray(x, dtype=float)[None],
                        phase=phase, vector=vector)
    return out[0]
