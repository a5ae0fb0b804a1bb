"""ALE machinery: harmonic mesh velocity, mesh motion, remeshing.

The mesh velocity equals the fluid velocity on the interface (bitwise,
by construction) and vanishes on the outer boundary; in the bulk it is
the discrete harmonic extension of those boundary values, solved
componentwise.  Remeshing keeps the interface nodes verbatim, so the
interface curve itself is never perturbed, and transfers fields by point
evaluation on the old mesh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from . import mesh as meshmod
from .assembly import GeometryTables, default_rule, scalar_laplacian
from .fespace import (
    FESpacePair,
    ScalarSpace,
    build_scalar_space,
    build_taylor_hood,
    evaluate_many,
)
from .mesh import Mesh, MeshGenerationError, interface_cycle, quality
from .reference import edge_local_nodes


class RemeshError(Exception):
    def __init__(self, message: str, ring: np.ndarray):
        super().__init__(
            f"{message}; interface polyline has {len(ring)} vertices, "
            f"bbox x [{ring[:, 0].min():.4f}, {ring[:, 0].max():.4f}] "
            f"y [{ring[:, 1].min():.4f}, {ring[:, 1].max():.4f}]"
        )
        self.ring = ring


@dataclass
class MotionState:
    x: np.ndarray
    w: np.ndarray
    remesh_count: int = 0
    last_min_angle: float = math.pi / 3.0


def harmonic_extension(mesh: Mesh, spaces: FESpacePair, u: np.ndarray,
                       geom: GeometryTables | None = None) -> np.ndarray:
    """Discrete harmonic mesh velocity matching u on the interface.

    Interface DOFs of the result equal those of u bitwise, boundary DOFs
    are exactly zero, and interior DOFs minimize the Dirichlet energy of
    each subdomain (one global solve; the fixed interface row decouples
    the subdomains).
    """
    V = spaces.velocity
    L = scalar_laplacian(mesh, V, geom=geom)
    fixed = np.zeros(V.n_dofs, dtype=bool)
    fixed[spaces.interface_dofs] = True
    fixed[spaces.boundary_dofs] = True
    free = ~fixed

    w = np.zeros((V.n_dofs, 2))
    uv = u.reshape(-1, 2)
    w[spaces.interface_dofs] = uv[spaces.interface_dofs]
    w[spaces.boundary_dofs] = 0.0

    Lff = L[free][:, free].tocsc()
    Lfd = L[free][:, fixed]
    rhs = -Lfd @ w[fixed]
    lu = splu(Lff, permc_spec="MMD_AT_PLUS_A")
    for c in range(2):
        w[free, c] = lu.solve(rhs[:, c])
    return w.ravel()


def advance_mesh(x: np.ndarray, w: np.ndarray, tau: float) -> np.ndarray:
    """Forward-Euler node update x + tau * w (nodal part of w)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if len(w) < len(x):
        raise ValueError(f"mesh velocity has {len(w)} entries, need >= {len(x)}")
    return x + tau * w[:len(x)]


def move_mesh(mesh: Mesh, x_new: np.ndarray) -> Mesh:
    """Mesh with the same connectivity at new node positions."""
    return meshmod.displace(mesh, x_new - mesh.x)


def spaces_with_mesh(spaces: FESpacePair, mesh: Mesh) -> FESpacePair:
    """Rebind spaces to a mesh with identical connectivity (moved nodes)."""
    def rebind(s: ScalarSpace) -> ScalarSpace:
        if s.degree == mesh.degree and s.continuity == "global" and not s.bubble:
            positions = mesh.coords
        else:
            positions = _positions_of(s, mesh)
        return ScalarSpace(mesh, s.degree, s.continuity, s.dof_of, s.n_dofs,
                           positions, s.dof_phase, bubble=s.bubble)

    return FESpacePair(rebind(spaces.velocity), rebind(spaces.pressure),
                       spaces.interface_dofs, spaces.boundary_dofs)


def _positions_of(space: ScalarSpace, mesh: Mesh) -> np.ndarray:
    from .reference import lattice_nodes, reference_element

    lat = lattice_nodes(space.degree)
    if space.bubble:
        lat = np.vstack([lat, [[1.0 / 3.0, 1.0 / 3.0]]])
    geom_vals = reference_element(mesh.degree).shape_values(lat)
    xs = mesh.coords[mesh.elements]
    pos = np.einsum("gl,egi->eli", geom_vals, xs)
    positions = np.zeros((space.n_dofs, 2))
    positions[space.dof_of.ravel()] = pos.reshape(-1, 2)
    return positions


def check_and_remesh(mesh: Mesh, spaces: FESpacePair, fields: dict,
                     rect, h: float,
                     angle_threshold: float = math.pi / 18.0):
    """Regenerate the mesh if its minimum angle dropped below the threshold.

    fields maps names to ("velocity" | "pressure", coefficients); the
    returned dict holds the coefficients transferred to the new mesh by
    point evaluation (phase-aware for pressure).  Returns
    (mesh, spaces, fields, did_remesh).
    """
    q = quality(mesh)
    if q.min_angle > angle_threshold:
        return mesh, spaces, fields, False

    verts, edges = interface_cycle(mesh)
    ring = mesh.coords[verts]
    k = mesh.degree
    segment_curve = _old_edge_curve(mesh, verts, edges)
    try:
        new_mesh = meshmod.fit_interface_mesh(
            rect, ring, h, k,
            segment_curve=segment_curve, min_angle=angle_threshold)
    except MeshGenerationError as err:
        raise RemeshError(f"remeshing failed to beat the angle threshold "
                          f"({err})", ring) from err

    new_spaces = build_taylor_hood(new_mesh, k,
                                   pressure_continuity=spaces.pressure.continuity)
    out = {}
    for name, (kind, coeffs) in fields.items():
        if kind == "velocity":
            out[name] = (kind, transfer_velocity(spaces, new_spaces, coeffs))
        elif kind == "pressure":
            out[name] = (kind, transfer_pressure(spaces, new_spaces, coeffs))
        else:
            raise ValueError(f"unknown field kind {kind!r}")
    return new_mesh, new_spaces, out, True


def _old_edge_curve(mesh: Mesh, verts: np.ndarray, edges):
    """Parametrize each interface segment by the old curved edge geometry."""
    k = mesh.degree
    params = np.concatenate([[0.0], np.arange(1, k) / k, [1.0]])
    # Lagrange basis on the sorted parameters (matches edge_nodes order)
    V = np.vander(params, increasing=True)
    coeff = np.linalg.inv(V).T
    n = len(verts)

    def curve(i0, i1, s):
        if (i0 + 1) % n == i1:
            e, le = edges[i0]
            forward = True
        elif (i1 + 1) % n == i0:
            e, le = edges[i1]
            forward = False
        else:
            raise ValueError(f"({i0}, {i1}) is not a ring segment")
        ids = mesh.elements[e, edge_local_nodes(k, le)]
        pos = mesh.coords[ids]                          # ordered along the edge
        a = int(verts[i0 if forward else i1])
        if ids[0] != a:
            pos = pos[::-1]
        s = np.asarray(s, dtype=float)
        if not forward:
            s = 1.0 - s
        P = np.vander(s, N=k + 1, increasing=True)
        return (coeff @ P.T).T @ pos

    return curve


def transfer_velocity(old: FESpacePair, new: FESpacePair,
                      coeffs: np.ndarray) -> np.ndarray:
    """Nodal transfer of a continuous velocity-space vector field."""
    V = new.velocity
    out = np.zeros((V.n_dofs, 2))
    n_nodal = V.n_dofs
    if V.bubble:
        bub = np.unique(V.dof_of[:, -1])
        nodal = np.setdiff1d(np.arange(V.n_dofs), bub)
    else:
        nodal = np.arange(V.n_dofs)
    pts = V.positions[nodal]
    phase = new.velocity.dof_phase[nodal]
    vals = evaluate_many(old.velocity, coeffs, pts, phase=phase, vector=True)
    out[nodal] = vals
    return out.ravel()


def transfer_pressure(old: FESpacePair, new: FESpacePair,
                      coeffs: np.ndarray) -> np.ndarray:
    """Phase-aware nodal transfer of a pressure field."""
    P = new.pressure
    vals = evaluate_many(old.pressure, coeffs, P.positions,
                         phase=P.dof_phase)
    return vals
