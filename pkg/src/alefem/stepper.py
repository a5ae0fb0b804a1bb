"""Linearly semi-implicit Euler integrator for the coupled flow.

Each step: (1) solve the harmonic extension of the current velocity to
get the mesh velocity, (2) move the nodes by one forward-Euler update
carrying all coefficients nodally, (3) assemble and solve one linear
saddle problem on the new mesh with the convection field frozen at the
old velocity relative to the mesh, (4) remesh if the minimum angle
dropped too far.  Diffusion, pressure and divergence are implicit; the
constant gravity enters explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .ale import (
    MotionState,
    advance_mesh,
    check_and_remesh,
    harmonic_extension,
    move_mesh,
    spaces_with_mesh,
)
from .assembly import (
    GeometryTables,
    PhaseParams,
    assemble,
    assemble_convection,
    assemble_load,
    default_rule,
    pressure_mean_vector,
)
from .fespace import SUBDOMAIN, FESpacePair, build_taylor_hood, interpolate
from .linalg import SaddleSystem, solve_saddle
from .mesh import Mesh, generate_bubble_mesh, quality
from .observables import (
    BenchmarkRecord,
    center_of_mass,
    circularity,
    energy,
    interface_length,
    phase_area,
    rise_velocity,
)


@dataclass(frozen=True)
class SimConfig:
    params: PhaseParams
    k: int = 2
    h: float = 0.04
    tau: float = 1.0 / 200.0
    T: float = 3.0
    rect: tuple = (0.0, 0.0, 1.0, 2.0)
    circle_center: tuple = (0.5, 0.5)
    circle_radius: float = 0.25
    remesh_angle: float = math.pi / 18.0
    record_every: int = 1
    vtk_every: int = 0
    body_force_weighted_by_rho: bool = True
    pressure_continuity: str = SUBDOMAIN

    def __post_init__(self):
        if self.tau <= 0 or self.h <= 0 or self.T < 0:
            raise ValueError("tau and h must be positive, T non-negative")
        if self.k not in (1, 2, 3):
            raise ValueError(f"unsupported degree k={self.k}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.tau))


@dataclass
class State:
    t: float
    mesh: Mesh
    spaces: FESpacePair
    u: np.ndarray
    p: np.ndarray
    w: np.ndarray
    motion: MotionState
    multiplier: float = 0.0


def initialize(config: SimConfig) -> State:
    mesh = generate_bubble_mesh(config.rect, config.circle_center,
                                config.circle_radius, config.h, config.k)
    spaces = build_taylor_hood(mesh, config.k,
                               pressure_continuity=config.pressure_continuity)
    u = np.zeros(2 * spaces.velocity.n_dofs)
    w = harmonic_extension(mesh, spaces, u)
    p = np.zeros(spaces.pressure.n_dofs)
    motion = MotionState(x=mesh.x.copy(), w=w,
                         last_min_angle=quality(mesh).min_angle)
    return State(t=0.0, mesh=mesh, spaces=spaces, u=u, p=p, w=w, motion=motion)


def flow_solve(mesh: Mesh, spaces: FESpacePair, params: PhaseParams,
               tau: float, u_old: np.ndarray, transport: np.ndarray,
               load: np.ndarray, boundary_values: np.ndarray | None = None,
               geom: GeometryTables | None = None):
    """One implicit solve of the momentum/divergence system.

    Solves (M_rho / tau + B(transport) + A_mu) u - C^T p = load + M_rho
    u_old / tau with no-slip rows replaced by boundary_values (zero by
    default) and the zero-mean pressure constraint.  Returns (u, p,
    multiplier).
    """
    geom = geom or GeometryTables(mesh, default_rule(mesh))
    M_rho = assemble("M_rho", mesh, spaces, params, geom=geom)
    A_mu = assemble("A_mu", mesh, spaces, params, geom=geom)
    B_conv = assemble_convection(mesh, spaces, params, transport, geom=geom)
    C = assemble("C", mesh, spaces, geom=geom)
    m = pressure_mean_vector(mesh, spaces, geom=geom)

    Kuu = (M_rho / tau + A_mu + B_conv).tocsr()
    rhs_u = load + M_rho @ u_old / tau

    n_u = 2 * spaces.velocity.n_dofs
    bnd = spaces.vector_dofs(spaces.boundary_dofs)
    fixed = np.zeros(n_u, dtype=bool)
    fixed[bnd] = True
    free = ~fixed
    u_bc = np.zeros(n_u)
    if boundary_values is not None:
        u_bc[bnd] = boundary_values[bnd]

    Kff = Kuu[free][:, free]
    rhs_f = rhs_u[free] - Kuu[free][:, fixed] @ u_bc[fixed]
    Cf = C[:, free]
    rhs_p = C[:, fixed] @ u_bc[fixed]

    uf, p, lam = solve_saddle(SaddleSystem(
        Kuu=Kff, B=(-Cf).tocsr(), rhs_u=rhs_f, rhs_p=rhs_p, mean_vector=m))
    u = u_bc.copy()
    u[free] = uf
    return u, p, float(lam)


def step(state: State, config: SimConfig) -> State:
    """Advance the coupled system by one time step."""
    params = config.params
    tau = config.tau

    # (1) mesh velocity from the current velocity
    w = harmonic_extension(state.mesh, state.spaces, state.u)

    # (2) move the mesh, carrying all coefficients nodally
    x_new = advance_mesh(state.mesh.x, w, tau)
    mesh = move_mesh(state.mesh, x_new)
    spaces = spaces_with_mesh(state.spaces, mesh)

    # (3) implicit flow solve with convection frozen at u^n - w^n
    geom = GeometryTables(mesh, default_rule(mesh))
    load = assemble_load(mesh, spaces, params,
                         weighted_by_rho=config.body_force_weighted_by_rho,
                         geom=geom)
    u, p, lam = flow_solve(mesh, spaces, params, tau, state.u,
                           transport=state.u - w, load=load, geom=geom)

    # (4) remesh on the angle criterion
    fields = {"u": ("velocity", u), "p": ("pressure", p),
              "w": ("velocity", w)}
    mesh2, spaces2, fields2, did_remesh = check_and_remesh(
        mesh, spaces, fields, config.rect, config.h,
        angle_threshold=config.remesh_angle)
    if did_remesh:
        u = fields2["u"][1]
        p = fields2["p"][1]
        w = fields2["w"][1]
    motion = MotionState(
        x=mesh2.x.copy(), w=w,
        remesh_count=state.motion.remesh_count + int(did_remesh),
        last_min_angle=quality(mesh2).min_angle)
    return State(t=state.t + tau, mesh=mesh2, spaces=spaces2, u=u, p=p, w=w,
                 motion=motion, multiplier=lam)


def record_state(state: State, config: SimConfig) -> BenchmarkRecord:
    geom = GeometryTables(state.mesh, default_rule(state.mesh))
    kin, pot, tot = energy(state.mesh, state.spaces.velocity, state.u,
                           config.params, geom=geom)
    return BenchmarkRecord(
        t=state.t,
        circularity=circularity(state.mesh, geom=geom),
        center_of_mass=center_of_mass(state.mesh, geom=geom),
        rise_velocity=rise_velocity(state.mesh, state.spaces.velocity,
                                    state.u, geom=geom),
        kinetic_energy=kin,
        potential_energy=pot,
        total_energy=tot,
        area_minus=phase_area(state.mesh, -1, geom=geom),
        interface_length=interface_length(state.mesh),
        min_angle=state.motion.last_min_angle,
        remesh_count=state.motion.remesh_count,
    )


def run(config: SimConfig, sinks=()):
    """Run the simulation; returns (final state, list of records).

    sinks are callables invoked as sink(step_index, state, record) at
    every recorded step (including the initial state).
    """
    state = initialize(config)
    records = [record_state(state, config)]
    for sink in sinks:
        sink(0, state, records[-1])
    n = config.n_steps
    for i in range(1, n + 1):
        state = step(state, config)
        if i % config.record_every == 0 or i == n:
            rec = record_state(state, config)
            records.append(rec)
            for sink in sinks:
                sink(i, state, rec)
    return state, records
