"""Command-line entry point: benchmark runs, convergence studies, and
the verification suites.

Config files are flat `key = value` text; `[section]` headers are
allowed for readability and ignored, `#` starts a comment.  Keys:
rho_plus, rho_minus, mu_plus, mu_minus, g, k, h, tau, T, rect,
circle_center, circle_radius, remesh_angle, record_every,
body_force_weighted_by_rho.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import PhaseParams
from .stepper import SimConfig, record_state, run
from .vtk_io import write_vtk


class ConfigError(Exception):
    pass


REQUIRED_KEYS = ("rho_plus", "rho_minus", "mu_plus", "mu_minus",
                 "g", "k", "h", "tau", "T")
OPTIONAL_KEYS = {
    "rect": "0,0,1,2",
    "circle_center": "0.5,0.5",
    "circle_radius": "0.25",
    "remesh_angle": f"{math.pi / 18.0!r}",
    "record_every": "1",
    "body_force_weighted_by_rho": "true",
}


def parse_config_text(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', "
                              f"got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key or not val:
            raise ConfigError(f"line {lineno}: empty key or value")
        out[key] = val
    return out


def _floats(val: str, n: int, key: str):
    parts = [p for p in val.replace(",", " ").split() if p]
    if len(parts) != n:
        raise ConfigError(f"key {key!r} needs {n} numbers, got {val!r}")
    return tuple(float(p) for p in parts)


def _bool(val: str, key: str) -> bool:
    if val.lower() in ("true", "1", "yes", "on"):
        return True
    if val.lower() in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"key {key!r} must be boolean, got {val!r}")


def load_config(path) -> SimConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    kv = parse_config_text(text)
    missing = [k for k in REQUIRED_KEYS if k not in kv]
    if missing:
        raise ConfigError(f"missing required config keys: {', '.join(missing)}")
    known = set(REQUIRED_KEYS) | set(OPTIONAL_KEYS)
    unknown = sorted(set(kv) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    full = dict(OPTIONAL_KEYS)
    full.update(kv)
    params = PhaseParams(
        rho_plus=float(full["rho_plus"]), rho_minus=float(full["rho_minus"]),
        mu_plus=float(full["mu_plus"]), mu_minus=float(full["mu_minus"]),
        g=float(full["g"]))
    return SimConfig(
        params=params,
        k=int(full["k"]),
        h=float(full["h"]),
        tau=float(full["tau"]),
        T=float(full["T"]),
        rect=_floats(full["rect"], 4, "rect"),
        circle_center=_floats(full["circle_center"], 2, "circle_center"),
        circle_radius=float(full["circle_radius"]),
        remesh_angle=float(full["remesh_angle"]),
        record_every=int(full["record_every"]),
        body_force_weighted_by_rho=_bool(full["body_force_weighted_by_rho"],
                                         "body_force_weighted_by_rho"),
    )


def config_echo(config: SimConfig) -> dict:
    return {
        "rho_plus": config.params.rho_plus,
        "rho_minus": config.params.rho_minus,
        "mu_plus": config.params.mu_plus,
        "mu_minus": config.params.mu_minus,
        "g": config.params.g,
        "k": config.k, "h": config.h, "tau": config.tau, "T": config.T,
        "rect": list(config.rect),
        "circle_center": list(config.circle_center),
        "circle_radius": config.circle_radius,
        "remesh_angle": config.remesh_angle,
        "record_every": config.record_every,
        "body_force_weighted_by_rho": config.body_force_weighted_by_rho,
    }


def cmd_run(config_path, outdir, vtk_every: int = 0, quiet=False) -> int:
    from .observables import BenchmarkRecord

    try:
        config = load_config(config_path)
    except (ConfigError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    csv_rows = []
    remesh_events = []
    last_count = 0

    def sink(i, state, rec):
        nonlocal last_count
        csv_rows.append(rec.csv_row())
        if rec.remesh_count > last_count:
            remesh_events.append({"step": i, "t": state.t,
                                  "count": rec.remesh_count})
            last_count = rec.remesh_count
        if vtk_every and i % vtk_every == 0:
            write_vtk(out / f"state_{i:06d}.vtk", state.mesh, state.u,
                      (state.spaces.pressure, state.p))
        if not quiet and (i % 50 == 0):
            print(f"step {i:6d}  t={state.t:.4f}  circ={rec.circularity:.5f} "
                  f"com_y={rec.center_of_mass[1]:.5f} "
                  f"v_rise={rec.rise_velocity:.5f} remesh={rec.remesh_count}")

    try:
        final_state, records = run(config, sinks=[sink])
    except Exception as err:
        print(f"run failed at t-level {len(csv_rows) - 1}: {err}",
              file=sys.stderr)
        return 1
    (out / "bench.csv").write_text(
        BenchmarkRecord.CSV_HEADER + "\n" + "\n".join(csv_rows) + "\n")
    manifest = {
        "version": __version__,
        "config": config_echo(config),
        "rows": len(csv_rows),
        "csv": "bench.csv",
        "remesh_events": remesh_events,
        "final_time": final_state.t,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    if not quiet:
        print(f"wrote {out / 'bench.csv'} ({len(csv_rows)} rows), "
              f"{len(remesh_events)} remesh events")
    return 0


def cmd_converge(config_path, levels: int = 3, m: int = 2, quiet=False) -> int:
    from .verify import spatial_convergence_study

    try:
        config = load_config(config_path)
    except (ConfigError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    def progress(lvl, i, n):
        if not quiet and i % 25 == 0:
            print(f"  level {lvl}: step {i}/{n}", file=sys.stderr)

    report = spatial_convergence_study(config, levels=levels, m=m,
                                       progress=progress)
    norm_of = {"u": "H1", "w": "H1", "phi": "H1", "p": "L2"}
    print(f"# spatial convergence, k={config.k}, tau={config.tau}, "
          f"T={config.T}, m={m}")
    print(f"{'h':>10} " + " ".join(f"{n + ':' + norm_of[n]:>14}"
                                   for n in ("u", "w", "phi", "p")))
    for i in range(levels - 1):
        hpair = f"{report.h_values[i]:.3g}/{report.h_values[i + 1]:.3g}"
        print(f"{hpair:>10} " + " ".join(
            f"{report.differences[n][i]:14.6e}" for n in ("u", "w", "phi", "p")))
    rates = " ".join(f"{report.rates[n][-1]:14.3f}" for n in ("u", "w", "phi", "p"))
    print(f"{'rate':>10} " + rates)
    return 0


def cmd_verify(suite: str = "all", quiet=False) -> int:
    checks = build_verify_checks(suite)
    failed = 0
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as err:  # an oracle crash is a failure with context
            ok, detail = False, f"exception: {err}"
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}: {detail}")
        if not ok:
            failed += 1
            break
    return 1 if failed else 0


def build_verify_checks(suite: str):
    import numpy as np

    from .assembly import assemble, PhaseParams
    from .fespace import build_taylor_hood
    from .mesh import generate_bubble_mesh
    from .quadrature import triangle_rule, triangle_monomial_integral
    from .verify import (homotopy_identity_residual, manufactured_flow_errors,
                         transport_formula_residual)

    suites = ("homotopy", "transport", "manufactured", "matrices", "all")
    if suite not in suites:
        raise ValueError(f"unknown suite {suite!r}; choose from {suites}")
    checks = []

    if suite in ("matrices", "all"):
        def check_quadrature():
            worst = 0.0
            for d in range(13):
                r = triangle_rule(d)
                for a in range(d + 1):
                    for b in range(d + 1 - a):
                        got = (r.weights * r.points[:, 0] ** a
                               * r.points[:, 1] ** b).sum()
                        exact = triangle_monomial_integral(a, b)
                        worst = max(worst, abs(got - exact) / exact)
            return worst < 1e-14, f"worst relative error {worst:.2e}"

        def check_reference_matrices():
            from .fespace import build_scalar_space
            from .assembly import scalar_mass, scalar_laplacian
            from .mesh import Mesh
            import numpy as np

            mesh = _unit_right_triangle()
            space = build_scalar_space(mesh, 1)
            M = scalar_mass(mesh, space).toarray()
            A = scalar_laplacian(mesh, space).toarray()
            M_exact = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24.0
            A_exact = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0],
                                [-0.5, 0.0, 0.5]])
            err = max(np.abs(M - M_exact).max(), np.abs(A - A_exact).max())
            return err < 1e-14, f"max entry error {err:.2e}"

        checks += [("quadrature exactness", check_quadrature),
                   ("reference P1 matrices", check_reference_matrices)]

    if suite in ("homotopy", "all"):
        def check_homotopy():
            mesh = generate_bubble_mesh((0, 0, 1, 2), (0.5, 0.5), 0.25, 0.2, 2)
            spaces = build_taylor_hood(mesh, 2)
            params = PhaseParams(1000.0, 100.0, 10.0, 1.0, 0.98)
            rng = np.random.default_rng(2024)
            n_u = 2 * spaces.velocity.n_dofs
            worst = 0.0
            for kind in ("M", "M_rho", "A", "A_mu", "C"):
                for _ in range(4):
                    e_x = smooth_displacement(rng, spaces.velocity.positions,
                                              1e-2)
                    u = rng.normal(size=n_u)
                    nv = spaces.pressure.n_dofs if kind == "C" else n_u
                    v = rng.normal(size=nv)
                    r = homotopy_identity_residual(mesh, e_x, kind, u, v,
                                                   params=params, spaces=spaces)
                    worst = max(worst, r)
                    if r >= 1e-9:
                        return False, f"kind {kind}: residual {r:.2e}"
            return True, f"worst residual {worst:.2e}"

        checks.append(("matrix homotopy identities", check_homotopy))

    if suite in ("transport", "all"):
        def check_transport():
            import math

            mesh = generate_bubble_mesh((0, 0, 1, 2), (0.5, 0.5), 0.25, 0.2, 2)
            spaces = build_taylor_hood(mesh, 2)
            rng = np.random.default_rng(11)
            w = smooth_displacement(rng, spaces.velocity.positions, 0.1)
            f = rng.normal(size=spaces.velocity.n_dofs)
            res = [transport_formula_residual(mesh, w, f, tau)
                   for tau in (0.02, 0.01, 0.005)]
            orders = [math.log2(res[i] / res[i + 1]) for i in range(2)]
            ok = all(0.9 <= o <= 1.1 for o in orders)
            return ok, f"decay orders {[round(o, 3) for o in orders]}"

        checks.append(("transport formula", check_transport))

    if suite in ("manufactured", "all"):
        def check_manufactured():
            import math

            eu0, ep0 = manufactured_flow_errors(2, 0.2, 0.05, 1.0, case="poly")
            if max(eu0, ep0) > 1e-9:
                return False, f"polynomial reproduction errors {eu0:.2e}, {ep0:.2e}"
            errs = [manufactured_flow_errors(2, h, 0.02, 1.0, case="trig")
                    for h in (0.2, 0.1)]
            rate_u = math.log2(errs[0][0] / errs[1][0])
            rate_p = math.log2(errs[0][1] / errs[1][1])
            ok = rate_u >= 1.8 and rate_p >= 1.6
            return ok, f"H1 u rate {rate_u:.2f}, L2 p rate {rate_p:.2f}"

        checks.append(("manufactured flow", check_manufactured))

    return checks


def smooth_displacement(rng, pts, amp):
    """Random smooth displacement field, normalized to sup-norm amp."""
    out = np.zeros((len(pts), 2))
    for _ in range(3):
        kx, ky = rng.integers(1, 4, size=2)
        phx, phy = rng.uniform(0, 2 * np.pi, size=2)
        a = rng.normal(size=2)
        out[:, 0] += a[0] * np.sin(kx * np.pi * pts[:, 0] + phx) \
            * np.cos(ky * np.pi * pts[:, 1] / 2 + phy)
        out[:, 1] += a[1] * np.cos(kx * np.pi * pts[:, 0] + phx) \
            * np.sin(ky * np.pi * pts[:, 1] / 2 + phy)
    out *= amp / np.abs(out).max()
    return out.ravel()


def _unit_right_triangle():
    from .mesh import Mesh

    return Mesh(
        x=np.array([0.0, 0.0, 1.0, 0.0, 0.0, 1.0]),
        elements=np.array([[0, 1, 2]]),
        phase=np.array([1], dtype=np.int8),
        interface_edges=np.empty((0, 2), dtype=int),
        boundary_edges=np.array([[0, 0], [0, 1], [0, 2]]),
        degree=1,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="alefem",
        description="Two-phase incompressible flow on an interface-tracking "
                    "moving mesh")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a benchmark simulation")
    p_run.add_argument("config")
    p_run.add_argument("-o", "--output", default="out")
    p_run.add_argument("--vtk-every", type=int, default=0, metavar="N")
    p_run.add_argument("-q", "--quiet", action="store_true")

    p_conv = sub.add_parser("converge", help="nested-mesh convergence study")
    p_conv.add_argument("config")
    p_conv.add_argument("--levels", type=int, default=3)
    p_conv.add_argument("-m", type=int, default=2, dest="m")
    p_conv.add_argument("-q", "--quiet", action="store_true")

    p_ver = sub.add_parser("verify", help="run the verification oracles")
    p_ver.add_argument("suite", nargs="?", default="all",
                       choices=["homotopy", "transport", "manufactured",
                                "matrices", "all"])

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.output, vtk_every=args.vtk_every,
                       quiet=args.quiet)
    if args.command == "converge":
        return cmd_converge(args.config, levels=args.levels, m=args.m,
                            quiet=args.quiet)
    return cmd_verify(args.suite)


if __name__ == "__main__":
    sys.exit(main())
