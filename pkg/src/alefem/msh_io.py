"""Reader/writer for the ASCII MSH 2.2 subset used by this package.

Sections: $MeshFormat, $Nodes, $Elements.  Triangles are element type 2
(degree 1), 9 (degree 2) or 21 (degree 3); interface and boundary edges
are the matching line types 1, 8, 26.  Physical tags: 1 = plus phase,
2 = minus phase, 10 = interface lines, 20 = outer boundary lines.
"""

from __future__ import annotations

import numpy as np

from .mesh import EDGE_TYPE, MINUS, PLUS, TRIANGLE_TYPE, Mesh
from .reference import edge_local_nodes

PHYS_PLUS = 1
PHYS_MINUS = 2
PHYS_INTERFACE = 10
PHYS_BOUNDARY = 20

_TRI_DEGREE = {v: k for k, v in TRIANGLE_TYPE.items()}
_EDGE_DEGREE = {v: k for k, v in EDGE_TYPE.items()}

# Gmsh line node order is (end0, end1, interior...), same as ours.


class MshParseError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def write_msh(mesh: Mesh, path) -> None:
    coords = mesh.coords
    k = mesh.degree
    lines = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(mesh.n_nodes)]
    for i, (x, y) in enumerate(coords, start=1):
        lines.append(f"{i} {float(x)!r} {float(y)!r} 0")
    lines += ["$EndNodes", "$Elements"]
    n_elem = mesh.n_elements + len(mesh.interface_edges) + len(mesh.boundary_edges)
    lines.append(str(n_elem))
    eid = 1
    for e in range(mesh.n_elements):
        phys = PHYS_MINUS if mesh.phase[e] == MINUS else PHYS_PLUS
        nodes = " ".join(str(n + 1) for n in mesh.elements[e])
        lines.append(f"{eid} {TRIANGLE_TYPE[k]} 2 {phys} {phys} {nodes}")
        eid += 1
    for edge_set, phys in ((mesh.interface_edges, PHYS_INTERFACE),
                           (mesh.boundary_edges, PHYS_BOUNDARY)):
        for e, le in edge_set:
            nodes = mesh.elements[e, edge_local_nodes(k, le)]
            # Gmsh line ordering: endpoints, then interior nodes
            ordered = [nodes[0], nodes[-1], *nodes[1:-1]]
            nodestr = " ".join(str(n + 1) for n in ordered)
            lines.append(f"{eid} {EDGE_TYPE[k]} 2 {phys} {phys} {nodestr}")
            eid += 1
    lines.append("$EndElements")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_msh(path) -> Mesh:
    with open(path) as f:
        raw = f.read().splitlines()

    def fail(msg, ln):
        raise MshParseError(msg, ln + 1)

    idx = {}
    for i, line in enumerate(raw):
        if line.startswith("$") and not line.startswith("$End"):
            idx[line.strip()] = i
    for sec in ("$MeshFormat", "$Nodes", "$Elements"):
        if sec not in idx:
            fail(f"missing section {sec}", len(raw) - 1)

    fmt_ln = idx["$MeshFormat"] + 1
    fmt = raw[fmt_ln].split()
    if not fmt or fmt[0] != "2.2":
        fail(f"unsupported MSH version {fmt[0] if fmt else '?'}", fmt_ln)

    ln = idx["$Nodes"] + 1
    try:
        n_nodes = int(raw[ln])
    except ValueError:
        fail("node count expected", ln)
    coords = np.empty((n_nodes, 2))
    seen = np.zeros(n_nodes, dtype=bool)
    for j in range(n_nodes):
        parts = raw[ln + 1 + j].split()
        if len(parts) < 4:
            fail("node line needs 'id x y z'", ln + 1 + j)
        nid = int(parts[0]) - 1
        if not 0 <= nid < n_nodes:
            fail(f"node id {nid + 1} out of range", ln + 1 + j)
        coords[nid] = (float(parts[1]), float(parts[2]))
        seen[nid] = True
    if not seen.all():
        fail("missing node ids", ln)

    ln = idx["$Elements"] + 1
    try:
        n_elem = int(raw[ln])
    except ValueError:
        fail("element count expected", ln)
    tris = []
    tri_phys = []
    iface_lines = []
    bnd_lines = []
    degree = None
    for j in range(n_elem):
        lno = ln + 1 + j
        parts = raw[lno].split()
        if len(parts) < 3:
            fail("element line too short", lno)
        etype = int(parts[1])
        ntags = int(parts[2])
        tags = [int(t) for t in parts[3:3 + ntags]]
        nodes = [int(n) - 1 for n in parts[3 + ntags:]]
        if etype in _TRI_DEGREE:
            d = _TRI_DEGREE[etype]
            if degree is None:
                degree = d
            elif degree != d:
                fail(f"mixed triangle degrees {degree} and {d}", lno)
            if len(nodes) != (d + 1) * (d + 2) // 2:
                fail(f"type-{etype} triangle needs "
                     f"{(d + 1) * (d + 2) // 2} nodes", lno)
            if not tags or tags[0] not in (PHYS_PLUS, PHYS_MINUS):
                fail(f"triangle needs phase tag {PHYS_PLUS} or {PHYS_MINUS}", lno)
            tris.append(nodes)
            tri_phys.append(MINUS if tags[0] == PHYS_MINUS else PLUS)
        elif etype in _EDGE_DEGREE:
            if not tags or tags[0] not in (PHYS_INTERFACE, PHYS_BOUNDARY):
                fail(f"line element needs tag {PHYS_INTERFACE} or {PHYS_BOUNDARY}",
                     lno)
            (iface_lines if tags[0] == PHYS_INTERFACE else bnd_lines).append(nodes)
        else:
            fail(f"unsupported element type {etype}", lno)
    if degree is None:
        fail("no triangle elements found", ln)

    elements = np.asarray(tris, dtype=int)
    phase = np.asarray(tri_phys, dtype=np.int8)

    # match line elements to element edges by endpoint pairs
    edge_owner: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for e, tri in enumerate(elements[:, :3]):
        for le in range(3):
            a, b = int(tri[le]), int(tri[(le + 1) % 3])
            key = (min(a, b), max(a, b))
            edge_owner.setdefault(key, []).append((e, le))

    def match(line_nodes, want_minus):
        a, b = line_nodes[0], line_nodes[1]
        owners = edge_owner.get((min(a, b), max(a, b)))
        if owners is None:
            raise MshParseError(
                f"line element {a + 1}-{b + 1} matches no triangle edge", 0)
        if want_minus:
            for e, le in owners:
                if phase[e] == MINUS:
                    return (e, le)
        return owners[0]

    interface = sorted(match(nodes, True) for nodes in iface_lines)
    boundary = sorted(match(nodes, False) for nodes in bnd_lines)
    return Mesh(
        x=coords.ravel(),
        elements=elements,
        phase=phase,
        interface_edges=np.asarray(interface, dtype=int).reshape(-1, 2),
        boundary_edges=np.asarray(boundary, dtype=int).reshape(-1, 2),
        degree=degree,
    )
