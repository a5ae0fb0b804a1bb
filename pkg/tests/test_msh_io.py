import numpy as np
import pytest

from alefem.mesh import generate_bubble_mesh, generate_rect_mesh
from alefem.msh_io import MshParseError, read_msh, write_msh

from conftest import CENTER, RADIUS, RECT


@pytest.mark.parametrize("k", [1, 2, 3])
def test_roundtrip_bubble_mesh(tmp_path, k):
    mesh = generate_bubble_mesh(RECT, CENTER, RADIUS, 0.1, k)
    path = tmp_path / "bubble.msh"
    write_msh(mesh, path)
    back = read_msh(path)
    assert back.degree == mesh.degree
    assert np.array_equal(back.x, mesh.x)  # bit-exact coordinates
    assert np.array_equal(back.elements, mesh.elements)
    assert np.array_equal(back.phase, mesh.phase)
    assert np.array_equal(np.sort(back.interface_edges, axis=0),
                          np.sort(mesh.interface_edges, axis=0))
    assert np.array_equal(np.sort(back.boundary_edges, axis=0),
                          np.sort(mesh.boundary_edges, axis=0))


def test_roundtrip_rect_mesh(tmp_path):
    mesh = generate_rect_mesh(RECT, 0.5, 2)
    path = tmp_path / "rect.msh"
    write_msh(mesh, path)
    back = read_msh(path)
    assert back.n_elements == mesh.n_elements
    assert np.array_equal(back.x, mesh.x)


def test_hand_written_two_triangle_file(tmp_path):
    text = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
2
1 2 2 1 1 1 2 3
2 2 2 1 1 1 3 4
$EndElements
"""
    path = tmp_path / "square.msh"
    path.write_text(text)
    mesh = read_msh(path)
    assert mesh.n_nodes == 4
    assert mesh.n_elements == 2
    assert mesh.degree == 1
    assert (mesh.phase == 1).all()


def test_unsupported_element_type(tmp_path):
    text = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
1
1 3 2 1 1 1 2 3 4
$EndElements
"""
    path = tmp_path / "quad.msh"
    path.write_text(text)
    with pytest.raises(MshParseError, match="unsupported element type"):
        read_msh(path)


def test_missing_phase_tag(tmp_path):
    text = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
3
1 0 0 0
2 1 0 0
3 0 1 0
$EndNodes
$Elements
1
1 2 2 7 7 1 2 3
$EndElements
"""
    path = tmp_path / "badtag.msh"
    path.write_text(text)
    with pytest.raises(MshParseError, match="phase tag"):
        read_msh(path)


def test_malformed_section_reports_line(tmp_path):
    path = tmp_path / "broken.msh"
    path.write_text("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\nnotanumber\n")
    with pytest.raises(MshParseError, match="line 5"):
        read_msh(path)
