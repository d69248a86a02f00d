import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbmsplit.analytic import G1_case2, G1_case3, G2_case2, G2_case3
from pbmsplit.core import Constant, Coupled, PerAxis
from pbmsplit.errors import DomainError, SetupError
from pbmsplit.mesh import (MeshBuildReport, backward_march, build_characteristic_rows, build_jagged,
                           build_nonuniform_cfl1, build_uniform, lattice_backward, lattice_steps,
                           read_nodes, write_nodes)

DOM = (2.0, 2.0)


class TestUniform:
    def test_three_points(self):
        g = build_uniform(DOM, 3, 3)
        np.testing.assert_array_equal(g.axis1.points, [0, 1, 2])
        np.testing.assert_array_equal(g.axis2.points, [0, 1, 2])

    def test_benchmark_spacing(self):
        g = build_uniform(DOM, 101, 101)
        np.testing.assert_allclose(g.axis1.spacing, 0.02, rtol=1e-12)
        np.testing.assert_allclose(g.axis2.spacing, 0.02, rtol=1e-12)

    def test_corner_grid(self):
        g = build_uniform((1.0, 2.0), 2, 2)
        assert list(g.axis1.points) == [0, 1] and list(g.axis2.points) == [0, 2]

    def test_too_few_points(self):
        with pytest.raises(SetupError):
            build_uniform(DOM, 1, 5)


class TestNonuniform:
    def test_gamma_one_starves_axis2(self):
        g = Constant(0.5, 0.5)
        with pytest.raises(DomainError):
            build_nonuniform_cfl1(g, (1.0, 1.0), 0.1, gamma=1.0)
        ax = backward_march(lambda a: 1.0 * 0.5 * 0.1, 1.0)
        np.testing.assert_allclose(np.diff(ax), 0.05, rtol=1e-12)

    def test_constant_growth_is_uniform(self):
        grid = build_nonuniform_cfl1(Constant(1.0, 1.0), (1.0, 1.0), 0.1, 0.5)
        np.testing.assert_allclose(grid.axis1.spacing, 0.05, rtol=1e-9)
        np.testing.assert_allclose(grid.axis2.points, build_uniform((1, 1), 21, 21).axis2.points, atol=1e-12)

    def test_reconstruction(self):
        growth = PerAxis(G1_case2, G2_case2)
        dt, gamma = 0.05, 0.5
        grid = build_nonuniform_cfl1(growth, DOM, dt, gamma)
        a = grid.axis1.points
        np.testing.assert_allclose(a[2:] - a[1:-1], gamma * G1_case2(a[2:]) * dt, rtol=0, atol=1e-14)
        b = grid.axis2.points
        np.testing.assert_allclose(b[2:] - b[1:-1], (1 - gamma) * G2_case2(b[2:]) * dt, rtol=0, atol=1e-14)
        assert a[0] == 0.0 and a[-1] == 2.0
        # prepend-zero leaves a first cell no longer than a full step
        assert 0 < a[1] <= gamma * G1_case2(a[1]) * dt * (1 + 1e-12)

    def test_termination_conventions(self):
        growth = PerAxis(G1_case2, G2_case2)
        full = build_nonuniform_cfl1(growth, DOM, 0.1, 0.5)
        last = build_nonuniform_cfl1(growth, DOM, 0.1, 0.5, termination="last-positive")
        assert (len(full.axis1), len(full.axis2)) == (278, 57)
        assert (len(last.axis1), len(last.axis2)) == (277, 56)
        np.testing.assert_array_equal(full.axis1.points[1:], last.axis1.points)
        with pytest.raises(SetupError):
            build_nonuniform_cfl1(growth, DOM, 0.1, 0.5, termination="clip")

    def test_argument_errors(self):
        g = PerAxis(G1_case2, G2_case2)
        with pytest.raises(SetupError):
            build_nonuniform_cfl1(g, DOM, 0.0)
        with pytest.raises(SetupError):
            build_nonuniform_cfl1(g, DOM, 0.1, gamma=1.5)
        with pytest.raises(SetupError):
            build_nonuniform_cfl1(Coupled(G1_case3, G2_case3), DOM, 0.1)


class TestJagged:
    def test_constant_coupled_growth(self):
        one = lambda a1, a2: 1.0 + 0 * a1
        m = build_jagged(Coupled(one, one), (1.0, 1.0), 0.5)
        np.testing.assert_allclose(m.anchors, [0, 0.5, 1])
        for r in m.rows:
            np.testing.assert_allclose(r.line.points, [0, 0.5, 1])

    def test_rows_follow_their_anchor(self):
        g = Coupled(lambda a1, a2: 0.5 + a2, lambda a1, a2: 1.0 + 0 * a1)
        m = build_jagged(g, DOM, 0.1)
        spacings = []
        for r in m.rows:
            d = r.line.spacing[1:]
            np.testing.assert_allclose(d, d[0], rtol=1e-9)
            spacings.append(d[0])
        assert len(set(np.round(spacings, 12))) == len(m.rows)

    def test_row_reconstruction(self):
        g = Coupled(G1_case3, G2_case3)
        dt = 0.02
        m = build_jagged(g, DOM, dt)
        b = m.anchors
        np.testing.assert_allclose(b[2:] - b[1:-1], dt * G2_case3(2.0, b[2:]), atol=1e-14)
        for r in m.rows:
            a = r.line.points
            np.testing.assert_allclose(a[2:] - a[1:-1], dt * G1_case3(a[2:], r.anchor), atol=1e-14)

    def test_published_count_other_orientation(self):
        # lines along a1 give a larger mesh than lines along a2 for this growth
        g = Coupled(G1_case3, G2_case3)
        n1 = build_jagged(g, DOM, 0.01, for_axis=1, termination="last-positive").node_count
        n2 = build_jagged(g, DOM, 0.01, for_axis=2, termination="last-positive").node_count
        assert n2 == 25367
        assert n1 > n2

    def test_report(self):
        m = build_jagged(Coupled(G1_case3, G2_case3), DOM, 0.05)
        rep = MeshBuildReport.of(m)
        assert rep.node_count == m.node_count == int(sum(m.row_lengths))
        assert 0 < rep.min_spacing <= rep.max_spacing


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0),
       st.floats(0.1, 2.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.1, 0.3),
       st.sampled_from([1, 2]))
def test_random_jagged_meshes_are_monotone(c0, c1, c2, d0, d1, d2, dt, axis):
    g = Coupled(lambda a1, a2: c0 + c1 * a1 + c2 * a2, lambda a1, a2: d0 + d1 * a1 + d2 * a2)
    m = build_jagged(g, DOM, dt, for_axis=axis)
    assert np.all(np.diff(m.anchors) > 0)
    for r in m.rows:
        assert np.all(np.diff(r.line.points) > 0)
        assert r.line.points[0] == 0.0 and r.line.points[-1] == 2.0


class TestLattice:
    def test_backward_lattice(self):
        np.testing.assert_allclose(lattice_backward(1.0, 0.25), [0, 0.25, 0.5, 0.75, 1.0])
        np.testing.assert_allclose(lattice_backward(1.0, 0.3), [0, 0.1, 0.4, 0.7, 1.0])

    def test_steps(self):
        assert lattice_steps(2.0, 101, 1.0) == 50
        assert lattice_steps(2.0, 102, 1.0) == 51

    def test_characteristic_rows_are_uniform_in_row_coordinates(self):
        g = Coupled(G1_case3, G2_case3)
        cr = build_characteristic_rows(g, DOM, 0.1, 1, 101, 101, n_panels=512)
        assert len(cr.mesh.rows) == 101
        for r, K, m in zip(cr.mesh.rows[::20], cr.shifts[::20], cr.maps[::20]):
            x = m.forward(r.line.points)
            d = np.diff(x)
            np.testing.assert_allclose(d[1:], 0.1 / K, rtol=1e-7)
            assert len(r.line) >= 101


@pytest.mark.parametrize("kind", ["grid", "jagged"])
def test_node_file_round_trip(tmp_path, kind):
    if kind == "grid":
        mesh = build_nonuniform_cfl1(PerAxis(G1_case2, G2_case2), DOM, 0.2)
    else:
        mesh = build_jagged(Coupled(G1_case3, G2_case3), DOM, 0.1, for_axis=2)
    p = tmp_path / "nodes.txt"
    write_nodes(mesh, p)
    back = read_nodes(p)
    if kind == "grid":
        np.testing.assert_array_equal(back.axis1.points, mesh.axis1.points)
        np.testing.assert_array_equal(back.axis2.points, mesh.axis2.points)
    else:
        assert back.orientation == 2
        np.testing.assert_array_equal(back.anchors, mesh.anchors)
        for a, b in zip(back.rows, mesh.rows):
            np.testing.assert_array_equal(a.line.points, b.line.points)


def test_node_file_bad_header(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("hello\n1 2\n")
    with pytest.raises(SetupError):
        read_nodes(p)
