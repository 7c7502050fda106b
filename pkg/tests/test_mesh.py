"""Tests mesh geometry and discrete operators."""
import unittest
import numpy as np
from numpy import testing
from minwave import mesh as mesh
from minwave.exceptions import ValidationError


class TestInterval(unittest.TestCase):
    """Test uniform interval meshes."""

    def setUp(self):
        """Initialization before test."""
        self.mesh = mesh.Mesh.interval(0.0, 1.0, 4)

    def test_geometry(self):
        """Volumes, lumped weights and boundary."""
        self.assertEqual(self.mesh.n_nodes, 5)
        self.assertEqual(self.mesh.n_cells, 4)
        testing.assert_allclose(self.mesh.volumes, 0.25)
        testing.assert_allclose(self.mesh.node_weights,
                                [0.125, 0.25, 0.25, 0.25, 0.125])
        testing.assert_array_equal(self.mesh.boundary_nodes, [0, 4])
        self.assertEqual(self.mesh.boundary_sides, [mesh.LEFT, mesh.RIGHT])
        testing.assert_allclose(self.mesh.boundary_weights, [1.0, 1.0])

    def test_gradient_of_linear_field(self):
        """Gradient of 3x - 1 is 3 in every cell."""
        values = 3.0 * self.mesh.nodes[:, 0] - 1.0
        testing.assert_allclose(self.mesh.gradient().dot(values), 3.0)

    def test_strain_equals_gradient(self):
        """In 1D the strain is the derivative."""
        values = self.mesh.nodes[:, 0] ** 2
        testing.assert_allclose(self.mesh.strain().dot(values),
                                self.mesh.gradient().dot(values))

    def test_regions(self):
        """Later boxes override the default region."""
        tagged = mesh.Mesh.interval(0.0, 1.0, 4, regions=[
            ('matrix', None), ('inclusion', [[0.5, 1.0]])])
        self.assertEqual(tagged.cell_region_names(),
                         ['matrix', 'matrix', 'inclusion', 'inclusion'])

    def test_uncovered_cells(self):
        """Regions must cover every cell."""
        with self.assertRaises(ValidationError):
            mesh.Mesh.interval(0.0, 1.0, 4, regions=[('left', [[0.0, 0.5]])])

    def test_bad_input(self):
        """Empty intervals and broken connectivity are rejected."""
        with self.assertRaises(ValidationError):
            mesh.Mesh.interval(1.0, 0.0, 4)
        with self.assertRaises(ValidationError):
            mesh.Mesh([0.0, 1.0], [[0, 2]])
        with self.assertRaises(ValidationError):
            mesh.Mesh([0.0, 1.0, 1.0], [[0, 1], [1, 2]])

    def test_reversed_cells_are_flipped(self):
        """Cells given right to left get positive volumes."""
        flipped = mesh.Mesh([0.0, 0.5, 1.0], [[1, 0], [2, 1]])
        testing.assert_allclose(flipped.volumes, 0.5)
        testing.assert_allclose(
            flipped.gradient().dot(flipped.nodes[:, 0]), 1.0)


class TestRectangle(unittest.TestCase):
    """Test structured triangulations."""

    def setUp(self):
        """Initialization before test."""
        self.mesh = mesh.Mesh.rectangle(2.0, 1.0, 4, 2)

    def test_geometry(self):
        """Areas, weights and perimeter."""
        self.assertEqual(self.mesh.n_cells, 16)
        self.assertAlmostEqual(self.mesh.volumes.sum(), 2.0)
        self.assertAlmostEqual(self.mesh.node_weights.sum(), 2.0)
        self.assertAlmostEqual(self.mesh.boundary_weights.sum(), 6.0)
        self.assertEqual(self.mesh.n_boundary, 12)

    def test_sides(self):
        """Corners are tagged left or right."""
        self.assertEqual(int(self.mesh.side_mask(mesh.LEFT).sum()), 3)
        self.assertEqual(int(self.mesh.side_mask(mesh.RIGHT).sum()), 3)
        self.assertEqual(int(self.mesh.side_mask(mesh.BOTTOM).sum()), 3)
        self.assertEqual(int(self.mesh.side_mask(mesh.TOP).sum()), 3)

    def test_gradient_of_linear_field(self):
        """Gradient of 3x - 2y is exact."""
        x, y = self.mesh.nodes[:, 0], self.mesh.nodes[:, 1]
        grad = self.mesh.gradient().dot(3 * x - 2 * y).reshape(-1, 2)
        testing.assert_allclose(grad, np.tile([3.0, -2.0], (16, 1)),
                                atol=1e-12)

    def test_strain_of_shear(self):
        """u = (y, 0) has shear strain 1/2, stored with sqrt(2)."""
        displacement = np.column_stack([self.mesh.nodes[:, 1],
                                        np.zeros(self.mesh.n_nodes)])
        strain = self.mesh.strain().dot(displacement.ravel()).reshape(-1, 3)
        testing.assert_allclose(
            strain, np.tile([0.0, 0.0, np.sqrt(0.5)], (16, 1)), atol=1e-12)

    def test_trace_operator(self):
        """Trace operator scatters weighted traces onto boundary nodes."""
        operator = self.mesh.trace_operator(2)
        self.assertEqual(operator.shape, (2 * self.mesh.n_nodes, 24))
        nodal = operator.dot(np.ones(24))
        self.assertAlmostEqual(nodal.sum(), 12.0)

    def test_node_regions(self):
        """Shares of each node sum to its lumped weight."""
        shares = self.mesh.node_regions()
        testing.assert_allclose([sum(s.values()) for s in shares],
                                self.mesh.node_weights)


if __name__ == '__main__':
    unittest.main()
