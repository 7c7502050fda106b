"""Tests the Green's function of an unbounded comparison medium."""
import unittest
from unittest import mock
import numpy as np
from numpy import testing
from minwave import greens as greens
from minwave.exceptions import ValidationError, SingularityError
from minwave.hs import ComparisonMedium
from minwave.moduli import isotropic_stiffness


def surrogate_green(point, d=1.0, q=1.0, omega=1.0):
    """exp(-kr) / (4 pi d r) with its gradient and Hessian."""
    point = np.asarray(point, dtype=float)
    radius = np.linalg.norm(point)
    unit = point / radius
    kappa = omega * np.sqrt(q / d)
    value = np.exp(-kappa * radius) / (4 * np.pi * d * radius)
    slope = -value * (kappa + 1 / radius)
    curvature = value * (kappa + 1 / radius) ** 2 + value / radius ** 2
    hessian = (curvature * np.outer(unit, unit) +
               slope / radius * (np.eye(3) - np.outer(unit, unit)))
    return value, slope * unit, hessian


def elastic_comparison():
    """Isotropic elastic comparison medium with real branches."""
    return ComparisonMedium.from_dq(
        np.zeros((6, 6)), isotropic_stiffness(2.0, 1.0), np.eye(6),
        np.zeros((3, 3)), -np.eye(3), -np.eye(3))


def coupled_comparison():
    """Scalar comparison medium whose branches are complex."""
    return ComparisonMedium.from_dq(0.5 * np.eye(3), np.eye(3), np.eye(3),
                                    [[0.2]], [[-1.0]], [[-1.0]])


class TestSurrogate(unittest.TestCase):
    """Test the decoupled scalar medium against its closed form."""

    def test_value(self):
        """G = diag(g, -g) with the screened Coulomb kernel g."""
        comparison = ComparisonMedium.scalar(2.0, 0.5)
        direction = np.array([1.0, 2.0, 2.0]) / 3.0
        for radius in (0.5, 1.0, 2.0):
            point = radius * direction
            evaluation = greens.greens_evaluate(point, 1.5, comparison)
            expected, _, _ = surrogate_green(point, 2.0, 0.5, 1.5)
            testing.assert_allclose(evaluation.value,
                                    [[expected, 0.0], [0.0, -expected]],
                                    rtol=1e-8, atol=1e-14)
            self.assertAlmostEqual(evaluation.g3[0, 0], expected)
            self.assertEqual(evaluation.size, 1)

    def test_unit_point(self):
        """g(1) = exp(-1) / (4 pi) for d = q = omega = 1."""
        evaluation = greens.greens_evaluate(
            [0.0, 1.0, 0.0], 1.0, ComparisonMedium.scalar(1.0, 1.0))
        self.assertAlmostEqual(evaluation.g2[0, 0], 0.0292749, places=6)
        self.assertAlmostEqual(evaluation.g1[0, 0], 0.0, places=12)

    def test_derivatives(self):
        """First and second derivatives follow the closed form."""
        point = np.array([0.3, -0.5, 0.4])
        evaluation = greens.greens_evaluate(
            point, 1.0, ComparisonMedium.scalar(1.0, 1.0), derivatives=2)
        _, gradient, hessian = surrogate_green(point)
        testing.assert_allclose(evaluation.first[:, 0, 0], gradient,
                                rtol=1e-8)
        testing.assert_allclose(evaluation.second[:, :, 0, 0], hessian,
                                rtol=1e-8, atol=1e-12)
        testing.assert_allclose(evaluation.second[:, :, 1, 1], -hessian,
                                rtol=1e-8, atol=1e-12)

    def test_static_limit(self):
        """At zero frequency only the great-circle part remains."""
        comparison = ComparisonMedium.scalar(1.0, 1.0)
        point = np.array([0.0, 0.0, 2.0])
        value, first, second = greens.static_greens(point, comparison, 1)
        expected = 1 / (8 * np.pi)
        testing.assert_allclose(value, [[expected, 0.0], [0.0, -expected]],
                                atol=1e-14)
        testing.assert_allclose(first[:, 0, 0], [0.0, 0.0, -expected / 2])
        self.assertIsNone(second)
        dynamic = greens.greens_evaluate(point, 0.0, comparison)
        testing.assert_allclose(dynamic.value, value, atol=1e-14)

    def test_self_voxel(self):
        """The ball integral of g and the trace of its Hessian."""
        comparison = ComparisonMedium.scalar(1.0, 1.0)
        value, second = greens.self_voxel(0.2, 0.0, comparison)
        radius = (3 * 0.008 / (4 * np.pi)) ** (1 / 3)
        self.assertAlmostEqual(value[0, 0], radius ** 2 / 2)
        self.assertAlmostEqual(value[1, 1], -radius ** 2 / 2)
        self.assertAlmostEqual(np.trace(second[:, :, 0, 0]), -1.0)


class TestGeneralMedia(unittest.TestCase):
    """Test G of media with coupled or tensorial blocks."""

    def setUp(self):
        """Initialization before test."""
        self.point = np.array([0.3, -0.5, 0.4])

    def test_real_and_symmetric(self):
        """Conjugate branches cancel and G is symmetric and even."""
        comparison = coupled_comparison()
        evaluation = greens.greens_evaluate(self.point, 1.0, comparison,
                                            derivatives=2)
        self.assertLessEqual(evaluation.residue, 1e-10)
        self.assertLessEqual(evaluation.asymmetry(), 1e-10)
        mirrored = greens.greens_evaluate(-self.point, 1.0, comparison)
        testing.assert_allclose(mirrored.value, evaluation.value,
                                rtol=1e-10, atol=1e-14)

    def test_derivatives_match_differences(self):
        """Analytic derivatives match central differences."""
        comparison = coupled_comparison()
        step = 1e-4
        evaluation = greens.greens_evaluate(self.point, 1.0, comparison,
                                            derivatives=2)
        for axis in range(3):
            shift = np.zeros(3)
            shift[axis] = step
            upper = greens.greens_evaluate(self.point + shift, 1.0,
                                           comparison, derivatives=1)
            lower = greens.greens_evaluate(self.point - shift, 1.0,
                                           comparison, derivatives=1)
            testing.assert_allclose(
                (upper.value - lower.value) / (2 * step),
                evaluation.first[axis], rtol=1e-6, atol=1e-8)
            testing.assert_allclose(
                (upper.first - lower.first) / (2 * step),
                evaluation.second[:, axis], rtol=1e-5, atol=1e-7)

    def test_wave_equation(self):
        """Away from the source G solves the homogeneous equation."""
        comparison = elastic_comparison()
        plane = greens.PlaneOperator(comparison)
        evaluation = greens.greens_evaluate([0.4, 0.2, -0.3], 1.0,
                                            comparison, derivatives=2)
        basis = np.eye(3)
        pairs = np.array([[plane.pair(basis[j], basis[l]) for l in range(3)]
                          for j in range(3)])
        spatial = np.einsum('jlab,jlbc->ac', pairs, evaluation.second)
        inertial = plane.mass.dot(evaluation.value)
        scale = max(np.linalg.norm(spatial), np.linalg.norm(inertial))
        self.assertLessEqual(np.linalg.norm(spatial + inertial), 1e-6 * scale)
        self.assertLessEqual(evaluation.asymmetry(), 1e-10)

    def test_singular_point(self):
        """G is not evaluated at the source."""
        with self.assertRaises(SingularityError):
            greens.greens_evaluate([0.0, 0.0, 1e-9], 1.0, coupled_comparison())
        with self.assertRaises(SingularityError):
            greens.static_greens(np.zeros(3), coupled_comparison())
        with self.assertRaises(ValidationError):
            greens.greens_evaluate([1.0, 0.0, 0.0], 1.0, coupled_comparison(),
                                   derivatives=3)

    def test_table(self):
        """One row per point and block entry."""
        rows = greens.greens_table([[1.0, 0.0, 0.0], [0.0, 0.0, 2.0]], 1.0,
                                   ComparisonMedium.scalar(1.0, 1.0), order=8)
        self.assertEqual(len(rows), 8)
        self.assertEqual(rows[0][:5], (1.0, 0.0, 0.0, 0, 0))
        self.assertAlmostEqual(rows[0][5], np.exp(-1) / (4 * np.pi))
        self.assertEqual(rows[-1][3:5], (1, 1))


class TestBranches(unittest.TestCase):
    """Test plane-wave branches and their one-dimensional profiles."""

    def test_isotropic_speeds(self):
        """Pressure and shear branches of both blocks."""
        comparison = elastic_comparison()
        branches = greens.branch_eigen([0.0, 0.0, 1.0], comparison)
        testing.assert_allclose([b.squared_speed for b in branches],
                                [-4.0, -1.0, -1.0, -1.0, -0.5, -0.5],
                                atol=1e-12)
        plane = greens.PlaneOperator(comparison)
        matrix = plane.matrix([0.0, 0.0, 1.0])
        for branch in branches:
            self.assertGreater(branch.speed.imag, 0.0)
            self.assertAlmostEqual(branch.normalization, 1.0)
            testing.assert_allclose(
                matrix.dot(branch.vector),
                branch.squared_speed * plane.mass.dot(branch.vector),
                atol=1e-10)
        self.assertAlmostEqual(branches[0].decay_length(1.0), 2.0)

    def test_complex_speeds(self):
        """Coupled blocks give a conjugate pair sorted by Im c^2."""
        branches = greens.branch_eigen([0.6, 0.0, 0.8], coupled_comparison())
        root = (-1 + 0.5j) / (1 + 0.2j)
        testing.assert_allclose([b.squared_speed for b in branches],
                                [np.conj(root), root], rtol=1e-10)

    def test_direction_must_be_unit(self):
        """Directions are unit 3-vectors."""
        with self.assertRaises(ValidationError):
            greens.branch_eigen([1.0, 1.0, 0.0], coupled_comparison())

    def test_undamped_medium(self):
        """A real positive c^2 has no decaying profile."""
        medium = mock.Mock(d1=np.zeros((3, 3)), d2=np.eye(3), d3=np.eye(3),
                           q1=np.zeros((1, 1)), q2=np.eye(1), q3=-np.eye(1))
        with self.assertRaises(ValidationError):
            greens.branch_eigen([1.0, 0.0, 0.0], medium)

    def test_profile(self):
        """The profile decays and meets the jump condition."""
        branch = greens.EigenBranch([0.0, 0.0, 1.0], 0, 1j, [1.0],
                                    -np.eye(1))
        self.assertAlmostEqual(greens.plane_wave_profile(branch, 0.0, 1.0,
                                                         1.0), -0.5)
        self.assertAlmostEqual(branch.decay_length(1.0), 1.0)
        complex_branch = greens.branch_eigen([1.0, 0.0, 0.0],
                                             coupled_comparison())[1]
        speed, omega, load = complex_branch.speed, 1.5, 0.7 - 0.2j

        def profile(s):
            return greens.plane_wave_profile(complex_branch, s, omega, load)

        step = 1e-7
        jump = (2 * profile(step) - 2 * profile(0.0)) / step
        self.assertLess(abs(speed ** 2 * jump + load), 1e-5 * abs(load))
        step = 1e-3
        curvature = (profile(1 + step) - 2 * profile(1.0) +
                     profile(1 - step)) / step ** 2
        self.assertLess(abs(speed ** 2 * curvature + omega ** 2 * profile(1)),
                        1e-5 * abs(omega ** 2 * profile(1)))
        self.assertLess(abs(profile(5.0)), abs(profile(0.0)))

    def test_profile_needs_decay(self):
        """Im c must be positive."""
        branch = greens.EigenBranch([0.0, 0.0, 1.0], 0, 1.0, [1.0],
                                    np.eye(1))
        with self.assertRaises(ValidationError):
            greens.plane_wave_profile(branch, 1.0, 1.0, 1.0)


class TestQuadrature(unittest.TestCase):
    """Test sphere rules and strain maps."""

    def test_hemisphere(self):
        """Full-sphere weights of unit directions around the axis."""
        rule = greens.SphereRule(8)
        axis = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
        directions, cosines, weights = rule.hemisphere(axis)
        self.assertAlmostEqual(weights.sum(), 4 * np.pi)
        testing.assert_allclose(np.linalg.norm(directions, axis=1), 1.0)
        testing.assert_allclose(directions.dot(axis), cosines)
        self.assertTrue(np.all(cosines > 0.0))
        self.assertEqual(rule.order, (8, 16))
        self.assertEqual(rule.doubled().order, (16, 32))

    def test_great_circle(self):
        """Circle directions are orthogonal to the axis."""
        directions, weights = greens.SphereRule(4).great_circle([0, 0, 1])
        testing.assert_allclose(directions[:, 2], 0.0, atol=1e-15)
        self.assertAlmostEqual(weights.sum(), 2 * np.pi)

    def test_invalid_orders(self):
        """Polar orders are even; other orders are at least three."""
        with self.assertRaises(ValidationError):
            greens.SphereRule(7)
        with self.assertRaises(ValidationError):
            greens.SphereRule(8, azimuth_order=2)

    def test_strain_map(self):
        """Mandel strains of a shear and the scalar gradient."""
        gradient = np.zeros((3, 3))
        gradient[0, 1] = 1.0
        strain = np.einsum('mij,ij->m', greens.strain_map(6, 3), gradient)
        testing.assert_allclose(sorted(strain), [0, 0, 0, 0, 0, np.sqrt(0.5)],
                                atol=1e-15)
        testing.assert_array_equal(greens.strain_map(3, 1)[:, 0, :],
                                   np.eye(3))
        with self.assertRaises(ValidationError):
            greens.strain_map(4, 2)


class TestVoxelSources(unittest.TestCase):
    """Test fields and H0 of the infinite comparison medium."""

    def setUp(self):
        """Initialization before test."""
        self.comparison = coupled_comparison()
        self.grid = greens.VoxelGrid.box((2, 1, 1), 0.1)
        self.rng = np.random.RandomState(3)

    def test_grid(self):
        """Box grids and their validation."""
        grid = greens.VoxelGrid.box((2, 3, 1), 0.5, origin=(1.0, 0.0, 0.0))
        self.assertEqual(grid.count, 6)
        self.assertAlmostEqual(grid.volume, 0.125)
        testing.assert_allclose(grid.centers[-1], [1.5, 1.0, 0.0])
        with self.assertRaises(ValidationError):
            greens.VoxelGrid([[0.0, 0.0]], 1.0)
        with self.assertRaises(ValidationError):
            greens.VoxelGrid([[0.0, 0.0, 0.0]], 0.0)
        self.assertEqual(greens.polarization_size(self.comparison), 8)
        self.assertEqual(greens.polarization_size(elastic_comparison()), 18)

    def test_point_force(self):
        """A real force in one voxel drives -i g in its neighbour."""
        spacing = 0.25
        grid = greens.VoxelGrid([[0.0, 0.0, 0.0], [spacing, 0.0, 0.0]],
                                spacing)
        force = np.zeros((2, 1), dtype=complex)
        force[0, 0] = 1 / spacing ** 3
        field = greens.solve_infinite_medium(
            None, force, ComparisonMedium.scalar(1.0, 1.0), 1.0, grid)
        value, gradient, _ = surrogate_green([spacing, 0.0, 0.0])
        self.assertAlmostEqual(field.displacement[1, 0], -1j * value)
        testing.assert_allclose(field.strain[1], -1j * gradient, atol=1e-12)

    def test_no_sources(self):
        """Zero polarization and force give zero fields."""
        field = greens.solve_infinite_medium(None, None, self.comparison, 1.0,
                                             self.grid, order=8)
        self.assertFalse(np.any(field.displacement))
        self.assertFalse(np.any(field.increment))
        self.assertEqual(field.stress.shape, (2, 3))
        self.assertEqual(field.momentum.shape, (2, 1))

    def test_source_shapes(self):
        """Sources must cover every voxel."""
        with self.assertRaises(ValidationError):
            greens.solve_infinite_medium(np.zeros((2, 7)), None,
                                         self.comparison, 1.0, self.grid)
        with self.assertRaises(ValidationError):
            greens.solve_infinite_medium(None, np.zeros((3, 1)),
                                         self.comparison, 1.0, self.grid)

    def test_h0_matches_increment(self):
        """H0 T is minus the increment driven by T."""
        polarization = self.rng.standard_normal((2, 8))
        field = greens.solve_infinite_medium(polarization, None,
                                             self.comparison, 1.0, self.grid,
                                             order=8)
        applied = greens.apply_H0(polarization, self.comparison, 1.0,
                                  self.grid, order=8)
        testing.assert_allclose(applied, -field.increment, rtol=1e-10,
                                atol=1e-12 * np.abs(applied).max())

    def test_h0_symmetric(self):
        """H0 is symmetric for both kinds of comparison media."""
        h0 = greens.InfiniteH0(self.grid, self.comparison, 1.0, order=8)
        self.assertEqual(h0.matrix.shape, (16, 16))
        self.assertLessEqual(h0.asymmetry(), 1e-8)
        testing.assert_allclose(h0.weights, 1e-3)
        with self.assertLogs('minwave.greens', level='WARNING'):
            coarse = greens.InfiniteH0(greens.VoxelGrid.box((2, 1, 1), 0.25),
                                       elastic_comparison(), 1.0, order=8)
        self.assertLessEqual(coarse.asymmetry(), 1e-8)


if __name__ == '__main__':
    unittest.main()
