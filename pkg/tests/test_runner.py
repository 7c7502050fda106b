"""Tests the subcommands end to end on small configurations."""
import os
import csv
import json
import tempfile
import unittest
import numpy as np
from minwave import runner as runner
from minwave.const import EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE
from minwave.exceptions import ValidationError
from minwave.hs import MINIMUM
from minwave.yaml import validate


def rod_config(**extra):
    """Validated elastic rod driven on the left."""
    config = {
        'run_id': 'rod',
        'physics': 'elastic',
        'frequency': 2.0,
        'geometry': {'interval': [0.0, 1.0], 'cells': 20},
        'regions': [{'name': 'default', 'stiffness': [1.0, 0.5],
                     'density': [1.0, -0.2]}],
        'boundary': {'left': {'type': 'dirichlet', 'value': 1.0},
                     'right': {'type': 'neumann', 'value': [0.5, -0.25]}},
        'solver': {'tolerance': 1e-12, 'max_iterations': 5000}
    }
    config.update(extra)
    return validate(config)


class TestRunner(unittest.TestCase):
    """Test the run function for every subcommand."""

    def setUp(self):
        """Initialization before test."""
        self.scratch = tempfile.TemporaryDirectory()
        self.overrides = {'out_dir': self.scratch.name}

    def tearDown(self):
        """Tears down setup after test."""
        self.scratch.cleanup()

    def summary(self, command, run_id='rod'):
        """Body of the summary record written by a run."""
        path = os.path.join(self.scratch.name, '{}_{}_summary.json'.format(
            run_id, command.replace('-', '_')))
        with open(path) as handle:
            return json.load(handle)[run_id]

    def test_solve(self):
        """CG fields, history and energy entries."""
        code = runner.run(rod_config(), 'solve', self.overrides)
        self.assertEqual(code, EXIT_OK)
        body = self.summary('solve')
        self.assertTrue(body['solver']['converged'])
        self.assertNotIn('wall_time', body['solver'])
        self.assertLess(body['functional']['identity_error'], 1e-6)
        self.assertLess(body['dissipation']['balance_error'], 1e-6)
        self.assertGreater(body['dissipation']['mean_power'], 0.0)
        names = sorted(os.path.basename(p) for p in body['artifacts'])
        self.assertEqual(names, ['rod_solve_cells.csv', 'rod_solve_fields.csv',
                                 'rod_solve_history.csv',
                                 'rod_solve_nodes.csv'])

    def test_validate(self):
        """CG agrees with the direct solve."""
        code = runner.run(rod_config(), 'validate', self.overrides)
        self.assertEqual(code, EXIT_OK)
        body = self.summary('validate')
        self.assertLess(body['cross_validation']['nodal_error'], 1e-6)
        self.assertEqual(body['passivity']['default']['stiffness']['status'],
                         'strict')

    def test_lossless_validate(self):
        """A real density takes the reduced path."""
        config = rod_config(regions=[{'name': 'default',
                                      'stiffness': [1.0, 0.5],
                                      'density': 1.0}])
        self.assertEqual(runner.run(config, 'validate', self.overrides),
                         EXIT_OK)
        body = self.summary('validate')
        self.assertEqual(body['solver']['path'], 'reduced')
        self.assertNotIn('functional', body)

    def test_tomography(self):
        """Exact slack vanishes and random trials stay above the bound."""
        config = rod_config(tomography={'random_trials': 5},
                            solver={'seed': 2})
        self.assertEqual(runner.run(config, 'tomography', self.overrides),
                         EXIT_OK)
        body = self.summary('tomography')
        self.assertLess(abs(body['tomography']['exact_slack']), 1e-8)
        self.assertGreaterEqual(body['tomography']['min_relative_slack'],
                                -1e-10)
        self.assertEqual(body['tomography']['trials'], 6)

    def test_tomography_rejects_force(self):
        """The bound needs a force-free problem."""
        config = rod_config(source={'body_force': 1.0})
        self.assertEqual(runner.run(config, 'tomography', self.overrides),
                         EXIT_VALIDATION)

    def test_hs_bound(self):
        """A stiff comparison medium bounds the minimum from above."""
        config = rod_config(
            regions=[{'name': 'matrix', 'stiffness': [1.0, 0.5],
                      'density': [1.0, -0.2]},
                     {'name': 'inclusion', 'box': [[0.4, 0.7]],
                      'stiffness': [1.5, 0.4], 'density': [1.2, -0.1]}],
            hs={'scale': 5.0, 'reference_region': 'matrix',
                'random_trials': 3})
        self.assertEqual(runner.run(config, 'hs-bound', self.overrides),
                         EXIT_OK)
        entry = self.summary('hs-bound')['hs']
        self.assertEqual(entry['bound'], MINIMUM)
        self.assertLess(entry['exact_error'], 1e-9)
        self.assertGreaterEqual(entry['min_gap'],
                                -1e-8 * abs(entry['primal_value']))

    def test_hs_polarization_file(self):
        """The exported exact polarization reloads as a trial."""
        regions = [{'name': 'matrix', 'stiffness': [1.0, 0.5],
                    'density': [1.0, -0.2]},
                   {'name': 'inclusion', 'box': [[0.4, 0.7]],
                    'stiffness': [1.5, 0.4], 'density': [1.2, -0.1]}]
        config = rod_config(regions=regions, hs={'scale': 5.0,
                                                 'random_trials': 0})
        self.assertEqual(runner.run(config, 'hs-bound', self.overrides),
                         EXIT_OK)
        exported = os.path.join(self.scratch.name,
                                'rod_hs_bound_polarization.csv')
        self.assertIn(exported, self.summary('hs-bound')['artifacts'])
        config = rod_config(run_id='again', regions=regions, hs={
            'scale': 5.0, 'random_trials': 1, 'polarization': exported})
        self.assertEqual(runner.run(config, 'hs-bound', self.overrides),
                         EXIT_OK)
        entry = self.summary('hs-bound', 'again')['hs']
        self.assertEqual(entry['trials'], 2)
        with open(os.path.join(self.scratch.name,
                               'again_hs_bound_hs.csv')) as handle:
            rows = list(csv.DictReader(handle))
        self.assertEqual([row['trial'] for row in rows],
                         ['file', 'random_0'])
        self.assertLess(abs(float(rows[0]['gap'])),
                        1e-6 * abs(entry['primal_value']))

    def test_hs_polarization_file_mismatch(self):
        """A polarization table of another mesh is rejected."""
        path = os.path.join(self.scratch.name, 'short.csv')
        with open(path, 'w') as handle:
            handle.write('part,index,real,imag\ncell,0,1.0,0.0\n')
        config = rod_config(hs={'scale': 5.0, 'random_trials': 0,
                                'polarization': path})
        self.assertEqual(runner.run(config, 'hs-bound', self.overrides),
                         EXIT_VALIDATION)

    def test_greens_table(self):
        """One row per point and entry of the scalar surrogate."""
        config = validate({'run_id': 'g', 'frequency': 1.0, 'greens': {
            'medium': {'d': 1.0, 'q': 1.0},
            'points': [[1, 0, 0], [0, 0.5, 0]]}})
        overrides = dict(self.overrides, quadrature_order=8)
        self.assertEqual(runner.run(config, 'greens-table', overrides),
                         EXIT_OK)
        entry = self.summary('greens-table', 'g')['greens']
        self.assertEqual(entry, {'points': 2, 'quadrature_order': 8,
                                 'entries': 8})

    def test_convergence_failure(self):
        """Partial results are kept when CG stops early."""
        overrides = dict(self.overrides, max_iters=1)
        self.assertEqual(runner.run(rod_config(), 'solve', overrides),
                         EXIT_CONVERGENCE)
        body = self.summary('solve')
        self.assertFalse(body['solver']['converged'])

    def test_configuration_errors(self):
        """Missing sections and moduli are validation failures."""
        self.assertEqual(runner.run(validate({}), 'solve', self.overrides),
                         EXIT_VALIDATION)
        config = rod_config(regions=[{'name': 'default',
                                      'stiffness': [1.0, 0.5]}])
        self.assertEqual(runner.run(config, 'solve', self.overrides),
                         EXIT_VALIDATION)
        self.assertEqual(runner.run(rod_config(), 'plot', self.overrides),
                         EXIT_VALIDATION)


class TestBuilders(unittest.TestCase):
    """Test translation of configuration sections."""

    def test_overrides_copy(self):
        """Command-line values win without touching the original."""
        config = rod_config()
        updated = runner.apply_overrides(config, {'tolerance': 1e-6,
                                                  'seed': None})
        self.assertEqual(updated['solver']['tolerance'], 1e-6)
        self.assertEqual(config['solver']['tolerance'], 1e-12)
        self.assertIsNone(updated['solver']['seed'])

    def test_force_by_region(self):
        """Body forces act only in the selected regions."""
        config = rod_config(
            regions=[{'name': 'matrix', 'stiffness': [1.0, 0.5],
                      'density': [1.0, -0.2]},
                     {'name': 'inclusion', 'box': [[0.5, 1.0]],
                      'stiffness': [1.0, 0.5], 'density': [1.0, -0.2]}],
            source={'body_force': [2.0, 0.0], 'regions': 'inclusion'})
        problem, force = runner.build_problem(config)
        self.assertEqual(force.size, problem.layout.source_size)
        self.assertEqual(force[0], 0.0)
        self.assertNotEqual(force[-1], 0.0)

    def test_geometry_errors(self):
        """Intervals need a cell count, rectangles a pair."""
        with self.assertRaises(ValidationError):
            runner.build_mesh(rod_config(geometry={'interval': [0.0, 1.0],
                                                   'cells': [2, 2]}))
        with self.assertRaises(ValidationError):
            runner.build_mesh(rod_config(geometry={'rectangle': [1.0, 1.0],
                                                   'cells': 4}))
        with self.assertRaises(ValidationError):
            runner.build_mesh(rod_config(geometry={'nodes': 'n.csv'}))

    def test_custom_boundary(self):
        """Custom sides need both selections."""
        config = rod_config(boundary={'left': {
            'type': 'custom', 'primal': {'type': 'essential', 'value': 1.0}}})
        with self.assertRaises(ValidationError):
            runner.build_conditions(config)

    def test_full_comparison(self):
        """D/Q blocks build a comparison medium."""
        blocks = {'d1': np.zeros((3, 3)).tolist(), 'd2': np.eye(3).tolist(),
                  'd3': np.eye(3).tolist(), 'q1': [[0.0]], 'q2': [[-1.0]],
                  'q3': [[-2.0]]}
        config = validate({'greens': {'medium': blocks,
                                      'points': [[1, 0, 0]]}})
        comparison = runner.build_comparison(config)
        self.assertAlmostEqual(comparison.q3[0, 0], -2.0)


if __name__ == '__main__':
    unittest.main()
