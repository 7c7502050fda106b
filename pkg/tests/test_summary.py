"""Tests the summary record."""
import unittest
from unittest import mock
import numpy as np
from minwave import summary as summary
from minwave.const import __version__
from minwave.moduli import ComplexModuli


class TestPlain(unittest.TestCase):
    """Test conversion to json-friendly values."""

    def test_complex_and_numpy(self):
        """Complex numbers become pairs, numpy scalars plain numbers."""
        value = summary.plain({
            'value': 1 - 2j,
            'array': np.array([1.5, 2.5]),
            'count': np.int64(3),
            'flag': np.bool_(True),
            'nested': (np.complex128(0.5j), 'text'),
            4: None
        })
        self.assertEqual(value, {'value': [1.0, -2.0], 'array': [1.5, 2.5],
                                 'count': 3, 'flag': True,
                                 'nested': [[0.0, 0.5], 'text'], '4': None})
        self.assertIs(type(value['count']), int)
        self.assertIs(type(value['flag']), bool)


class TestSummaryRecord(unittest.TestCase):
    """Test the SummaryRecord class."""

    def setUp(self):
        """Initialization before test."""
        self.config = {'run_id': 'rod', 'units': 'SI', 'physics': 'elastic',
                       'frequency': 2.0}

    def test_record(self):
        """The record is keyed by run id."""
        record = summary.SummaryRecord(self.config, 'solve')
        record.add('rotation', 0.0)
        record.add_artifact('/tmp/rod_solve_fields.csv')
        body = record.record['rod']
        self.assertEqual(body['command'], 'solve')
        self.assertEqual(body['version'], __version__)
        self.assertEqual(body['physics'], 'elastic')
        self.assertEqual(body['artifacts'], ['/tmp/rod_solve_fields.csv'])
        self.assertEqual(body['rotation'], 0.0)

    def test_missing_physics(self):
        """greens-table runs need no physics."""
        record = summary.SummaryRecord({'run_id': 'g', 'units': 'SI'},
                                       'greens-table')
        self.assertIsNone(record.record['g']['physics'])

    def test_solver_entry(self):
        """Timings are dropped."""
        report = mock.Mock()
        report.as_dict.return_value = {'iterations': 4, 'wall_time': 0.3}
        self.assertEqual(summary.solver_entry(report), {'iterations': 4})

    def test_passivity_entry(self):
        """Every region reports both tensors."""
        medium = mock.Mock(moduli=[
            ComplexModuli.elastic(1 + 0.5j, 1 - 0.2j, 2.0, region='matrix'),
            ComplexModuli.elastic(1 + 0.5j, 1.0, 2.0, region='inclusion')])
        entry = summary.passivity_entry(medium)
        self.assertEqual(entry['matrix']['stiffness']['status'], 'strict')
        self.assertEqual(entry['matrix']['density']['status'], 'strict')
        self.assertEqual(entry['inclusion']['density']['status'],
                         'semidefinite')
        self.assertAlmostEqual(entry['matrix']['stiffness']['min_eigenvalue'],
                               0.5)

    def test_dissipation_entry(self):
        """Balance error is relative to the larger power."""
        dissipation = mock.Mock(stiffness_part=1.0, inertial_part=2.0,
                                mean_power=3.0)
        entry = summary.dissipation_entry(dissipation, 2.0)
        self.assertAlmostEqual(entry['balance_error'], 1.0 / 3.0)
        self.assertEqual(entry['boundary_power'], 2.0)


if __name__ == '__main__':
    unittest.main()
