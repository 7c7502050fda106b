"""Tests the util functionality."""
import os
import logging
import unittest
from unittest import mock
import numpy as np
from numpy import testing
import voluptuous as vol
from minwave import util as util


class TestUtilFunctions(unittest.TestCase):
    """Test util functionality."""

    def test_string(self):
        """Tests string assertion."""
        self.assertEqual(util.string(1234), '1234')
        self.assertEqual(util.string(True), 'True')

    def test_invalid_string(self):
        """Tests string assertion with invalid value."""
        with self.assertRaises(vol.Invalid):
            util.string(None)

    def test_boolean(self):
        """Tests boolean assertion."""
        for bool_val in ['1', 'True', 'yes', 'ON', 'enable']:
            self.assertTrue(util.boolean(bool_val))
        for bool_val in ['0', 'false', 'NO', 'off', 'disable']:
            self.assertFalse(util.boolean(bool_val))

    def test_invalid_boolean(self):
        """Tests boolean assertion with invalid value."""
        with self.assertRaises(vol.Invalid):
            util.boolean('foobar')

    def test_ensure_list(self):
        """Scalars are wrapped, None is empty."""
        self.assertEqual(util.ensure_list('inclusion'), ['inclusion'])
        self.assertEqual(util.ensure_list(['a', 'b']), ['a', 'b'])
        self.assertEqual(util.ensure_list(None), [])

    def test_positive(self):
        """Strictly positive numbers only."""
        self.assertEqual(util.positive('2.5'), 2.5)
        for value in (0, -1.0, 'abc', None):
            with self.assertRaises(vol.Invalid):
                util.positive(value)

    def test_even_order(self):
        """Quadrature orders are even and at least two."""
        self.assertEqual(util.even_order('16'), 16)
        for value in (1, 7, 0, 'x'):
            with self.assertRaises(vol.Invalid):
                util.even_order(value)

    def test_logger_setup(self):
        """Tests logger setup."""
        logger = logging.getLogger('dummy_test')
        util.set_loggers(logger, file=None, level='dEbUg')
        util.set_loggers(logger, file=None, level='ERROR')
        with self.assertLogs('dummy_test', level='WARNING'):
            util.set_loggers(logger, file=None, level='chatty')


class TestComplexInput(unittest.TestCase):
    """Test coercion of configuration numbers."""

    def test_scalars_and_pairs(self):
        """Plain numbers are real, two-number lists are complex."""
        self.assertEqual(util.complex_array(2).item(), 2 + 0j)
        self.assertEqual(util.complex_array([1.0, -0.5]).item(), 1 - 0.5j)

    def test_matrix_of_pairs(self):
        """Nested pairs build a complex matrix."""
        matrix = util.complex_array([[[1, 1], 0], [0, [2, -1]]])
        testing.assert_array_equal(matrix, [[1 + 1j, 0], [0, 2 - 1j]])

    def test_malformed(self):
        """Booleans, strings and deep nesting are rejected."""
        for value in (True, 'soft', [[[[1, 2], [3, 4]]]], []):
            with self.assertRaises(vol.Invalid):
                util.complex_array(value)

    def test_real_array(self):
        """Real matrices pass, text does not."""
        testing.assert_array_equal(util.real_array([[1, 0], [0, 1]]),
                                   np.eye(2))
        with self.assertRaises(vol.Invalid):
            util.real_array('abc')

    def test_as_matrix(self):
        """Scalars expand to multiples of the identity."""
        testing.assert_array_equal(util.as_matrix(2.0, 3), 2.0 * np.eye(3))
        self.assertEqual(util.as_matrix([[1, 2], [3, 4]]).shape, (2, 2))
        self.assertEqual(util.as_matrix(1 + 1j, 2).dtype, complex)


class TestThreadCount(unittest.TestCase):
    """Test the worker count taken from the environment."""

    def test_default(self):
        """No variable means a single worker."""
        with mock.patch.dict(os.environ, {}, clear=True):
            self.assertEqual(util.thread_count(), 1)

    def test_from_environment(self):
        """Counts are read and clamped to at least one."""
        with mock.patch.dict(os.environ, {'MINWAVE_THREADS': '4'}):
            self.assertEqual(util.thread_count(), 4)
        with mock.patch.dict(os.environ, {'MINWAVE_THREADS': '-2'}):
            self.assertEqual(util.thread_count(), 1)

    def test_invalid(self):
        """Non-integers are ignored with a warning."""
        with mock.patch.dict(os.environ, {'MINWAVE_THREADS': 'many'}):
            with self.assertLogs('minwave.util', level='WARNING'):
                self.assertEqual(util.thread_count(), 1)


if __name__ == '__main__':
    unittest.main()
