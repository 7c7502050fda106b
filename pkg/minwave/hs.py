"""Polarization fields and the Hashin-Shtrikman form of the principle."""
import logging
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from minwave.const import HS_MARGIN
from minwave.exceptions import (ValidationError, SingularityError,
                                ConvergenceError)
from minwave.fields import MediumOperator, FieldState, DualState, BoundarySpec
from minwave.functional import evaluate_functional
from minwave.moduli import CGBlock, OperatorL
from minwave.solver import (full_parametrization, minimize_cg,
                            conjugate_gradient, normal_system, SolveOptions)

LOGGER = logging.getLogger(__name__)

MINIMUM = 'minimum_principle'
SADDLE = 'saddle_principle'
INDEFINITE = 'indefinite'


class Polarization(DualState):
    """Polarization T laid out like a field quadruple."""

    @classmethod
    def zeros(cls, layout):
        """Zero polarization."""
        return cls(layout, np.zeros(layout.size))

    @classmethod
    def random(cls, layout, seed=None):
        """Standard normal polarization."""
        return cls(layout, np.random.RandomState(seed).standard_normal(
            layout.size))


def _spd(matrix):
    """True when a symmetric matrix is positive definite."""
    try:
        np.linalg.cholesky(0.5 * (matrix + matrix.T))
    except np.linalg.LinAlgError:
        return False
    return True


class ComparisonMedium(object):
    """Homogeneous comparison operator L0 with its D/Q block parameters.

    The first block of L0 is [[D2 + D1 D3^-1 D1^T, -D1 D3^-1],
    [-D3^-1 D1^T, D3^-1]] and the second [[-Q2 - Q1 Q3^-1 Q1^T,
    Q1 Q3^-1], [Q3^-1 Q1^T, -Q3^-1]].
    """

    def __init__(self, block_a, block_b):
        """Split both blocks into D and Q parameters."""
        if not (block_a.is_positive_definite() and
                block_b.is_positive_definite()):
            raise ValidationError("comparison blocks must be positive definite")
        self.block_a = block_a
        self.block_b = block_b
        a, b, d = block_a.a, block_a.b, block_a.d
        self.d3 = np.linalg.inv(d)
        self.d1 = -b.dot(self.d3)
        self.d2 = a - self.d1.dot(d).dot(self.d1.T)
        p_a, p_b, p_d = block_b.a, block_b.b, block_b.d
        self.q3 = -np.linalg.inv(p_d)
        self.q1 = p_b.dot(self.q3)
        self.q2 = -p_a - self.q1.dot(np.linalg.inv(self.q3)).dot(self.q1.T)
        self.d2 = 0.5 * (self.d2 + self.d2.T)
        self.q2 = 0.5 * (self.q2 + self.q2.T)

    @classmethod
    def from_operator(cls, operator):
        """From a pointwise OperatorL."""
        return cls(operator.block_a, operator.block_b)

    @classmethod
    def from_dq(cls, d1, d2, d3, q1, q2, q3):
        """From D and Q parameters."""
        d1, d2, d3, q1, q2, q3 = (np.atleast_2d(np.asarray(m, dtype=float))
                                  for m in (d1, d2, d3, q1, q2, q3))
        for name, matrix in (('D2', d2), ('D3', d3), ('-Q2', -q2),
                             ('-Q3', -q3)):
            if not _spd(matrix):
                raise ValidationError("{} must be positive definite".format(
                    name))
        d3_inv, q3_inv = np.linalg.inv(d3), np.linalg.inv(q3)
        block_a = CGBlock(d2 + d1.dot(d3_inv).dot(d1.T), -d1.dot(d3_inv),
                          d3_inv)
        block_b = CGBlock(-q2 - q1.dot(q3_inv).dot(q1.T), q1.dot(q3_inv),
                          -q3_inv)
        return cls(block_a, block_b)

    @classmethod
    def scalar(cls, d, q, strain_size=3, size=1):
        """Decoupled isotropic surrogate with D2 = D3 = d I, -Q2 = -Q3 = q I."""
        return cls.from_dq(np.zeros((strain_size, strain_size)),
                           d * np.eye(strain_size), d * np.eye(strain_size),
                           np.zeros((size, size)), -q * np.eye(size),
                           -q * np.eye(size))

    @property
    def operator(self):
        """Pointwise L0."""
        return OperatorL(self.block_a, self.block_b)

    def reconstruct(self):
        """L0 rebuilt from the D/Q parameters."""
        return ComparisonMedium.from_dq(self.d1, self.d2, self.d3, self.q1,
                                        self.q2, self.q3).operator

    def medium_operator(self, layout):
        """L0 spread over every entity of a layout."""
        return MediumOperator.uniform(layout, self.operator)

    def scaled(self, factor):
        """Comparison medium with both blocks multiplied by factor."""
        return _scaled(self.block_a, self.block_b, factor)


def _scaled(block_a, block_b, factor):
    """Comparison medium from two blocks times a factor."""
    return ComparisonMedium(
        CGBlock(factor * block_a.a, factor * block_a.b, factor * block_a.d),
        CGBlock(factor * block_b.a, factor * block_b.b, factor * block_b.d))


def _as_medium(operator, layout):
    """MediumOperator for a pointwise or per-entity L."""
    if isinstance(operator, OperatorL):
        return MediumOperator.uniform(layout, operator)
    return operator


def difference(operator, comparison, layout):
    """L - L0 per entity; rejects nearly singular entities."""
    diff = _as_medium(operator, layout) - comparison.medium_operator(layout)
    for block, name in ((diff.first, layout.block_kind(1)),
                        (diff.second, layout.block_kind(2))):
        values = np.linalg.eigvalsh(block)
        scale = np.maximum(np.abs(values).max(axis=1), 1e-300)
        margin = np.abs(values).min(axis=1) / scale
        bad = np.flatnonzero(margin < HS_MARGIN)
        if bad.size:
            raise SingularityError(
                "L - L0 is singular on {} entities {}".format(
                    name, bad[:10].tolist()))
    return diff


def exact_polarization(field, operator, comparison):
    """T = (L - L0) F."""
    layout = field.layout
    diff = difference(operator, comparison, layout)
    return Polarization(layout, diff.apply(field.values))


def evaluate_hs(field, polarization, operator, comparison, source):
    """Hashin-Shtrikman functional of a field and a polarization."""
    layout = field.layout
    diff = difference(operator, comparison, layout)
    l0 = comparison.medium_operator(layout)
    t, f = polarization.values, field.values
    integrand = ((t - source.values) * f + 0.5 * f * l0.apply(f) -
                 0.5 * t * diff.solve(t))
    return float(np.sum(layout.weights * integrand))


def classify_bound(operator, comparison, layout=None):
    """Which principle L0 gives: minimum, saddle or neither."""
    if isinstance(operator, OperatorL):
        blocks = [operator.matrix - comparison.operator.matrix]
    else:
        diff = operator - comparison.medium_operator(layout or operator.layout)
        blocks = list(diff.first) + list(diff.second)
    if all(_spd(-block) for block in blocks):
        return MINIMUM
    if all(_spd(block) for block in blocks):
        return SADDLE
    return INDEFINITE


def _require_full(problem):
    """HS machinery needs both blocks of L."""
    if problem.lossless:
        raise ValidationError("polarization methods need the full "
                              "formulation, not the lossless reduction")


def minimize_hs(problem, polarization, comparison, options=None):
    """Minimize the HS functional over admissible F at fixed T.

    Returns (FieldState, value).
    """
    _require_full(problem)
    l0 = comparison.medium_operator(problem.layout)
    field, _ = minimize_cg(problem, options, operator=l0,
                           data=problem.source.values - polarization.values)
    value = evaluate_hs(field, polarization, problem.operator, comparison,
                        problem.source)
    return field, value


class DiscreteH0(object):
    """Response operator of the comparison medium on a bounded mesh.

    ``apply(T)`` returns H0 T, where -H0 T is the admissible field with
    homogeneous data that minimizes the comparison functional loaded by -T.
    """

    def __init__(self, problem, comparison):
        """Factorize the comparison problem with homogeneous data."""
        _require_full(problem)
        layout = problem.layout
        self.layout = layout
        self.problem = problem
        self.comparison = comparison
        self.operator = comparison.medium_operator(layout)
        spec = problem.spec
        homogeneous = BoundarySpec(
            spec.primal_essential, spec.trace_essential,
            np.zeros(layout.n_trace), np.zeros(layout.n_trace),
            np.zeros(layout.n_trace), np.zeros(layout.n_trace))
        self.param = full_parametrization(layout, homogeneous,
                                          np.zeros(layout.source_size))
        hessian, _, _ = normal_system(problem, self.param, self.operator,
                                      np.zeros(layout.size))
        if self.param.size:
            self._lu = spla.splu(sp.csc_matrix(hessian))
        else:
            self._lu = None

    @property
    def weights(self):
        """Quadrature weights of the layout."""
        return self.layout.weights

    def apply(self, values):
        """H0 T."""
        values = getattr(values, 'values', values)
        if self._lu is None:
            return np.zeros(self.layout.size)
        load = self.param.matrix.T.dot(self.layout.weights * values)
        return self.param.matrix.dot(self._lu.solve(load))

    def matrix(self):
        """Dense H0."""
        return np.column_stack([self.apply(column) for column in
                                np.eye(self.layout.size)])

    def comparison_field(self, options=None):
        """Minimizer F0 of the comparison problem with the true data."""
        field, _ = minimize_cg(self.problem, options or SolveOptions(),
                               operator=self.operator)
        return field


class CondensedResult(object):
    """Polarization-only problem: value and stationarity residual."""

    def __init__(self, polarization, value, residual, field=None):
        """Store outcome."""
        self.polarization = polarization
        self.value = value
        self.residual = residual
        self.field = field

    @property
    def residual_norm(self):
        """Euclidean norm of the stationarity residual."""
        return float(np.linalg.norm(self.residual))


def condense_and_solve(polarization, base, h0, operator, comparison, source,
                       solve=None, tolerance=1e-12, max_iterations=2000):
    """Evaluate, and optionally solve, the condensed polarization problem.

    With K = (L - L0)^-1 + H0 the value is J0(F0) + <T, F0> - <T, K T>/2 and
    the stationarity residual is K T - F0. ``solve`` is None, 'dense', 'cg'
    or 'minres'.
    """
    layout = base.layout
    diff = difference(operator, comparison, layout)
    weights = layout.weights

    def condensed(values):
        """K T."""
        return diff.solve(values) + h0.apply(values)

    t = polarization.values
    if solve is not None:
        t = _solve_condensed(condensed, base.values, weights, solve,
                             tolerance, max_iterations, layout.size)
        polarization = Polarization(layout, t)
    kt = condensed(t)
    baseline = evaluate_functional(
        base, comparison.medium_operator(layout), source).total
    value = baseline + float(np.sum(weights * (t * base.values - 0.5 * t * kt)))
    field = FieldState(layout, base.values - h0.apply(t))
    return CondensedResult(polarization, value, kt - base.values, field)


def _solve_condensed(condensed, target, weights, method, tolerance,
                     max_iterations, size):
    """Solve W K T = W F0 for T."""
    def weighted(values):
        """W K T."""
        return weights * condensed(values)

    rhs = weights * target
    if method == 'dense':
        matrix = np.column_stack([weighted(c) for c in np.eye(size)])
        matrix = 0.5 * (matrix + matrix.T)
        try:
            return sla.solve(matrix, rhs, assume_a='sym')
        except np.linalg.LinAlgError as err:
            raise SingularityError("condensed operator is singular: {}".format(
                err))
    if method == 'cg':
        curvature = rhs.dot(weighted(rhs))
        if curvature <= 0:
            raise SingularityError(
                "condensed operator is not positive definite (curvature "
                "{:.3g}); use 'minres' or 'dense'".format(curvature))
        try:
            result = conjugate_gradient(weighted, rhs, tolerance=tolerance,
                                        max_iterations=max_iterations)
        except ConvergenceError as err:
            raise SingularityError("{}; use 'minres' or 'dense'".format(err))
        return result.x
    if method == 'minres':
        linear = spla.LinearOperator((size, size), matvec=weighted,
                                     dtype=float)
        solution, info = spla.minres(linear, rhs, rtol=tolerance,
                                     maxiter=max_iterations)
        if info != 0:
            LOGGER.warning("MINRES stopped with status %d", info)
        return solution
    raise ValidationError("unknown condensed solver '{}'".format(method))


def region_comparison(problem, factor=2.0, region=None):
    """Comparison medium factor times the blocks of one region."""
    _require_full(problem)
    names = problem.layout.mesh.region_names
    region = names[0] if region is None else region
    if region not in names:
        raise ValidationError("unknown reference region '{}'".format(region))
    return _scaled(*problem.medium.region_blocks(region), factor=factor)
