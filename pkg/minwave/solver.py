"""Conjugate-gradient minimization and the direct complex oracle."""
import logging
import time
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from minwave.const import (ELASTIC, ACOUSTIC, PRECOND_NONE, PRECOND_JACOBI)
from minwave.exceptions import (ValidationError, ConvergenceError,
                                SingularityError)
from minwave.fields import (Layout, Medium, BoundarySpec, ComplexFields,
                            FieldState, build_source_data, apply_constitutive,
                            block_diagonal)
from minwave.functional import (evaluate_functional, minimum_value_surface,
                                SurfaceData)

LOGGER = logging.getLogger(__name__)

LOG_EVERY = 50


class SolveOptions(object):
    """Stopping rule, preconditioner and start of a CG run."""

    def __init__(self, max_iterations=1000, tolerance=1e-10,
                 preconditioner=PRECOND_JACOBI, seed=None,
                 random_start=False):
        """Validate options."""
        if int(max_iterations) < 1:
            raise ValidationError("max_iterations must be at least 1")
        if not 0 < tolerance < 1:
            raise ValidationError("tolerance must lie in (0, 1)")
        if preconditioner not in (PRECOND_NONE, PRECOND_JACOBI):
            raise ValidationError("unknown preconditioner '{}'".format(
                preconditioner))
        self.max_iterations = int(max_iterations)
        self.tolerance = float(tolerance)
        self.preconditioner = preconditioner
        self.seed = seed
        self.random_start = random_start


class SolveReport(object):
    """Outcome of a CG run."""

    def __init__(self, iterations, residual, value, wall_time, history,
                 converged=True, path='full'):
        """Store run statistics."""
        self.iterations = iterations
        self.residual = residual
        self.value = value
        self.wall_time = wall_time
        self.history = history
        self.converged = converged
        self.path = path

    def rows(self):
        """(iteration, residual, functional value) rows."""
        return [(i, r, v) for i, (r, v) in enumerate(self.history)]

    def as_dict(self):
        """Summary fields."""
        return {'iterations': self.iterations, 'residual': self.residual,
                'value': self.value, 'wall_time': self.wall_time,
                'converged': self.converged, 'path': self.path}


def _selection(size, index):
    """Sparse matrix placing len(index) values at index of a size vector."""
    index = np.asarray(index, dtype=int)
    return sp.csr_matrix((np.ones(index.size), (index, np.arange(index.size))),
                         shape=(size, index.size))


class Parametrization(object):
    """Affine map from free unknowns x to (a, b, tau) and to F."""

    def __init__(self, layout, parts, force_primal, groups, path):
        """Compose the maps; parts maps 'a', 'b', 't' to (matrix, offset)."""
        self.layout = layout
        self.parts = parts
        self.groups = groups
        self.path = path
        maps = layout.primal_map
        self.matrix = sp.csr_matrix(sum(
            maps[key].dot(parts[key][0]) for key in ('a', 'b', 't')))
        self.offset = (sum(maps[key].dot(parts[key][1])
                           for key in ('a', 'b', 't')) +
                       maps['f'].dot(force_primal))

    @property
    def size(self):
        """Number of free unknowns."""
        return self.matrix.shape[1]

    def unknowns(self, x):
        """Primary unknowns (a, b, tau)."""
        return tuple(self.parts[key][0].dot(x) + self.parts[key][1]
                     for key in ('a', 'b', 't'))

    def field(self, x):
        """Constraint-complete F."""
        nodal, cell, trace = self.unknowns(x)
        return FieldState(self.layout, self.matrix.dot(x) + self.offset,
                          nodal, cell, trace)


def _fixed_values(layout, spec):
    """Nodal field and traces holding the essential data, zero elsewhere."""
    nodal = np.zeros(layout.n_nodal)
    nodal[layout.trace_index[spec.primal_essential]] = \
        spec.primal_value[spec.primal_essential]
    trace = np.where(spec.trace_essential, spec.trace_value, 0.0)
    return nodal, trace


def _groups(counts):
    """Preconditioner groups for consecutive (entities, size) runs."""
    groups, start = [], 0
    for count, size in counts:
        if count:
            groups.append(start + np.arange(count * size).reshape(count, size))
        start += count * size
    return groups


def full_parametrization(layout, spec, force_primal):
    """Free nodal entries, all fluxes and free traces are unknown."""
    fixed_a = layout.trace_index[spec.primal_essential]
    free_a = np.setdiff1d(np.arange(layout.n_nodal), fixed_a)
    free_t = np.flatnonzero(~spec.trace_essential)
    n_a, n_b, n_t = free_a.size, layout.n_cell, free_t.size
    nodal, trace = _fixed_values(layout, spec)
    zeros = sp.csr_matrix
    parts = {
        'a': (sp.hstack([_selection(layout.n_nodal, free_a),
                         zeros((layout.n_nodal, n_b + n_t))]).tocsr(), nodal),
        'b': (sp.hstack([zeros((layout.n_cell, n_a)),
                         sp.identity(n_b, format='csr'),
                         zeros((layout.n_cell, n_t))]).tocsr(),
              np.zeros(layout.n_cell)),
        't': (sp.hstack([zeros((layout.n_trace, n_a + n_b)),
                         _selection(layout.n_trace, free_t)]).tocsr(), trace),
    }
    groups = _groups([(n_a, 1), (layout.mesh.n_cells, layout.cell_size),
                      (n_t, 1)])
    return Parametrization(layout, parts, force_primal, groups, 'full')


def _reduced_scalar(layout, spec, force_primal, reduced):
    """Acoustic and electromagnetic: cell fluxes follow the nodal field."""
    fixed_a = layout.trace_index[spec.primal_essential]
    free_a = np.setdiff1d(np.arange(layout.n_nodal), fixed_a)
    free_t = np.flatnonzero(~spec.trace_essential)
    n_a, n_t = free_a.size, free_t.size
    nodal, trace = _fixed_values(layout, spec)
    select_a = _selection(layout.n_nodal, free_a)
    elimination = block_diagonal(reduced.matrix)
    w = layout.omega
    if layout.physics == ACOUSTIC:
        coupling = elimination.dot(layout.gradient) / w
        offset = coupling.dot(nodal) - elimination.dot(force_primal) / w
    else:
        coupling = -elimination.dot(layout.gradient) / w
        offset = coupling.dot(nodal)
    zeros = sp.csr_matrix
    parts = {
        'a': (sp.hstack([select_a, zeros((layout.n_nodal, n_t))]).tocsr(),
              nodal),
        'b': (sp.hstack([coupling.dot(select_a),
                         zeros((layout.n_cell, n_t))]).tocsr(), offset),
        't': (sp.hstack([zeros((layout.n_trace, n_a)),
                         _selection(layout.n_trace, free_t)]).tocsr(), trace),
    }
    return Parametrization(layout, parts, force_primal,
                           _groups([(n_a, 1), (n_t, 1)]), 'reduced')


def _reduced_elastic(layout, spec, force_primal, reduced):
    """Elastic: displacement follows stress and traction through momentum."""
    if np.any(spec.primal_essential & spec.trace_essential):
        raise ValidationError("the reduced elastic path cannot fix both the "
                              "displacement and the traction of an entry")
    per_node = spec.primal_essential.reshape(-1, layout.nodal_size)
    if np.any(per_node.any(axis=1) != per_node.all(axis=1)):
        raise ValidationError("the reduced elastic path needs every component "
                              "of a boundary node to share one selection")
    w = layout.omega
    fixed = np.flatnonzero(spec.primal_essential)
    free_t = np.flatnonzero(~spec.primal_essential & ~spec.trace_essential)
    n_b, n_t = layout.n_cell, free_t.size
    nodal_fixed, trace = _fixed_values(layout, spec)
    rows = layout.trace_index[fixed]
    ratio = sp.diags(layout.node_w[rows] / layout.surface_w[fixed])
    density = block_diagonal(reduced.dual_real)
    momentum = -w ** 2 * density.dot(nodal_fixed)[rows] - force_primal[rows]
    place = _selection(layout.n_trace, fixed)
    trace_b = -place.dot(ratio.dot(layout.div_b[rows]))
    trace_map = sp.hstack([trace_b, _selection(layout.n_trace, free_t)])
    trace_offset = trace + place.dot(ratio.dot(momentum))
    flux_map = sp.hstack([sp.identity(n_b, format='csr'),
                          sp.csr_matrix((n_b, n_t))])
    elimination = block_diagonal(reduced.matrix)
    nodal_map = -elimination.dot(layout.div_b.dot(flux_map) +
                                 layout.div_t.dot(trace_map)) / w
    nodal_offset = -elimination.dot(layout.div_t.dot(trace_offset) +
                                    force_primal) / w
    parts = {'a': (sp.csr_matrix(nodal_map), nodal_offset),
             'b': (flux_map.tocsr(), np.zeros(n_b)),
             't': (trace_map.tocsr(), trace_offset)}
    groups = _groups([(layout.mesh.n_cells, layout.cell_size), (n_t, 1)])
    return Parametrization(layout, parts, force_primal, groups, 'reduced')


def reduced_parametrization(layout, spec, force_primal, reduced):
    """Parametrization with the dual-block unknown eliminated pointwise."""
    if layout.physics == ELASTIC:
        return _reduced_elastic(layout, spec, force_primal, reduced)
    return _reduced_scalar(layout, spec, force_primal, reduced)


class Problem(object):
    """Mesh, medium, data and boundary selections of one solve."""

    def __init__(self, layout, medium, source, conditions=None, theta=0.0,
                 lossless=False):
        """Store the parts; the operator is built on first use."""
        self.layout = layout
        self.medium = medium
        self.source = source
        self.conditions = conditions
        self.theta = float(theta)
        self.lossless = lossless
        self._operator = None

    @classmethod
    def build(cls, physics, mesh, frequency, regions, conditions=(),
              force=None, bc=None, lossless=False, rotation=None):
        """Assemble a problem; rotation is None, a phase or 'auto'."""
        layout = Layout(physics, mesh, frequency)
        medium = Medium(layout, regions)
        conditions = list(conditions or [])
        spec = bc if bc is not None else BoundarySpec.from_conditions(
            layout, conditions)
        source = build_source_data(layout, force, spec)
        problem = cls(layout, medium, source,
                      None if bc is not None else conditions,
                      lossless=lossless)
        if rotation == 'auto':
            theta, margin = medium.choose_rotation()
            LOGGER.info("Rotating by %.4f rad (passivity margin %.3g)",
                        theta, margin)
            return problem.rotated(theta)
        if rotation:
            return problem.rotated(float(rotation))
        return problem

    @property
    def spec(self):
        """Boundary selections."""
        return self.source.spec

    @property
    def operator(self):
        """Positive-definite L (second block dropped on the reduced path)."""
        if self._operator is None:
            if self.lossless:
                self._operator = self.medium.reduced_operator()
            else:
                self._operator = self.medium.operator()
        return self._operator

    def rotated(self, theta):
        """Same physical problem with moduli and flux data turned by theta."""
        if self.conditions is None:
            raise ValidationError("only problems built from boundary "
                                  "conditions can be rotated")
        layout = self.layout
        conditions = [c.rotated(theta) for c in self.conditions]
        spec = BoundarySpec.from_conditions(layout, conditions)
        force = self.source.force
        if layout.physics != ACOUSTIC:
            force = force * np.exp(1j * theta)
        source = build_source_data(layout, force, spec)
        return Problem(layout, self.medium.rotated(theta), source, conditions,
                       self.theta + theta, self.lossless)

    def parametrization(self):
        """Free-unknown parametrization of the admissible fields."""
        force = self.source.primal_force
        if self.lossless:
            return reduced_parametrization(self.layout, self.spec, force,
                                           self.medium.reduced_form())
        return full_parametrization(self.layout, self.spec, force)

    def dual(self, field):
        """Dual unknowns (nodal, cell, trace) of a minimizer."""
        values = apply_constitutive(field, self.operator).values
        force = self.source.dual_force
        if self.lossless:
            return self.layout.lossless_dual_unknowns(
                values, force, self.medium.reduced_form(), self.spec)
        return self.layout.dual_unknowns(values, force)

    def complex_fields(self, field):
        """Physical complex fields of a minimizer, rotation undone."""
        primal = (field.nodal, field.cell, field.trace)
        fields = self.layout.to_complex(primal, self.dual(field))
        return fields.rotated(-self.theta)

    def field_from_complex(self, fields):
        """Constraint-complete F of physical complex fields."""
        primal, _ = self.layout.from_complex(fields.rotated(self.theta))
        values = self.layout.primal_values(primal[0], primal[1], primal[2],
                                           self.source.primal_force)
        return FieldState(self.layout, values, *primal)


def block_jacobi(matrix, groups):
    """Inverse diagonal blocks of a sparse matrix over index groups."""
    matrix = sp.csr_matrix(matrix)
    inverses = []
    for index in groups:
        count, size = index.shape
        blocks = np.zeros((count, size, size))
        for i in range(size):
            for j in range(size):
                blocks[:, i, j] = np.asarray(
                    matrix[index[:, i], index[:, j]]).ravel()
        inverses.append(np.linalg.inv(blocks))

    def apply(residual):
        """Preconditioned residual."""
        result = residual.copy()
        for index, inverse in zip(groups, inverses):
            result[index] = np.einsum('nij,nj->ni', inverse, residual[index])
        return result
    return apply


def _as_apply(matrix):
    """Matrix-vector product of a matrix, operator or callable."""
    if callable(matrix):
        return matrix
    return matrix.dot


class CGResult(object):
    """Iterate and history of a conjugate-gradient run."""

    def __init__(self, x, iterations, residuals, values, converged):
        """Store outcome."""
        self.x = x
        self.iterations = iterations
        self.residuals = residuals
        self.values = values
        self.converged = converged


def conjugate_gradient(matrix, rhs, x0=None, tolerance=1e-10,
                       max_iterations=1000, preconditioner=None):
    """Preconditioned CG for a symmetric positive-definite system.

    Stops when |rhs - A x| <= tolerance |rhs|. The energy ``x.Ax/2 - rhs.x``
    is recorded every step.
    """
    apply = _as_apply(matrix)
    precondition = preconditioner or (lambda r: r.copy())
    rhs = np.asarray(rhs, dtype=float)
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    residual = rhs - apply(x)
    norm_rhs = np.linalg.norm(rhs)
    if norm_rhs == 0:
        return CGResult(np.zeros_like(rhs), 0, [0.0], [0.0], True)
    residuals = [np.linalg.norm(residual) / norm_rhs]
    values = [-0.5 * x.dot(rhs + residual)]
    if residuals[-1] <= tolerance:
        return CGResult(x, 0, residuals, values, True)
    z = precondition(residual)
    direction = z.copy()
    rz = residual.dot(z)
    for iteration in range(1, max_iterations + 1):
        product = apply(direction)
        curvature = direction.dot(product)
        if curvature <= 0:
            raise ConvergenceError(
                "operator is not positive definite (curvature {:.3g} at "
                "iteration {})".format(curvature, iteration),
                best=CGResult(x, iteration - 1, residuals, values, False))
        step = rz / curvature
        x = x + step * direction
        residual = residual - step * product
        residuals.append(np.linalg.norm(residual) / norm_rhs)
        values.append(-0.5 * x.dot(rhs + residual))
        if iteration % LOG_EVERY == 0:
            LOGGER.debug("CG iteration %d: residual %.3e", iteration,
                         residuals[-1])
        if residuals[-1] <= tolerance:
            return CGResult(x, iteration, residuals, values, True)
        z = precondition(residual)
        rz_next = residual.dot(z)
        direction = z + (rz_next / rz) * direction
        rz = rz_next
    return CGResult(x, max_iterations, residuals, values, False)


def normal_system(problem, parametrization=None, operator=None, data=None):
    """Hessian, load and constant of the functional in the free unknowns.

    ``operator`` and ``data`` replace the problem's L and G0 when given.
    """
    param = parametrization or problem.parametrization()
    operator = problem.operator if operator is None else operator
    data = problem.source.values if data is None else data
    layout = problem.layout
    weighted = sp.diags(layout.weights).dot(operator.matrix())
    hessian = sp.csr_matrix(param.matrix.T.dot(weighted.dot(param.matrix)))
    offset_dual = operator.apply(param.offset)
    load = param.matrix.T.dot(layout.weights * (data - offset_dual))
    constant = float(np.sum(layout.weights * param.offset *
                            (0.5 * offset_dual - data)))
    return hessian, load, constant


def minimize_cg(problem, options=None, initial=None, operator=None,
                data=None):
    """Minimize the functional; returns (FieldState, SolveReport).

    ``operator`` and ``data`` swap in another L and G0 on the same
    admissible set.
    """
    options = options or SolveOptions()
    start = time.time()
    param = problem.parametrization()
    hessian, load, constant = normal_system(problem, param, operator, data)
    if initial is None and options.random_start:
        initial = np.random.RandomState(options.seed).standard_normal(
            param.size)
    precondition = None
    if options.preconditioner == PRECOND_JACOBI and param.size:
        precondition = block_jacobi(hessian, param.groups)
    try:
        result = conjugate_gradient(hessian, load, initial, options.tolerance,
                                    options.max_iterations, precondition)
    except ConvergenceError as err:
        best = err.best
        err.best = param.field(best.x)
        err.report = SolveReport(best.iterations, best.residuals[-1],
                                 constant + best.values[-1],
                                 time.time() - start, [], False, param.path)
        raise
    field = param.field(result.x)
    history = [(r, constant + v) for r, v in
               zip(result.residuals, result.values)]
    report = SolveReport(result.iterations, result.residuals[-1],
                         constant + result.values[-1], time.time() - start,
                         history, result.converged, param.path)
    if not result.converged:
        LOGGER.warning("CG stopped after %d iterations at residual %.3e",
                       result.iterations, result.residuals[-1])
        raise ConvergenceError(
            "CG did not reach tolerance {:.1e} in {} iterations".format(
                options.tolerance, options.max_iterations),
            best=field, report=report)
    LOGGER.info("CG converged in %d iterations (%s path), residual %.3e",
                result.iterations, param.path, result.residuals[-1])
    return field, report


def _oracle_system(problem):
    """Complex nodal matrix, load and trace coefficient of the oracle."""
    layout, medium = problem.layout, problem.medium
    w = layout.omega
    grad = layout.gradient
    force = problem.source.force
    cell_w = sp.diags(layout.cell_w)
    node_w = sp.diags(layout.node_w)
    if layout.physics == ELASTIC:
        stiffness = block_diagonal(medium.primal_tensors)
        mass = block_diagonal(medium.dual_tensors)
        matrix = grad.T.dot(cell_w).dot(stiffness).dot(grad) - \
            w ** 2 * node_w.dot(mass)
        return matrix, layout.node_w * force, 1.0
    if layout.physics == ACOUSTIC:
        compliance = block_diagonal(medium.primal_tensors)
        inverse_density = block_diagonal(medium.dual_tensors)
        coupled = grad.T.dot(cell_w).dot(inverse_density)
        matrix = -coupled.dot(grad) + w ** 2 * node_w.dot(compliance)
        return matrix, -coupled.dot(force), 1j * w
    permittivity = block_diagonal(medium.primal_tensors)
    inverse_mu = block_diagonal(medium.dual_tensors)
    matrix = grad.T.dot(cell_w).dot(inverse_mu).dot(grad) - \
        w ** 2 * node_w.dot(permittivity)
    return matrix, 1j * w * layout.node_w * force, 1j * w


def _cell_fields(problem, nodal):
    """Complex cellwise flux of a nodal solution."""
    layout, medium = problem.layout, problem.medium
    w = layout.omega
    grad = layout.gradient.dot(nodal)
    size = layout.cell_size
    if layout.physics == ELASTIC:
        flux = grad
    elif layout.physics == ACOUSTIC:
        flux = (problem.source.force - grad) / (1j * w)
    else:
        flux = grad / (1j * w)
    tensors = (medium.primal_tensors if layout.physics == ELASTIC
               else medium.dual_tensors)
    return np.einsum('nij,nj->ni', tensors, flux.reshape(-1, size)).ravel()


def solve_direct_complex(problem):
    """Direct sparse solve of the complex discrete wave equation.

    Supports Dirichlet and Neumann selections; returns physical complex
    fields with any rotation undone.
    """
    layout, spec = problem.layout, problem.spec
    if not spec.physical:
        raise ValidationError("the direct solver supports Dirichlet and "
                              "Neumann selections only")
    matrix, load, factor = _oracle_system(problem)
    matrix = sp.csc_matrix(matrix, dtype=complex)
    load = np.asarray(load, dtype=complex)
    dirichlet = spec.primal_essential
    if layout.physics == ELASTIC:
        given = spec.trace_value + 1j * spec.flux_target
    else:
        given = spec.flux_target + 1j * spec.trace_value
    nodal = np.zeros(layout.n_nodal, dtype=complex)
    fixed = layout.trace_index[dirichlet]
    nodal[fixed] = spec.primal_value[dirichlet] + \
        1j * spec.primal_target[dirichlet]
    rhs = load.copy()
    neumann = layout.trace_index[~dirichlet]
    rhs[neumann] += factor * layout.surface_w[~dirichlet] * given[~dirichlet]
    free = np.setdiff1d(np.arange(layout.n_nodal), fixed)
    rhs = rhs - matrix.dot(nodal)
    if free.size:
        try:
            lu = spla.splu(sp.csc_matrix(matrix[free][:, free]))
        except RuntimeError as err:
            raise SingularityError("direct system is singular: {}".format(err))
        nodal[free] = lu.solve(rhs[free])
        if not np.all(np.isfinite(nodal)):
            raise SingularityError("direct system is singular")
    trace = np.where(dirichlet, 0.0, given).astype(complex)
    balance = matrix.dot(nodal) - load
    trace[dirichlet] = balance[fixed] / (factor * layout.surface_w[dirichlet])
    fields = ComplexFields(layout, nodal, _cell_fields(problem, nodal), trace)
    LOGGER.debug("Direct solve: %d free nodal unknowns", free.size)
    return fields.rotated(-problem.theta)


class CrossValidation(object):
    """Differences between an iterative and a direct solution."""

    def __init__(self, nodal, cell, trace, value=None, boundary=None):
        """Store relative errors and functional discrepancies."""
        self.nodal = nodal
        self.cell = cell
        self.trace = trace
        self.value = value
        self.boundary = boundary

    @property
    def field_error(self):
        """Largest relative field error."""
        return max(self.nodal, self.cell, self.trace)

    def as_dict(self):
        """Report entries."""
        return {'nodal_error': self.nodal, 'cell_error': self.cell,
                'trace_error': self.trace, 'value_discrepancy': self.value,
                'boundary_identity': self.boundary}


def _relative(first, second):
    """|first - second| / |second| with a zero-safe denominator."""
    scale = np.linalg.norm(second)
    error = np.linalg.norm(first - second)
    return float(error / scale) if scale > 0 else float(error)


def cross_validate(result, oracle, problem=None):
    """Compare complex fields; with a problem also compare functionals."""
    report = CrossValidation(_relative(result.nodal, oracle.nodal),
                             _relative(result.cell, oracle.cell),
                             _relative(result.trace, oracle.trace))
    if problem is None or problem.lossless:
        return report
    values = []
    for fields in (result, oracle):
        field = problem.field_from_complex(fields)
        values.append(evaluate_functional(field, problem.operator,
                                          problem.source).total)
    report.value = abs(values[0] - values[1]) / max(abs(values[1]), 1e-300)
    if not problem.source.has_force:
        surface = SurfaceData.from_fields(oracle.rotated(problem.theta))
        expected = minimum_value_surface(surface, problem.source)
        report.boundary = abs(values[1] - expected) / max(abs(expected),
                                                          1e-300)
    return report
