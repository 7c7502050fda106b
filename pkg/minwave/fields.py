"""Field layouts, constraint completion and boundary-condition encoding.

A layout fixes, for one physics on one mesh, how the primary unknowns
(nodal field ``a``, cellwise flux ``b`` and boundary traces ``tau``) and the
source term determine the real field quadruple F, and how the dual
unknowns determine G. Both maps are affine and stored as sparse matrices.
The discrete divergence is built as the adjoint of the discrete gradient,
so summation by parts holds exactly::

    <b, G a>_cells + <a, Div(b, tau)>_nodes = [a, tau]_boundary
"""
import logging
import numpy as np
import scipy.sparse as sp
from minwave.const import (ELASTIC, ACOUSTIC, ELECTROMAGNETIC, PHYSICS,
                           DIRICHLET, NEUMANN, CUSTOM, ESSENTIAL, NATURAL)
from minwave.exceptions import ValidationError, PassivityError
from minwave.moduli import (OperatorL, ReducedFormSpec, SIGNS, STRICT,
                            mandel_pairs, check_passivity, lossless_limit,
                            legendre_block, legendre_blocks, rotate_moduli,
                            choose_rotation)
from minwave.util import as_matrix

LOGGER = logging.getLogger(__name__)

CELL = 'cell'
NODE = 'node'


def _interleave(first, second, count, size):
    """Rows ordered entity by entity: first half then second half."""
    index = np.arange(count * size).reshape(count, size)
    perm = np.hstack([index, index + count * size]).ravel()
    return sp.vstack([first, second]).tocsr()[perm]


class Layout(object):
    """Affine maps between primary unknowns and the field quadruples."""

    def __init__(self, physics, mesh, frequency):
        """Build the discrete operators of one physics on a mesh."""
        if physics not in PHYSICS:
            raise ValidationError("unknown physics '{}'".format(physics))
        if not frequency > 0:
            raise ValidationError("frequency must be positive")
        if physics == ELECTROMAGNETIC and mesh.dim != 1:
            raise ValidationError("electromagnetism is supported in 1D only")
        self.physics = physics
        self.mesh = mesh
        self.omega = float(frequency)
        dim = mesh.dim
        if physics == ELASTIC:
            self.nodal_size = dim
            self.cell_size = len(mandel_pairs(dim)[0])
            self.first_on, self.source_on = CELL, NODE
            self.gradient = mesh.strain()
            self.scales = (1.0, 1.0)
        elif physics == ACOUSTIC:
            self.nodal_size, self.cell_size = 1, dim
            self.first_on, self.source_on = NODE, CELL
            self.gradient = mesh.gradient()
            self.scales = (-self.omega, self.omega)
        else:
            self.nodal_size, self.cell_size = 1, 1
            self.first_on, self.source_on = NODE, NODE
            self.gradient = mesh.gradient()
            self.scales = (-1.0 / self.omega, 1.0 / self.omega)
        self.node_w = mesh.nodal_weights(self.nodal_size)
        self.cell_w = mesh.cell_weights(self.cell_size)
        self.surface_w = mesh.trace_weights(self.nodal_size)
        self.trace_index = mesh.trace_index(self.nodal_size)
        inv_w = sp.diags(1.0 / self.node_w)
        self.div_b = -(inv_w.dot(self.gradient.T).dot(
            sp.diags(self.cell_w))).tocsr()
        self.div_t = inv_w.dot(mesh.trace_operator(self.nodal_size)).tocsr()
        self.primal_map = self._assemble(self._halves(dual=False))
        self.dual_map = self._assemble(self._halves(dual=True))
        self.weights = np.concatenate([
            np.repeat(self.entity_weights(1), 2 * self.block_sizes[0]),
            np.repeat(self.entity_weights(2), 2 * self.block_sizes[1])])
        LOGGER.debug("Layout %s: %d field entries, %d primary unknowns",
                     physics, self.size, self.n_nodal + self.n_cell +
                     self.n_trace)

    @property
    def block_sizes(self):
        """Half-sizes of the two pointwise blocks."""
        if self.first_on == CELL:
            return self.cell_size, self.nodal_size
        return self.nodal_size, self.cell_size

    @property
    def block_counts(self):
        """Entity counts of the two blocks."""
        if self.first_on == CELL:
            return self.mesh.n_cells, self.mesh.n_nodes
        return self.mesh.n_nodes, self.mesh.n_cells

    def block_kind(self, block):
        """'cell' or 'node' for block 1 or 2."""
        if block == 1:
            return self.first_on
        return NODE if self.first_on == CELL else CELL

    def entity_weights(self, block):
        """Quadrature weight per entity of a block."""
        if self.block_kind(block) == CELL:
            return self.mesh.volumes
        return self.mesh.node_weights

    @property
    def size(self):
        """Length of a flat field quadruple."""
        (k1, k2), (n1, n2) = self.block_sizes, self.block_counts
        return 2 * (k1 * n1 + k2 * n2)

    @property
    def split_at(self):
        """Offset where block 2 starts in a flat quadruple."""
        return 2 * self.block_sizes[0] * self.block_counts[0]

    @property
    def n_nodal(self):
        """Length of the nodal unknown vector."""
        return self.mesh.n_nodes * self.nodal_size

    @property
    def n_cell(self):
        """Length of the cellwise unknown vector."""
        return self.mesh.n_cells * self.cell_size

    @property
    def n_trace(self):
        """Number of boundary trace entries."""
        return self.trace_index.size

    @property
    def source_size(self):
        """Length of the source vector."""
        if self.source_on == CELL:
            return self.n_cell
        return self.n_nodal

    def _halves(self, dual):
        """Coefficient matrices of the four halves of F (or G)."""
        w = self.omega
        eye_a = sp.identity(self.n_nodal, format='csr')
        eye_b = sp.identity(self.n_cell, format='csr')
        eye_f = sp.identity(self.source_size, format='csr')
        grad, div_b, div_t = self.gradient, self.div_b, self.div_t
        if self.physics == ELASTIC:
            if dual:
                return ({'b': eye_b}, {'a': -grad},
                        {'b': div_b / w, 't': div_t / w, 'f': eye_f / w},
                        {'a': w * eye_a})
            return ({'a': grad}, {'b': eye_b}, {'a': w * eye_a},
                    {'b': -div_b / w, 't': -div_t / w, 'f': -eye_f / w})
        if self.physics == ACOUSTIC:
            if dual:
                return ({'b': div_b, 't': div_t}, {'a': -w * eye_a},
                        {'b': -w * eye_b}, {'a': -grad, 'f': eye_f})
            return ({'a': -w * eye_a}, {'b': div_b, 't': div_t},
                    {'a': grad, 'f': -eye_f}, {'b': w * eye_b})
        if dual:
            return ({'b': -div_b / w, 't': -div_t / w, 'f': -eye_f / w},
                    {'a': -eye_a}, {'b': eye_b}, {'a': -grad / w})
        return ({'a': eye_a},
                {'b': div_b / w, 't': div_t / w, 'f': eye_f / w},
                {'a': -grad / w}, {'b': eye_b})

    def _assemble(self, halves):
        """Sparse matrices mapping each argument onto the flat quadruple."""
        columns = {'a': self.n_nodal, 'b': self.n_cell, 't': self.n_trace,
                   'f': self.source_size}
        (k1, k2), (n1, n2) = self.block_sizes, self.block_counts
        maps = {}
        for key, width in columns.items():
            parts = []
            for first, second, count, size in ((halves[0], halves[1], n1, k1),
                                               (halves[2], halves[3], n2, k2)):
                empty = sp.csr_matrix((count * size, width))
                parts.append(_interleave(first.get(key, empty),
                                         second.get(key, empty), count, size))
            maps[key] = sp.vstack(parts).tocsr()
        return maps

    def split(self, values):
        """Four halves of a flat quadruple, each as (entities, size)."""
        values = np.asarray(values)
        (k1, k2), (n1, n2) = self.block_sizes, self.block_counts
        first = values[:self.split_at].reshape(n1, 2 * k1)
        second = values[self.split_at:].reshape(n2, 2 * k2)
        return (first[:, :k1], first[:, k1:], second[:, :k2], second[:, k2:])

    def divergence(self, cell, trace):
        """Discrete divergence of a cellwise flux with boundary traces."""
        return self.div_b.dot(cell) + self.div_t.dot(trace)

    def trace_from_divergence(self, divergence, cell):
        """Boundary traces consistent with a nodal divergence and flux."""
        nodal = self.node_w * divergence + self.gradient.T.dot(
            self.cell_w * cell)
        return nodal[self.trace_index] / self.surface_w

    def pairing(self, nodal, trace):
        """Boundary pairing [a, tau] weighted by surface weights."""
        return float(np.sum(self.surface_w * nodal[self.trace_index] * trace))

    def node_product(self, first, second):
        """Weighted nodal inner product."""
        return float(np.sum(self.node_w * first * second))

    def cell_product(self, first, second):
        """Weighted cellwise inner product."""
        return float(np.sum(self.cell_w * first * second))

    def source_product(self, first, second):
        """Weighted inner product on the source location."""
        if self.source_on == CELL:
            return self.cell_product(first, second)
        return self.node_product(first, second)

    def force_parts(self, force):
        """Split a complex source into (primal-side, dual-side) real parts."""
        force = np.zeros(self.source_size, dtype=complex) if force is None \
            else np.asarray(force, dtype=complex)
        if force.shape != (self.source_size,):
            raise ValidationError("source must have {} entries, got {}".format(
                self.source_size, force.shape))
        if self.physics == ELECTROMAGNETIC:
            return force.imag.copy(), force.real.copy()
        return force.real.copy(), force.imag.copy()

    def project_force(self, per_cell):
        """Source vector from per-cell complex values (cells, components)."""
        per_cell = np.asarray(per_cell, dtype=complex)
        size = self.cell_size if self.source_on == CELL else self.nodal_size
        per_cell = per_cell.reshape(self.mesh.n_cells, size)
        if self.source_on == CELL:
            return per_cell.ravel()
        shares = self.mesh.volumes / (self.mesh.dim + 1)
        nodal = np.zeros((self.mesh.n_nodes, size), dtype=complex)
        for local in range(self.mesh.dim + 1):
            np.add.at(nodal, self.mesh.cells[:, local],
                      shares[:, None] * per_cell)
        return (nodal / self.mesh.node_weights[:, None]).ravel()

    def primal_values(self, nodal, cell, trace, force_primal):
        """Flat F from primary unknowns."""
        return (self.primal_map['a'].dot(nodal) +
                self.primal_map['b'].dot(cell) +
                self.primal_map['t'].dot(trace) +
                self.primal_map['f'].dot(force_primal))

    def dual_values(self, nodal, cell, trace, force_dual):
        """Flat G from dual unknowns."""
        return (self.dual_map['a'].dot(nodal) +
                self.dual_map['b'].dot(cell) +
                self.dual_map['t'].dot(trace) +
                self.dual_map['f'].dot(force_dual))

    def dual_unknowns(self, values, force_dual):
        """Recover (nodal, cell, trace) dual unknowns from a full G."""
        first_x, first_y, second_x, second_y = (
            part.ravel() for part in self.split(values))
        w = self.omega
        if self.physics == ELASTIC:
            cell, nodal = first_x, second_y / w
            divergence = w * second_x - force_dual
        elif self.physics == ACOUSTIC:
            nodal, cell = -first_y / w, -second_x / w
            divergence = first_x
        else:
            nodal, cell = -first_y, second_x
            divergence = -w * first_x - force_dual
        return nodal, cell, self.trace_from_divergence(divergence, cell)

    def lossless_dual_unknowns(self, values, force_dual, reduced, spec):
        """Dual unknowns when the second block is eliminated.

        Only the first block of ``values`` is used; ``reduced`` is the
        ReducedFormSpec holding the real dual tensor per block-2 entity.
        """
        first_x, first_y, _, _ = (part.ravel() for part in self.split(values))
        w = self.omega
        if self.physics == ELASTIC:
            cell = first_x
            guess = np.where(spec.primal_essential, 0.0, spec.flux_target)
            nodal = reduced.eliminate(
                -(self.divergence(cell, guess) + force_dual) / w)
            fixed = self.trace_index[spec.primal_essential]
            nodal[fixed] = spec.primal_target[spec.primal_essential]
            momentum = -reduced.restore(nodal)
            divergence = w * momentum - force_dual
        elif self.physics == ACOUSTIC:
            nodal = -first_y / w
            cell = reduced.eliminate(
                (-self.gradient.dot(nodal) + force_dual) / w)
            divergence = first_x
        else:
            nodal = -first_y
            cell = reduced.eliminate(self.gradient.dot(nodal) / w)
            divergence = -w * first_x - force_dual
        return nodal, cell, self.trace_from_divergence(divergence, cell)

    def to_complex(self, primal, dual):
        """Complex nodal, cell and trace fields from real unknown triples."""
        nodal = primal[0] + 1j * dual[0]
        if self.physics == ELASTIC:
            cell = primal[1] + 1j * dual[1]
            trace = primal[2] + 1j * dual[2]
        else:
            cell = dual[1] + 1j * primal[1]
            trace = dual[2] + 1j * primal[2]
        return ComplexFields(self, nodal, cell, trace)

    def from_complex(self, fields):
        """Real (primal, dual) unknown triples from complex fields."""
        nodal, cell, trace = fields.nodal, fields.cell, fields.trace
        if self.physics == ELASTIC:
            primal = (nodal.real, cell.real, trace.real)
            dual = (nodal.imag, cell.imag, trace.imag)
        else:
            primal = (nodal.real, cell.imag, trace.imag)
            dual = (nodal.imag, cell.real, trace.real)
        return ([np.array(p) for p in primal], [np.array(d) for d in dual])


class ComplexFields(object):
    """Complex nodal field, cellwise flux and boundary traces."""

    def __init__(self, layout, nodal, cell, trace):
        """Store fields."""
        self.layout = layout
        self.nodal = np.asarray(nodal, dtype=complex)
        self.cell = np.asarray(cell, dtype=complex)
        self.trace = np.asarray(trace, dtype=complex)

    def rotated(self, theta):
        """Undo or apply a global phase on the flux-type fields."""
        phase = np.exp(1j * theta)
        return ComplexFields(self.layout, self.nodal, self.cell * phase,
                             self.trace * phase)

    def norm(self):
        """Euclidean norm of all entries."""
        return float(np.sqrt(sum(np.vdot(v, v).real for v in
                                 (self.nodal, self.cell, self.trace))))


class FieldState(object):
    """Real field quadruple F together with its primary unknowns."""

    def __init__(self, layout, values, nodal=None, cell=None, trace=None):
        """Store the flat quadruple and the unknowns it came from."""
        self.layout = layout
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (layout.size,):
            raise ValidationError("field has {} entries, layout needs {}".format(
                self.values.size, layout.size))
        self.nodal = nodal
        self.cell = cell
        self.trace = trace

    @property
    def blocks(self):
        """Four halves of the quadruple."""
        return self.layout.split(self.values)

    def __add__(self, other):
        """Entrywise sum."""
        return FieldState(self.layout, self.values + _values(other))

    def __sub__(self, other):
        """Entrywise difference."""
        return FieldState(self.layout, self.values - _values(other))


class DualState(object):
    """Real dual quadruple G."""

    def __init__(self, layout, values):
        """Store the flat quadruple."""
        self.layout = layout
        self.values = np.asarray(values, dtype=float)

    @property
    def blocks(self):
        """Four halves of the quadruple."""
        return self.layout.split(self.values)


def _values(state):
    """Flat values of a state or array."""
    return state.values if hasattr(state, 'values') else np.asarray(state)


class BoundarySpec(object):
    """Two independent selections per boundary trace entry.

    ``primal_essential`` prescribes the real nodal field (else the dual
    trace gets ``flux_target``); ``trace_essential`` prescribes the primal
    trace (else the dual nodal field gets ``primal_target``).
    """

    def __init__(self, primal_essential, trace_essential, primal_value,
                 flux_target, trace_value, primal_target):
        """Validate selection and data arrays."""
        self.primal_essential = np.asarray(primal_essential, dtype=bool)
        self.trace_essential = np.asarray(trace_essential, dtype=bool)
        size = self.primal_essential.size
        arrays = []
        for name, data in (('primal_value', primal_value),
                           ('flux_target', flux_target),
                           ('trace_value', trace_value),
                           ('primal_target', primal_target)):
            data = np.asarray(data, dtype=float)
            if data.shape != (size,):
                raise ValidationError("{} must have {} entries".format(
                    name, size))
            arrays.append(data)
        if self.trace_essential.shape != (size,):
            raise ValidationError("selection arrays differ in length")
        (self.primal_value, self.flux_target, self.trace_value,
         self.primal_target) = arrays

    @classmethod
    def natural(cls, layout):
        """All entries natural with zero targets."""
        zeros = np.zeros(layout.n_trace)
        return cls(zeros.astype(bool), zeros.astype(bool), zeros, zeros,
                   zeros, zeros)

    @classmethod
    def from_conditions(cls, layout, conditions):
        """Encode physical per-side conditions; unnamed sides are free."""
        spec = cls.natural(layout)
        known = set(layout.mesh.boundary_sides)
        for condition in conditions:
            if condition.side not in known:
                raise ValidationError("mesh has no boundary side '{}'".format(
                    condition.side))
            mask = np.repeat(layout.mesh.side_mask(condition.side),
                             layout.nodal_size)
            condition.encode(layout, spec, mask)
        return spec

    @property
    def physical(self):
        """True when every entry is Dirichlet-like or Neumann-like."""
        return bool(np.all(self.primal_essential != self.trace_essential))

    def copy(self):
        """Independent copy."""
        return BoundarySpec(self.primal_essential.copy(),
                            self.trace_essential.copy(),
                            self.primal_value.copy(), self.flux_target.copy(),
                            self.trace_value.copy(), self.primal_target.copy())


class BoundaryCondition(object):
    """Physical or custom condition on one side of the boundary."""

    def __init__(self, side, kind=NEUMANN, value=0.0, primal=None,
                 trace=None):
        """Store the condition; custom kinds take (selection, value) pairs."""
        if kind not in (DIRICHLET, NEUMANN, CUSTOM):
            raise ValidationError("unknown boundary type '{}'".format(kind))
        self.side = side
        self.kind = kind
        self.value = np.atleast_1d(np.asarray(value, dtype=complex))
        if kind == CUSTOM:
            for pair in (primal, trace):
                if pair is None or pair[0] not in (ESSENTIAL, NATURAL):
                    raise ValidationError(
                        "custom boundary needs primal and trace selections")
        self.primal = primal
        self.trace = trace

    def __repr__(self):
        """Short description."""
        return "BoundaryCondition({}, {})".format(self.side, self.kind)

    def rotated(self, theta):
        """Condition for data multiplied by exp(i theta)."""
        if self.kind == DIRICHLET:
            return self
        if self.kind == NEUMANN:
            return BoundaryCondition(self.side, NEUMANN,
                                     self.value * np.exp(1j * theta))
        raise ValidationError("custom boundary data cannot be rotated")

    def _broadcast(self, data, layout, count):
        """Per-entry values for count entries on this side."""
        data = np.atleast_1d(np.asarray(data))
        if data.size == 1:
            return np.full(count, data[0])
        if data.size != layout.nodal_size:
            raise ValidationError("boundary value on '{}' needs 1 or {} "
                                  "components".format(self.side,
                                                      layout.nodal_size))
        return np.tile(data, count // layout.nodal_size)

    def encode(self, layout, spec, mask):
        """Write this condition into the selection arrays."""
        count = int(mask.sum())
        if self.kind == CUSTOM:
            primal_kind, primal_data = self.primal
            trace_kind, trace_data = self.trace
            primal_data = np.real(self._broadcast(primal_data, layout, count))
            trace_data = np.real(self._broadcast(trace_data, layout, count))
            spec.primal_essential[mask] = primal_kind == ESSENTIAL
            spec.trace_essential[mask] = trace_kind == ESSENTIAL
            if primal_kind == ESSENTIAL:
                spec.primal_value[mask] = primal_data
            else:
                spec.flux_target[mask] = primal_data
            if trace_kind == ESSENTIAL:
                spec.trace_value[mask] = trace_data
            else:
                spec.primal_target[mask] = trace_data
            return
        value = self._broadcast(self.value, layout, count)
        if self.kind == DIRICHLET:
            spec.primal_essential[mask] = True
            spec.trace_essential[mask] = False
            spec.primal_value[mask] = value.real
            spec.primal_target[mask] = value.imag
            return
        spec.primal_essential[mask] = False
        spec.trace_essential[mask] = True
        if layout.physics == ELASTIC:
            spec.trace_value[mask], spec.flux_target[mask] = (value.real,
                                                              value.imag)
        else:
            spec.trace_value[mask], spec.flux_target[mask] = (value.imag,
                                                              value.real)


class SourceData(object):
    """Admissible dual data G0, body force and boundary specification."""

    def __init__(self, layout, force, spec, nodal, cell, trace):
        """Build G0 from dual unknowns through the dual constraints."""
        self.layout = layout
        self.force = (np.zeros(layout.source_size, dtype=complex)
                      if force is None else np.asarray(force, dtype=complex))
        self.primal_force, self.dual_force = layout.force_parts(self.force)
        self.spec = spec
        self.nodal = nodal
        self.cell = cell
        self.trace = trace
        self.values = layout.dual_values(nodal, cell, trace, self.dual_force)

    @property
    def has_force(self):
        """True when the body force is nonzero."""
        return bool(np.any(self.force != 0))

    def norm(self):
        """Weighted norm of G0."""
        return float(np.sqrt(np.sum(self.layout.weights * self.values ** 2)))


def build_source_data(layout, force=None, bc=None, dual_nodal=None,
                      dual_cell=None):
    """Canonical admissible G0 for a force and boundary specification.

    The dual flux is zero unless given, its traces carry the flux targets
    where the nodal field is natural, and the dual nodal field carries the
    primal targets where the trace is natural.
    """
    spec = BoundarySpec.natural(layout) if bc is None else bc
    if spec.primal_essential.size != layout.n_trace:
        raise ValidationError("boundary specification does not fit the mesh")
    trace = np.where(spec.primal_essential, 0.0, spec.flux_target)
    nodal = (np.zeros(layout.n_nodal) if dual_nodal is None
             else np.array(dual_nodal, dtype=float))
    if nodal.shape != (layout.n_nodal,):
        raise ValidationError("dual nodal data has the wrong length")
    natural = ~spec.trace_essential
    nodal[layout.trace_index[natural]] = spec.primal_target[natural]
    cell = (np.zeros(layout.n_cell) if dual_cell is None
            else np.array(dual_cell, dtype=float))
    if cell.shape != (layout.n_cell,):
        raise ValidationError("dual cell data has the wrong length")
    return SourceData(layout, force, spec, nodal, cell, trace)


def complete_trial_field(layout, nodal, cell, trace=None, source=None):
    """Fill the dependent components of F from the primary unknowns."""
    nodal = np.asarray(nodal, dtype=float).ravel()
    cell = np.asarray(cell, dtype=float).ravel()
    trace = (np.zeros(layout.n_trace) if trace is None
             else np.asarray(trace, dtype=float).ravel())
    if (nodal.size, cell.size, trace.size) != (
            layout.n_nodal, layout.n_cell, layout.n_trace):
        raise ValidationError(
            "unknowns have sizes {}, layout needs {}".format(
                (nodal.size, cell.size, trace.size),
                (layout.n_nodal, layout.n_cell, layout.n_trace)))
    force = (np.zeros(layout.source_size) if source is None
             else source.primal_force)
    values = layout.primal_values(nodal, cell, trace, force)
    return FieldState(layout, values, nodal, cell, trace)


def apply_constitutive(field, operator):
    """G = L F pointwise."""
    values = _values(field)
    layout = getattr(field, 'layout', None)
    if isinstance(operator, OperatorL):
        if layout is None:
            if values.size != sum(operator.sizes):
                raise ValidationError("field does not match operator size")
            return DualState(None, operator.apply(values))
        (k1, k2), (n1, n2) = layout.block_sizes, layout.block_counts
        if operator.sizes != (2 * k1, 2 * k2):
            raise ValidationError("operator blocks do not match the layout")
        first = values[:layout.split_at].reshape(n1, 2 * k1)
        second = values[layout.split_at:].reshape(n2, 2 * k2)
        return DualState(layout, np.concatenate([
            first.dot(operator.block_a.matrix.T).ravel(),
            second.dot(operator.block_b.matrix.T).ravel()]))
    if values.size != operator.size:
        raise ValidationError("field does not match operator size")
    return DualState(layout, operator.apply(values))


class BoundaryResidual(object):
    """Natural-condition mismatch per boundary trace entry."""

    def __init__(self, layout, flux, primal, spec):
        """Store mismatches; NaN where the condition does not apply."""
        self.layout = layout
        self.flux = flux
        self.primal = primal
        self.spec = spec

    def max(self):
        """Largest absolute mismatch."""
        values = np.concatenate([self.flux[~np.isnan(self.flux)],
                                 self.primal[~np.isnan(self.primal)]])
        return float(np.abs(values).max()) if values.size else 0.0

    def rows(self):
        """(node, component, kind, value) rows for tabular output."""
        size = self.layout.nodal_size
        nodes = np.repeat(self.layout.mesh.boundary_nodes, size)
        comps = np.tile(np.arange(size), self.layout.mesh.n_boundary)
        for kind, data in (('flux', self.flux), ('primal', self.primal)):
            for node, comp, value in zip(nodes, comps, data):
                if not np.isnan(value):
                    yield int(node), int(comp), kind, float(value)


def boundary_residual(field, dual, bc, source=None):
    """Mismatch of the natural conditions on the boundary.

    Where the nodal field is free the dual trace must meet its target;
    where the trace is free the dual nodal field must meet its target.
    """
    layout = field.layout
    force = (np.zeros(layout.source_size) if source is None
             else source.dual_force)
    nodal, _, trace = layout.dual_unknowns(_values(dual), force)
    flux = np.where(bc.primal_essential, np.nan, trace - bc.flux_target)
    primal = np.where(bc.trace_essential, np.nan,
                      bc.primal_target - nodal[layout.trace_index])
    return BoundaryResidual(layout, flux, primal, bc)


def _block_sparse(blocks, offset=0):
    """Sparse block-diagonal matrix from dense blocks (entities, s, s)."""
    count, size, _ = blocks.shape
    base = offset + np.arange(count)[:, None, None] * size
    rows = np.broadcast_to(base + np.arange(size)[None, :, None], blocks.shape)
    cols = np.broadcast_to(base + np.arange(size)[None, None, :], blocks.shape)
    return rows.ravel(), cols.ravel(), blocks.ravel()


def block_diagonal(blocks):
    """Sparse block-diagonal matrix of per-entity blocks (real or complex)."""
    blocks = np.asarray(blocks)
    rows, cols, vals = _block_sparse(blocks)
    size = blocks.shape[0] * blocks.shape[1]
    return sp.csr_matrix((vals, (rows, cols)), shape=(size, size))


class MediumOperator(object):
    """Block-diagonal L with one dense block per entity of each block."""

    def __init__(self, layout, first, second):
        """Store per-entity blocks of shapes (n1, 2k1, 2k1), (n2, 2k2, 2k2)."""
        (k1, k2), (n1, n2) = layout.block_sizes, layout.block_counts
        first = np.asarray(first, dtype=float)
        second = np.asarray(second, dtype=float)
        if first.shape != (n1, 2 * k1, 2 * k1) or \
                second.shape != (n2, 2 * k2, 2 * k2):
            raise ValidationError("operator blocks do not match the layout")
        self.layout = layout
        self.first = first
        self.second = second

    @classmethod
    def uniform(cls, layout, operator):
        """Same pointwise OperatorL on every entity."""
        (n1, n2) = layout.block_counts
        if operator.sizes != tuple(2 * k for k in layout.block_sizes):
            raise ValidationError("operator blocks do not match the layout")
        return cls(layout,
                   np.repeat(operator.block_a.matrix[None], n1, axis=0),
                   np.repeat(operator.block_b.matrix[None], n2, axis=0))

    @property
    def size(self):
        """Length of the flat quadruple it acts on."""
        return self.layout.size

    def _map(self, function, *others):
        """New operator from a blockwise function."""
        return MediumOperator(
            self.layout,
            function(self.first, *[o.first for o in others]),
            function(self.second, *[o.second for o in others]))

    def __add__(self, other):
        """Blockwise sum."""
        return self._map(np.add, other)

    def __sub__(self, other):
        """Blockwise difference."""
        return self._map(np.subtract, other)

    def __mul__(self, factor):
        """Scalar multiple."""
        return self._map(lambda blocks: factor * blocks)

    __rmul__ = __mul__

    def _parts(self, values):
        """Per-entity views of a flat quadruple."""
        values = _values(values)
        (n1, n2), at = self.layout.block_counts, self.layout.split_at
        return (values[:at].reshape(n1, -1), values[at:].reshape(n2, -1))

    def apply(self, values):
        """L F for a flat quadruple."""
        first, second = self._parts(values)
        return np.concatenate([
            np.einsum('nij,nj->ni', self.first, first).ravel(),
            np.einsum('nij,nj->ni', self.second, second).ravel()])

    def solve(self, values):
        """L^{-1} F blockwise."""
        first, second = self._parts(values)
        return np.concatenate([
            np.linalg.solve(self.first, first[..., None]).ravel(),
            np.linalg.solve(self.second, second[..., None]).ravel()])

    def matrix(self):
        """Sparse block-diagonal matrix."""
        rows1, cols1, vals1 = _block_sparse(self.first)
        rows2, cols2, vals2 = _block_sparse(self.second, self.layout.split_at)
        return sp.csr_matrix(
            (np.concatenate([vals1, vals2]),
             (np.concatenate([rows1, rows2]), np.concatenate([cols1, cols2]))),
            shape=(self.size, self.size))

    def min_eigenvalues(self):
        """Smallest eigenvalue per entity of each block."""
        return (np.linalg.eigvalsh(self.first)[:, 0],
                np.linalg.eigvalsh(self.second)[:, 0])

    def is_positive_definite(self, tol=0.0):
        """Every block has all eigenvalues above tol."""
        return all(np.all(values > tol) for values in self.min_eigenvalues())


def _fit(tensor, size, name):
    """Square tensor of a given size; scalars expand to multiples of I."""
    tensor = as_matrix(tensor, size)
    if tensor.shape != (size, size):
        raise ValidationError("{} must be {}x{}, got {}".format(
            name, size, size, tensor.shape))
    return tensor


class Medium(object):
    """Complex moduli spread over the entities of a layout.

    The primal tensor lives on the entities of the first block and the dual
    tensor on the second; nodal tensors are volume averages of the
    adjacent regions.
    """

    def __init__(self, layout, regions):
        """Build per-entity tensors from a {region name: ComplexModuli} map."""
        names = layout.mesh.region_names
        missing = [name for name in names if name not in regions]
        if missing:
            raise ValidationError("no moduli for regions: {}".format(
                ', '.join(missing)))
        for name in names:
            if regions[name].physics != layout.physics:
                raise ValidationError("region '{}' has {} moduli".format(
                    name, regions[name].physics))
        self.layout = layout
        self.regions = dict(regions)
        k1, k2 = layout.block_sizes
        primal = np.array([_fit(regions[n].primal, k1, regions[n].names[0])
                           for n in names])
        dual = np.array([_fit(regions[n].dual, k2, regions[n].names[1])
                         for n in names])
        self.primal_tensors = self._spread(primal, layout.block_kind(1))
        self.dual_tensors = self._spread(dual, layout.block_kind(2))

    def _spread(self, stack, kind):
        """Per-entity tensors from per-region ones."""
        mesh = self.layout.mesh
        if kind == CELL:
            return stack[mesh.tags]
        shares = np.zeros((mesh.n_nodes, len(stack)))
        for node, counter in enumerate(mesh.node_regions()):
            for tag, share in counter.items():
                shares[node, tag] = share
        shares /= shares.sum(axis=1, keepdims=True)
        return np.tensordot(shares, stack, axes=(1, 0))

    @property
    def moduli(self):
        """Region moduli in mesh region order."""
        return [self.regions[name] for name in self.layout.mesh.region_names]

    def check(self, allow_lossless_dual=False):
        """Raise PassivityError for the first region failing passivity."""
        for name in self.layout.mesh.region_names:
            moduli = self.regions[name]
            report = check_passivity(moduli)
            report.region = moduli.region or name
            if allow_lossless_dual:
                if report.primal.status != STRICT:
                    raise PassivityError(report.primal.name, report.region,
                                         report.primal.min_eigenvalue)
                lossless_limit(moduli)
            else:
                report.raise_for_violation()

    def operator(self):
        """Strictly positive-definite MediumOperator."""
        self.check()
        primal_sign, dual_sign = SIGNS[self.layout.physics]
        return MediumOperator(
            self.layout, legendre_blocks(self.primal_tensors, primal_sign),
            legendre_blocks(self.dual_tensors, dual_sign))

    def reduced_operator(self):
        """Operator of the reduced form with a lossless dual tensor."""
        self.check(allow_lossless_dual=True)
        primal_sign, _ = SIGNS[self.layout.physics]
        (k2, n2) = self.layout.block_sizes[1], self.layout.block_counts[1]
        return MediumOperator(
            self.layout, legendre_blocks(self.primal_tensors, primal_sign),
            np.zeros((n2, 2 * k2, 2 * k2)))

    def region_blocks(self, name):
        """Positive-definite blocks of one region, sized for the layout."""
        moduli = self.regions[name]
        primal_sign, dual_sign = SIGNS[self.layout.physics]
        k1, k2 = self.layout.block_sizes
        primal = _fit(moduli.primal, k1, moduli.names[0])
        dual = _fit(moduli.dual, k2, moduli.names[1])
        return (legendre_block(primal, primal_sign),
                legendre_block(dual, dual_sign))

    def reduced_form(self):
        """Elimination of the second block of a lossless medium."""
        self.check(allow_lossless_dual=True)
        return ReducedFormSpec(self.layout.physics,
                               self.dual_tensors.real.copy(),
                               self.layout.omega)

    @property
    def lossless(self):
        """True when no region has loss in its dual tensor."""
        scale = max(np.abs(self.dual_tensors).max(), 1e-300)
        return bool(np.abs(self.dual_tensors.imag).max() <= 1e-14 * scale)

    def rotated(self, theta):
        """Medium with all tensors multiplied by exp(i theta)."""
        return Medium(self.layout, {
            name: rotate_moduli(moduli, theta)[0]
            for name, moduli in self.regions.items()})

    def choose_rotation(self):
        """Global phase with the best passivity margin over regions."""
        return choose_rotation(self.moduli)
