"""Values, gradients and boundary identities of the minimization functional."""
import logging
import numpy as np
from minwave.const import ELASTIC, ACOUSTIC
from minwave.exceptions import ValidationError
from minwave.fields import apply_constitutive

LOGGER = logging.getLogger(__name__)


class FunctionalValue(object):
    """Volume and boundary contributions of a functional evaluation."""

    def __init__(self, volume_term, boundary_term):
        """Store terms."""
        self.volume_term = float(volume_term)
        self.boundary_term = float(boundary_term)

    @property
    def total(self):
        """Sum of both terms."""
        return self.volume_term + self.boundary_term

    def __repr__(self):
        """Short description."""
        return "FunctionalValue(total={:.12g}, volume={:.12g}, " \
            "boundary={:.12g})".format(self.total, self.volume_term,
                                       self.boundary_term)


class DissipationReport(object):
    """Mean rate of energy loss split into its two tensor contributions."""

    def __init__(self, stiffness_part, inertial_part):
        """Store parts."""
        self.stiffness_part = float(stiffness_part)
        self.inertial_part = float(inertial_part)

    @property
    def mean_power(self):
        """Total mean dissipated power."""
        return self.stiffness_part + self.inertial_part


def _check(field, source):
    """Field and source must share a layout."""
    if source is not None and source.layout is not field.layout:
        raise ValidationError("field and source data live on different meshes")


def _quadratic(field, operator):
    """Weighted F . L F."""
    dual = apply_constitutive(field, operator)
    return float(np.sum(field.layout.weights * field.values * dual.values))


def _boundary_pairing(field, source):
    """Surface pairing of the trial unknowns with the boundary data."""
    layout = field.layout
    scale_a, scale_b = layout.scales
    return (-scale_a * layout.pairing(field.nodal, source.trace) +
            scale_b * layout.pairing(source.nodal, field.trace))


def evaluate_functional(field, operator, source):
    """Integral of -G0.F + F.L.F/2 with the mesh quadrature.

    When the field carries its nodal and trace unknowns, the part of the
    data pairing that integrates out to the boundary is reported as the
    boundary term. A bare quadruple has no boundary term.
    """
    _check(field, source)
    weights = field.layout.weights
    linear = float(np.sum(weights * source.values * field.values))
    total = 0.5 * _quadratic(field, operator) - linear
    if field.nodal is None or field.trace is None:
        return FunctionalValue(total, 0.0)
    boundary = _boundary_pairing(field, source)
    return FunctionalValue(total - boundary, boundary)


def _source_terms(layout, field, source):
    """(field-dependent, constant) source contributions to sum(w G0.F)."""
    nodal_target = source.nodal
    f_primal, f_dual = source.primal_force, source.dual_force
    w = layout.omega
    if layout.physics == ELASTIC:
        return (layout.source_product(field.nodal, f_dual),
                -layout.source_product(nodal_target, f_primal))
    if layout.physics == ACOUSTIC:
        return (w * layout.cell_product(field.cell, f_dual),
                w * layout.cell_product(source.cell, f_primal))
    return (-layout.node_product(field.nodal, f_dual) / w,
            -layout.node_product(nodal_target, f_primal) / w)


def evaluate_boundary_form(field, operator, source):
    """Equivalent functional with the data entering through the boundary.

    Differs from evaluate_functional by a constant that depends on the
    data only.
    """
    _check(field, source)
    if field.nodal is None or field.trace is None:
        raise ValidationError("boundary form needs a completed trial field")
    varying, _ = _source_terms(field.layout, field, source)
    return FunctionalValue(0.5 * _quadratic(field, operator) - varying,
                           _boundary_pairing(field, source))


def data_constant(field, source):
    """evaluate_functional minus evaluate_boundary_form."""
    _, constant = _source_terms(field.layout, field, source)
    return -constant


class Cotangent(object):
    """Gradient with respect to the nodal, cellwise and trace unknowns."""

    def __init__(self, nodal, cell, trace):
        """Store parts."""
        self.nodal = nodal
        self.cell = cell
        self.trace = trace

    @property
    def vector(self):
        """All parts stacked."""
        return np.concatenate([self.nodal, self.cell, self.trace])

    def norm(self):
        """Euclidean norm."""
        return float(np.linalg.norm(self.vector))


def gradient(field, operator, source, bc=None):
    """Derivative of evaluate_functional in the free primary unknowns.

    Entries fixed by essential conditions are zero.
    """
    _check(field, source)
    layout = field.layout
    residual = layout.weights * (
        apply_constitutive(field, operator).values - source.values)
    maps = layout.primal_map
    nodal = maps['a'].T.dot(residual)
    cell = maps['b'].T.dot(residual)
    trace = maps['t'].T.dot(residual)
    spec = source.spec if bc is None else bc
    nodal[layout.trace_index[spec.primal_essential]] = 0.0
    trace[spec.trace_essential] = 0.0
    return Cotangent(nodal, cell, trace)


class SurfaceData(object):
    """Complex nodal field and flux traces on the boundary."""

    def __init__(self, layout, primal, flux):
        """Store per-trace-entry complex values."""
        self.layout = layout
        self.primal = np.asarray(primal, dtype=complex)
        self.flux = np.asarray(flux, dtype=complex)
        if self.primal.shape != (layout.n_trace,) or \
                self.flux.shape != (layout.n_trace,):
            raise ValidationError("surface data must cover every boundary "
                                  "entry ({} values)".format(layout.n_trace))

    @classmethod
    def from_fields(cls, fields):
        """Boundary restriction of complex fields."""
        layout = fields.layout
        return cls(layout, fields.nodal[layout.trace_index], fields.trace)

    def parts(self):
        """Real (a, a-dual, tau, tau-dual) boundary values."""
        primal, flux = self.primal, self.flux
        if self.layout.physics == ELASTIC:
            return primal.real, primal.imag, flux.real, flux.imag
        return primal.real, primal.imag, flux.imag, flux.real


def _pair(layout, first, second):
    """Surface-weighted sum over boundary entries."""
    return float(np.sum(layout.surface_w * first * second))


def minimum_value_surface(surface, source):
    """Minimum of the functional from boundary values alone (no force)."""
    layout = surface.layout
    if source.has_force:
        raise ValidationError("minimum value from surface data needs a zero "
                              "body force; use evaluate_functional instead")
    scale_a, scale_b = layout.scales
    a, a_dual, tau, tau_dual = surface.parts()
    target_trace = source.trace
    target_nodal = source.nodal[layout.trace_index]
    return (0.5 * scale_a * _pair(layout, a, tau_dual - 2.0 * target_trace) +
            0.5 * scale_b * _pair(layout, 2.0 * target_nodal - a_dual, tau))


def tomography_slack(trial, measured, operator):
    """Gap in the bound on the Dirichlet-to-Neumann map.

    Non-negative for every force-free trial field when the measurements
    come from the medium described by ``operator``; zero at the solution.
    """
    layout = trial.layout
    if measured.layout is not layout:
        raise ValidationError("trial field and measurements differ in mesh")
    if trial.nodal is None or trial.trace is None:
        raise ValidationError("tomography needs a completed trial field")
    scale_a, scale_b = layout.scales
    a, a_dual, tau, tau_dual = measured.parts()
    trial_a = trial.nodal[layout.trace_index]
    bound = (0.5 * scale_a * _pair(layout, 2.0 * trial_a - a, tau_dual) +
             0.5 * scale_b * _pair(layout, a_dual, tau - 2.0 * trial.trace))
    return 0.5 * _quadratic(trial, operator) - bound


def _forms(tensors, vectors, weights):
    """Sum of weights * Re(conj(v) . Im(T) v) per entity."""
    size = tensors.shape[1]
    vectors = vectors.reshape(-1, size)
    values = np.einsum('ni,nij,nj->n', vectors.conj(), tensors.imag, vectors)
    return float(np.sum(weights * values.real))


def dissipation_rate(fields, medium, force=None):
    """Mean power absorbed by the medium for complex fields."""
    layout = fields.layout
    w = layout.omega
    mesh = layout.mesh
    grad = layout.gradient.dot(fields.nodal)
    if layout.physics == ELASTIC:
        stiffness = 0.5 * w * _forms(medium.primal_tensors, grad, mesh.volumes)
        inertial = -0.5 * w ** 3 * _forms(medium.dual_tensors, fields.nodal,
                                          mesh.node_weights)
        return DissipationReport(stiffness, inertial)
    if layout.physics == ACOUSTIC:
        force = np.zeros(layout.source_size) if force is None else force
        momentum = (force - grad) / (1j * w)
        stiffness = -0.5 * w * _forms(medium.primal_tensors, fields.nodal,
                                      mesh.node_weights)
        inertial = 0.5 * w * _forms(medium.dual_tensors, momentum,
                                    mesh.volumes)
        return DissipationReport(stiffness, inertial)
    induction = grad / (1j * w)
    stiffness = 0.5 * w * _forms(medium.primal_tensors, fields.nodal,
                                 mesh.node_weights)
    inertial = -0.5 * w * _forms(medium.dual_tensors, induction, mesh.volumes)
    return DissipationReport(stiffness, inertial)


def boundary_power(fields, force=None):
    """Mean working rate of boundary fluxes and body sources."""
    layout = fields.layout
    force = (np.zeros(layout.source_size, dtype=complex) if force is None
             else np.asarray(force, dtype=complex))
    boundary = fields.nodal[layout.trace_index]
    surface = np.sum(layout.surface_w * fields.trace * boundary.conj())
    if layout.physics == ELASTIC:
        body = np.sum(layout.node_w * force * fields.nodal.conj())
        return float(0.5 * layout.omega * (surface + body).imag)
    if layout.physics == ACOUSTIC:
        body = np.sum(layout.cell_w * force * fields.cell.conj())
        return float(0.5 * body.real - 0.5 * np.conj(surface).real)
    body = np.sum(layout.node_w * force * fields.nodal.conj())
    return float(-0.5 * body.real - 0.5 * np.conj(surface).real)


def relative_scale(*arrays):
    """Product of Euclidean norms used to scale tolerances."""
    scale = 1.0
    for array in arrays:
        scale *= max(float(np.linalg.norm(array)), 1e-300)
    return scale

