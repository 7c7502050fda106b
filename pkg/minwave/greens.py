"""Green's function of a homogeneous comparison medium filling all space.

The comparison medium is given by its D/Q parameters (see
hs.ComparisonMedium). Displacements are stacked as U = (u', u'') and the
Green's function satisfies div(D grad G) + w^2 Q G = -delta I, with
D = [[D2, D1], [D1^T, -D3]] acting on strains and
Q = [[Q2, Q1], [Q1^T, -Q3]].

G is split into a static part, concentrated on the great circle
orthogonal to x, and a smooth part integrated over the sphere of plane-wave
directions. Both are differentiated analytically.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
import numpy as np
import scipy.linalg
from minwave.const import (SINGULAR_RADIUS, BRANCH_CLUSTER,
                           DIRECTION_PERTURBATION, VOXELS_PER_DECAY,
                           DEFAULT_POLAR_ORDER, GREAT_CIRCLE_ORDER)
from minwave.exceptions import (ValidationError, SingularityError,
                                DefectiveBranchError)
from minwave.moduli import mandel_pairs
from minwave.util import thread_count

LOGGER = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi
EIGHT_PI_SQUARED = 8.0 * np.pi ** 2
SNAP = 1e-12
CONDITION_LIMIT = 1e10


def strain_map(strain_size, size):
    """Strain operator as an array E with e_m = E[m, i, j] d_j u_i."""
    if (strain_size, size) == (6, 3):
        pairs, weights = mandel_pairs(3)
        emap = np.zeros((6, 3, 3))
        for row, ((i, j), weight) in enumerate(zip(pairs, weights)):
            if i == j:
                emap[row, i, i] = 1.0
            else:
                emap[row, i, j] = emap[row, j, i] = 0.5 * weight
        return emap
    if (strain_size, size) == (3, 1):
        emap = np.zeros((3, 1, 3))
        for j in range(3):
            emap[j, 0, j] = 1.0
        return emap
    raise ValidationError(
        "no three-dimensional strain operator maps {} displacement "
        "components to {} strain components".format(size, strain_size))


class PlaneOperator(object):
    """Direction-dependent matrices of a comparison medium."""

    def __init__(self, comparison):
        """Precompute the strain map and the stacked Q matrix."""
        self.comparison = comparison
        self.d1 = comparison.d1
        self.d2 = comparison.d2
        self.d3 = comparison.d3
        self.strain_size = self.d2.shape[0]
        self.size = comparison.q2.shape[0]
        self.emap = strain_map(self.strain_size, self.size)
        self.mass = np.block([[comparison.q2, comparison.q1],
                              [comparison.q1.T, -comparison.q3]])
        self.mass_inverse = np.linalg.inv(self.mass)

    @property
    def block_size(self):
        """Rows of G."""
        return 2 * self.size

    def pair(self, first, second):
        """Symmetric bilinear form B(a, b); N(x) = B(x, x).

        Directions broadcast over leading axes.
        """
        first = np.asarray(first, dtype=float)
        second = np.asarray(second, dtype=float)
        left = np.einsum('mij,...j->...mi', self.emap, first)
        right = np.einsum('mij,...j->...mi', self.emap, second)

        def form(tensor):
            return np.einsum('...mi,mp,...pk->...ik', left, tensor, right)

        top = np.concatenate([form(self.d2), form(self.d1)], axis=-1)
        bottom = np.concatenate([form(self.d1.T), -form(self.d3)], axis=-1)
        return np.concatenate([top, bottom], axis=-2)

    def matrix(self, direction):
        """N(direction)."""
        return self.pair(direction, direction)


def _plane(comparison):
    """PlaneOperator for a comparison medium or an existing operator."""
    if isinstance(comparison, PlaneOperator):
        return comparison
    return PlaneOperator(comparison)


def _frame(axis):
    """Orthonormal frame (axis, e1, e2)."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(axis)))] = 1.0
    first = helper - helper.dot(axis) * axis
    first /= np.linalg.norm(first)
    return axis, first, np.cross(axis, first)


class SphereRule(object):
    """Product quadrature on the unit sphere aligned with a chosen axis.

    Gauss-Legendre in the cosine of the polar angle and the trapezoid rule
    in azimuth. Only the hemisphere around the axis is sampled; integrands
    must be even under a change of sign of the direction.
    """

    def __init__(self, polar_order=DEFAULT_POLAR_ORDER, azimuth_order=None,
                 circle_order=GREAT_CIRCLE_ORDER):
        """Build nodes and weights."""
        polar_order = int(polar_order)
        if polar_order < 2 or polar_order % 2:
            raise ValidationError("polar quadrature order must be an even "
                                  "number of at least 2, got {}".format(
                                      polar_order))
        azimuth_order = (2 * polar_order if azimuth_order is None
                         else int(azimuth_order))
        circle_order = int(circle_order)
        if azimuth_order < 3 or circle_order < 3:
            raise ValidationError("azimuth and circle orders must be >= 3")
        self.polar_order = polar_order
        self.azimuth_order = azimuth_order
        self.circle_order = circle_order
        nodes, weights = np.polynomial.legendre.leggauss(polar_order // 2)
        self.cosines = 0.5 * (nodes + 1.0)
        self.cosine_weights = weights
        self.azimuths = 2.0 * np.pi * np.arange(azimuth_order) / azimuth_order
        self.circle = 2.0 * np.pi * np.arange(circle_order) / circle_order

    @classmethod
    def from_order(cls, order):
        """Rule from an integer order or an existing rule."""
        if isinstance(order, SphereRule):
            return order
        return cls(DEFAULT_POLAR_ORDER if order is None else order)

    @property
    def order(self):
        """(polar, azimuth) orders."""
        return self.polar_order, self.azimuth_order

    def doubled(self):
        """Rule with every order doubled."""
        return SphereRule(2 * self.polar_order, 2 * self.azimuth_order,
                          2 * self.circle_order)

    def hemisphere(self, axis):
        """Directions, cosines to the axis and full-sphere weights."""
        axis, first, second = _frame(axis)
        cosines = np.repeat(self.cosines, self.azimuth_order)
        azimuths = np.tile(self.azimuths, self.polar_order // 2)
        sines = np.sqrt(1.0 - cosines ** 2)
        directions = (cosines[:, None] * axis +
                      (sines * np.cos(azimuths))[:, None] * first +
                      (sines * np.sin(azimuths))[:, None] * second)
        weights = (np.repeat(self.cosine_weights, self.azimuth_order) *
                   2.0 * np.pi / self.azimuth_order)
        return directions, cosines, weights

    def great_circle(self, axis):
        """Directions orthogonal to the axis and trapezoid weights."""
        _, first, second = _frame(axis)
        directions = (np.cos(self.circle)[:, None] * first +
                      np.sin(self.circle)[:, None] * second)
        weights = np.full(self.circle_order, 2.0 * np.pi / self.circle_order)
        return directions, weights


class EigenBranch(object):
    """Plane-wave branch: N(xi) U = c^2 Q U with U^T Q U = 1 and Im c > 0."""

    def __init__(self, direction, index, speed, vector, mass):
        """Store the branch and its normalization value."""
        self.direction = np.asarray(direction, dtype=float)
        self.index = index
        self.speed = complex(speed)
        self.vector = np.asarray(vector, dtype=complex)
        self.normalization = complex(self.vector.dot(mass).dot(self.vector))

    @property
    def squared_speed(self):
        """c^2."""
        return self.speed ** 2

    def decay_length(self, omega):
        """Distance over which the plane wave decays by a factor e."""
        return abs(self.speed) ** 2 / (omega * self.speed.imag)

    def __repr__(self):
        """Short description."""
        return "EigenBranch(index={}, speed={:.6g})".format(self.index,
                                                            self.speed)


class BranchCluster(object):
    """Branches sharing one eigenvalue, with their projector sum U U^T."""

    def __init__(self, speed, branches, projector):
        """Store the cluster."""
        self.speed = speed
        self.branches = branches
        self.projector = projector

    @property
    def weight(self):
        """Projector divided by c^2."""
        return self.projector / self.speed ** 2


def _groups(values, scale):
    """Index groups of eigenvalues closer than the clustering tolerance."""
    order = sorted(range(len(values)),
                   key=lambda i: (values[i].real, values[i].imag))
    groups = []
    for index in order:
        if groups and abs(values[index] - values[groups[-1][0]]) <= \
                BRANCH_CLUSTER * scale:
            groups[-1].append(index)
        else:
            groups.append([index])
    return groups


def _decompose(plane, direction):
    """Clusters of normalized branches in one direction."""
    values, vectors = scipy.linalg.eig(plane.matrix(direction), plane.mass)
    if not np.all(np.isfinite(values)):
        raise SingularityError("comparison mass matrix is singular")
    scale = max(float(np.max(np.abs(values))), 1e-300)
    values = np.where(np.abs(values.imag) <= SNAP * scale, values.real,
                      values)
    clusters = []
    for group in _groups(values, scale):
        value = complex(np.mean(values[group]))
        if value.imag == 0.0 and value.real >= 0.0:
            raise ValidationError(
                "comparison medium admits an undamped plane wave along {} "
                "(c^2 = {:.6g})".format(list(direction), value.real))
        speed = np.sqrt(value)
        if speed.imag < 0.0:
            speed = -speed
        basis = vectors[:, group]
        gram = basis.T.dot(plane.mass).dot(basis)
        if np.linalg.cond(gram) > CONDITION_LIMIT:
            raise DefectiveBranchError(direction)
        if len(group) == 1:
            root = np.sqrt(gram)
        else:
            root = scipy.linalg.sqrtm(gram)
        normalized = basis.dot(np.linalg.inv(root))
        projector = basis.dot(np.linalg.solve(gram, basis.T))
        branches = [EigenBranch(direction, 0, speed, normalized[:, col],
                                plane.mass)
                    for col in range(len(group))]
        clusters.append(BranchCluster(speed, branches, projector))
    return clusters


def _decompose_robust(plane, direction):
    """_decompose, retried once at a slightly tilted direction."""
    try:
        return _decompose(plane, direction)
    except DefectiveBranchError:
        _, tilt, _ = _frame(direction)
        moved = direction + DIRECTION_PERTURBATION * tilt
        moved /= np.linalg.norm(moved)
        LOGGER.warning("Degenerate branches along %s, retrying at a "
                       "direction tilted by %g", list(direction),
                       DIRECTION_PERTURBATION)
        try:
            return _decompose(plane, moved)
        except DefectiveBranchError:
            raise DefectiveBranchError(direction)


def branch_eigen(direction, comparison):
    """Normalized plane-wave branches along a unit direction.

    Sorted by (Re c^2, Im c^2).
    """
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (3,) or \
            abs(np.linalg.norm(direction) - 1.0) > 1e-12:
        raise ValidationError("branch direction must be a unit 3-vector")
    branches = []
    for cluster in _decompose_robust(_plane(comparison), direction):
        branches.extend(cluster.branches)
    for index, branch in enumerate(branches):
        branch.index = index
    return branches


def plane_wave_profile(branch, s, omega, load):
    """Decaying solution of c^2 phi'' + w^2 phi = -load delta(s)."""
    speed = branch.speed
    if speed.imag <= 0.0:
        raise ValidationError("plane-wave profile needs Im c > 0, "
                              "got c = {}".format(speed))
    distance = np.abs(np.asarray(s, dtype=float))
    return load * np.exp(-1j * omega * distance / speed) / \
        (2j * omega * speed)


def _circle_sums(plane, axis, radius, omega, rule, derivatives):
    """Static part and the great-circle term of the smooth second derivative."""
    zetas, weights = rule.great_circle(axis)
    inverse = np.linalg.inv(plane.matrix(zetas))
    plain = np.einsum('q,qab->ab', weights, inverse)
    value = plain / (EIGHT_PI_SQUARED * radius)
    first = second = None
    if derivatives >= 1:
        axes = np.broadcast_to(axis, zetas.shape)
        slope = plane.pair(axes, zetas) + plane.pair(zetas, axes)
        inverse_slope = -inverse @ slope @ inverse
        first = -(axis[:, None, None] * plain +
                  np.einsum('q,qj,qab->jab', weights, zetas, inverse_slope)) \
            / (EIGHT_PI_SQUARED * radius ** 2)
    if derivatives >= 2:
        curvature = 2.0 * plane.matrix(axis) - 2.0 * plane.matrix(zetas)
        inverse_curvature = inverse @ (
            2.0 * slope @ inverse @ slope - curvature) @ inverse
        mixed = (np.einsum('j,ql->qjl', axis, zetas) +
                 np.einsum('qj,l->qjl', zetas, axis))
        outer = np.einsum('qj,ql->qjl', zetas, zetas)
        second = (2.0 * np.einsum('j,l,ab->jlab', axis, axis, plain) -
                  2.0 * np.einsum('q,qjl,qab->jlab', weights, outer, inverse) +
                  2.0 * np.einsum('q,qjl,qab->jlab', weights, mixed,
                                  inverse_slope) +
                  np.einsum('q,qjl,qab->jlab', weights, outer,
                            inverse_curvature)) \
            / (EIGHT_PI_SQUARED * radius ** 3)
        if omega:
            squared = inverse @ plane.mass @ inverse
            second = second - omega ** 2 * np.einsum(
                'q,qjl,qab->jlab', weights, outer, squared) \
                / (EIGHT_PI_SQUARED * radius)
    return value, first, second


def _sphere_sums(plane, axis, radius, omega, rule, derivatives):
    """Smooth part of G and its derivatives by hemisphere quadrature."""
    size = plane.block_size
    value = np.zeros((size, size), dtype=complex)
    first = np.zeros((3, size, size), dtype=complex)
    second = np.zeros((3, 3, size, size), dtype=complex)
    if not omega:
        return value, first, second
    directions, cosines, weights = rule.hemisphere(axis)
    for direction, cosine, weight in zip(directions, cosines, weights):
        for cluster in _decompose_robust(plane, direction):
            kappa = 1j * omega / cluster.speed
            term = weight * np.exp(-kappa * radius * cosine) * cluster.weight
            value += -0.5 * kappa * term
            if derivatives >= 1:
                first += 0.5 * kappa ** 2 * np.einsum('j,ab->jab', direction,
                                                      term)
            if derivatives >= 2:
                second += -0.5 * kappa ** 3 * np.einsum(
                    'j,l,ab->jlab', direction, direction, term)
    return (value / EIGHT_PI_SQUARED, first / EIGHT_PI_SQUARED,
            second / EIGHT_PI_SQUARED)


class GreensEvaluation(object):
    """G at one point with optional first and second derivatives."""

    def __init__(self, point, value, first=None, second=None, order=None,
                 residue=0.0):
        """Store the evaluation."""
        self.point = np.asarray(point, dtype=float)
        self.value = value
        self.first = first
        self.second = second
        self.order = order
        self.residue = float(residue)

    @property
    def size(self):
        """Displacement components."""
        return self.value.shape[0] // 2

    @property
    def g2(self):
        """Block coupling u' to u'."""
        return self.value[:self.size, :self.size]

    @property
    def g1(self):
        """Block coupling u' to u''."""
        return self.value[:self.size, self.size:]

    @property
    def g3(self):
        """Minus the block coupling u'' to u''."""
        return -self.value[self.size:, self.size:]

    def asymmetry(self):
        """Relative distance between G and its transpose."""
        scale = max(float(np.linalg.norm(self.value)), 1e-300)
        return float(np.linalg.norm(self.value - self.value.T)) / scale


def _imaginary_residue(parts):
    """Largest imaginary entry relative to the largest entry."""
    residue = 0.0
    for part in parts:
        if part is None:
            continue
        scale = max(float(np.max(np.abs(part))), 1e-300)
        residue = max(residue, float(np.max(np.abs(part.imag))) / scale)
    return residue


def greens_evaluate(x, omega, comparison, order=DEFAULT_POLAR_ORDER,
                    derivatives=0):
    """Evaluate G(x), and derivatives up to the given order, for x != 0."""
    x = np.asarray(x, dtype=float)
    radius = float(np.linalg.norm(x))
    if radius < SINGULAR_RADIUS:
        raise SingularityError("Green's function evaluated at |x| = {:.3g}, "
                               "below {:g}".format(radius, SINGULAR_RADIUS))
    if derivatives not in (0, 1, 2):
        raise ValidationError("derivatives must be 0, 1 or 2")
    plane = _plane(comparison)
    rule = SphereRule.from_order(order)
    axis = x / radius
    static = _circle_sums(plane, axis, radius, omega, rule, derivatives)
    smooth = _sphere_sums(plane, axis, radius, omega, rule, derivatives)
    value = static[0] + smooth[0]
    first = None if derivatives < 1 else static[1] + smooth[1]
    second = None if derivatives < 2 else static[2] + smooth[2]
    residue = _imaginary_residue([value, first, second])
    LOGGER.debug("G at %s: residue %.3g", x, residue)
    return GreensEvaluation(
        x, value.real, None if first is None else first.real,
        None if second is None else second.real, rule.order, residue)


def static_greens(x, comparison, derivatives=0, order=GREAT_CIRCLE_ORDER):
    """Zero-frequency Green's function and derivatives at x != 0.

    Returns (value, first, second); missing derivatives are None.
    """
    x = np.asarray(x, dtype=float)
    radius = float(np.linalg.norm(x))
    if radius < SINGULAR_RADIUS:
        raise SingularityError("static Green's function evaluated at the "
                               "origin")
    rule = SphereRule(circle_order=order)
    return _circle_sums(_plane(comparison), x / radius, radius, 0.0, rule,
                        derivatives)


def greens_table(points, omega, comparison, order=DEFAULT_POLAR_ORDER):
    """Rows (x, y, z, row, col, value) of G at every point."""
    plane = _plane(comparison)
    rule = SphereRule.from_order(order)
    points = np.atleast_2d(np.asarray(points, dtype=float))

    def evaluate(point):
        return greens_evaluate(point, omega, plane, rule)

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        evaluations = list(pool.map(evaluate, points))
    rows = []
    for evaluation in evaluations:
        if evaluation.residue > 1e-10:
            LOGGER.warning("G at %s keeps an imaginary residue of %.3g",
                           evaluation.point, evaluation.residue)
        for (row, col), value in np.ndenumerate(evaluation.value):
            rows.append((evaluation.point[0], evaluation.point[1],
                         evaluation.point[2], row, col, value))
    LOGGER.info("Evaluated G at %d points", len(evaluations))
    return rows


def self_voxel(spacing, omega, comparison, order=DEFAULT_POLAR_ORDER):
    """Integrals of G and its second derivatives over one voxel.

    The voxel is replaced by the ball of equal volume. The integral of the
    first derivatives vanishes. Returns (value, second).
    """
    plane = _plane(comparison)
    rule = SphereRule.from_order(order)
    volume = spacing ** 3
    radius = (3.0 * volume / FOUR_PI) ** (1.0 / 3.0)
    axis = np.array([0.0, 0.0, 1.0])
    directions, _, weights = rule.hemisphere(axis)
    inverse = np.linalg.inv(plane.matrix(directions))
    outer = np.einsum('pj,pl->pjl', directions, directions)
    value = radius ** 2 / (2.0 * FOUR_PI) * np.einsum('p,pab->ab', weights,
                                                      inverse)
    second = -np.einsum('p,pjl,pab->jlab', weights, outer, inverse) / FOUR_PI
    if omega:
        squared = inverse @ plane.mass @ inverse
        second = second - omega ** 2 * radius ** 2 / (2.0 * FOUR_PI) * \
            np.einsum('p,pjl,pab->jlab', weights, outer, squared)
        smooth = _sphere_sums(plane, axis, 0.0, omega, rule, 2)
        value = value + volume * smooth[0].real
        second = second + volume * smooth[2].real
    return value, second


class VoxelGrid(object):
    """Cubic voxels of one spacing centred at given points."""

    def __init__(self, centers, spacing):
        """Store centres."""
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        if self.centers.shape[1] != 3:
            raise ValidationError("voxel centres must be 3-vectors")
        self.spacing = float(spacing)
        if self.spacing <= 0.0:
            raise ValidationError("voxel spacing must be positive")

    @classmethod
    def box(cls, shape, spacing, origin=(0.0, 0.0, 0.0)):
        """Regular block of voxels."""
        axes = [origin[i] + spacing * np.arange(shape[i]) for i in range(3)]
        mesh = np.meshgrid(*axes, indexing='ij')
        return cls(np.stack([m.ravel() for m in mesh], axis=1), spacing)

    @property
    def count(self):
        """Number of voxels."""
        return self.centers.shape[0]

    @property
    def volume(self):
        """Volume of one voxel."""
        return self.spacing ** 3


def polarization_size(comparison):
    """Entries per voxel of a polarization (tau'', -eta'', pi', -nu')."""
    plane = _plane(comparison)
    return 2 * plane.strain_size + 2 * plane.size


def _slices(plane):
    """Slices of tau'', -eta'', pi' and -nu' in a voxel polarization."""
    k, n = plane.strain_size, plane.size
    return (slice(0, k), slice(k, 2 * k), slice(2 * k, 2 * k + n),
            slice(2 * k + n, 2 * k + 2 * n))


def _source_maps(plane, omega):
    """Linear maps from a voxel polarization to the load and its flux parts.

    The load collects the undifferentiated terms of the effective force;
    the flux parts are contracted with first derivatives of G.
    """
    k, n = plane.strain_size, plane.size
    width = 2 * k + 2 * n
    tau, eta, pol, nu = _slices(plane)
    comparison = plane.comparison
    load = np.zeros((2 * n, width))
    load[:n, pol] = -omega * np.eye(n)
    load[:n, nu] = -omega * comparison.q1
    load[n:, nu] = omega * comparison.q3
    stress = np.zeros((k, width))
    stress[:, tau] = np.eye(k)
    stress[:, eta] = plane.d1
    dual = np.zeros((k, width))
    dual[:, eta] = -plane.d3
    flux = np.concatenate([np.einsum('mij,mw->jiw', plane.emap, stress),
                           np.einsum('mij,mw->jiw', plane.emap, dual)],
                          axis=1)
    return load, flux


def _local_map(plane):
    """Pointwise part of the increment: D3 eta'' in sigma', -Q3 nu' in p''."""
    width = 2 * plane.strain_size + 2 * plane.size
    _, eta, _, nu = _slices(plane)
    local = np.zeros((width, width))
    local[eta, eta] = -plane.d3
    local[nu, nu] = plane.comparison.q3
    return local


def _recover(plane, omega, displacement, gradient):
    """Increment (e', sigma', w u', p'') from U and its gradient.

    Trailing axes are carried through.
    """
    n = plane.size
    comparison = plane.comparison
    strain_re = np.einsum('mil,li...->m...', plane.emap, gradient[:, :n])
    strain_im = np.einsum('mil,li...->m...', plane.emap, gradient[:, n:])
    stress = (np.tensordot(plane.d1.T, strain_re, axes=1) -
              np.tensordot(plane.d3, strain_im, axes=1))
    momentum = omega * (np.tensordot(comparison.q1.T, displacement[:n],
                                     axes=1) -
                        np.tensordot(comparison.q3, displacement[n:],
                                     axes=1))
    return np.concatenate([strain_re, stress, omega * displacement[:n],
                           momentum], axis=0), strain_re + 1j * strain_im


def _check_resolution(grid, plane, omega):
    """Warn when voxels are coarse against the shortest decay length."""
    if not omega:
        return
    shortest = np.inf
    for direction in np.eye(3):
        for cluster in _decompose_robust(plane, direction):
            shortest = min(shortest, cluster.branches[0].decay_length(omega))
    if grid.spacing * VOXELS_PER_DECAY > shortest:
        LOGGER.warning("Voxel spacing %.3g resolves the decay length %.3g "
                       "with fewer than %d voxels", grid.spacing, shortest,
                       VOXELS_PER_DECAY)


def _pair_kernels(grid, plane, omega, rule):
    """Voxel-integrated (G, dG, ddG) for every ordered pair of voxels."""
    pairs = [(a, b) for a in range(grid.count) for b in range(a + 1,
                                                              grid.count)]

    def evaluate(pair):
        a, b = pair
        return greens_evaluate(grid.centers[a] - grid.centers[b], omega,
                               plane, rule, derivatives=2)

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        evaluations = list(pool.map(evaluate, pairs))
    volume = grid.volume
    kernels = {}
    for (a, b), evaluation in zip(pairs, evaluations):
        value, first = volume * evaluation.value, volume * evaluation.first
        second = volume * evaluation.second
        kernels[a, b] = (value, first, second)
        kernels[b, a] = (value, -first, second)
    own_value, own_second = self_voxel(grid.spacing, omega, plane, rule)
    own_first = np.zeros((3,) + own_value.shape)
    for a in range(grid.count):
        kernels[a, a] = (own_value, own_first, own_second)
    LOGGER.debug("Built Green's kernels for %d voxels", grid.count)
    return kernels


class InfiniteMediumField(object):
    """Fields of the comparison medium driven by voxel sources."""

    def __init__(self, grid, displacement, strain, increment):
        """Store per-voxel fields."""
        self.grid = grid
        self.displacement = displacement
        self.strain = strain
        self.increment = increment

    def _part(self, start, stop):
        return self.increment[:, start:stop]

    @property
    def stress(self):
        """sigma' per voxel."""
        k = self.strain.shape[1]
        return self._part(k, 2 * k)

    @property
    def momentum(self):
        """p'' per voxel."""
        n = self.displacement.shape[1]
        return self._part(self.increment.shape[1] - n, None)


def _voxel_inputs(grid, plane, polarization, force):
    """Polarization array and complex force array with checked shapes."""
    width = 2 * plane.strain_size + 2 * plane.size
    polarization = (np.zeros((grid.count, width)) if polarization is None
                    else np.asarray(polarization, dtype=float))
    if polarization.shape != (grid.count, width):
        raise ValidationError("polarization must have shape {}".format(
            (grid.count, width)))
    force = (np.zeros((grid.count, plane.size), dtype=complex)
             if force is None else np.asarray(force, dtype=complex))
    if force.shape != (grid.count, plane.size):
        raise ValidationError("body force must have shape {}".format(
            (grid.count, plane.size)))
    return polarization, force


def solve_infinite_medium(polarization, force, comparison, omega, grid,
                          order=DEFAULT_POLAR_ORDER, kernels=None):
    """Fields of the infinite comparison medium for voxel sources.

    polarization holds (tau'', -eta'', pi', -nu') per voxel and force the
    complex body force f' + i f''. Divergences of the polarization are moved
    onto G by integration by parts.
    """
    plane = _plane(comparison)
    rule = SphereRule.from_order(order)
    polarization, force = _voxel_inputs(grid, plane, polarization, force)
    _check_resolution(grid, plane, omega)
    if kernels is None:
        kernels = _pair_kernels(grid, plane, omega, rule)
    load_map, flux_map = _source_maps(plane, omega)
    loads = polarization.dot(load_map.T) + np.concatenate(
        [force.imag, force.real], axis=1)
    fluxes = np.einsum('jaw,mw->mja', flux_map, polarization)
    local = _local_map(plane)
    n = plane.size
    displacement = np.zeros((grid.count, n), dtype=complex)
    strain = np.zeros((grid.count, plane.strain_size), dtype=complex)
    increment = np.zeros_like(polarization)
    for a in range(grid.count):
        stacked = np.zeros(2 * n)
        gradient = np.zeros((3, 2 * n))
        for b in range(grid.count):
            value, first, second = kernels[a, b]
            stacked += value.dot(loads[b]) + np.einsum('jab,jb->a', first,
                                                       fluxes[b])
            gradient += (np.einsum('lab,b->la', first, loads[b]) +
                         np.einsum('jlab,jb->la', second, fluxes[b]))
        increment[a], strain[a] = _recover(plane, omega, stacked, gradient)
        increment[a] += local.dot(polarization[a])
        displacement[a] = stacked[:n] + 1j * stacked[n:]
    return InfiniteMediumField(grid, displacement, strain, increment)


class InfiniteH0(object):
    """Dense H0 of the infinite comparison medium on a voxel grid.

    H0 maps a polarization to minus the field increment it causes.
    """

    def __init__(self, grid, comparison, omega, order=DEFAULT_POLAR_ORDER):
        """Assemble the matrix."""
        self.grid = grid
        self.plane = _plane(comparison)
        self.omega = omega
        rule = SphereRule.from_order(order)
        _check_resolution(grid, self.plane, omega)
        self.kernels = _pair_kernels(grid, self.plane, omega, rule)
        self.width = polarization_size(self.plane)
        self.matrix = self._assemble()

    def _assemble(self):
        """Blocks -R(G load + dG flux) - local per voxel pair."""
        plane, width = self.plane, self.width
        load_map, flux_map = _source_maps(plane, self.omega)
        local = _local_map(plane)
        count = self.grid.count
        matrix = np.zeros((count * width, count * width))
        for (a, b), (value, first, second) in self.kernels.items():
            stacked = value.dot(load_map) + np.einsum('jab,jbw->aw', first,
                                                      flux_map)
            gradient = (np.einsum('lab,bw->law', first, load_map) +
                        np.einsum('jlab,jbw->law', second, flux_map))
            block, _ = _recover(plane, self.omega, stacked, gradient)
            if a == b:
                block = block + local
            matrix[a * width:(a + 1) * width,
                   b * width:(b + 1) * width] = -block
        return matrix

    @property
    def weights(self):
        """Quadrature weight of every polarization entry."""
        return np.full(self.matrix.shape[0], self.grid.volume)

    def apply(self, polarization):
        """H0 T for a (voxels, entries) polarization array."""
        polarization = np.asarray(polarization, dtype=float)
        return self.matrix.dot(polarization.ravel()).reshape(
            polarization.shape)

    def asymmetry(self):
        """Relative distance between H0 and its transpose."""
        scale = max(float(np.linalg.norm(self.matrix)), 1e-300)
        return float(np.linalg.norm(self.matrix - self.matrix.T)) / scale


def apply_H0(polarization, comparison, omega, grid, order=DEFAULT_POLAR_ORDER):
    """H0 T on a voxel grid; the field increment is minus the result."""
    return InfiniteH0(grid, comparison, omega, order).apply(polarization)
