"""Real positive-definite block operators built from complex moduli."""
import logging
import numpy as np
from minwave.const import (ELASTIC, ACOUSTIC, ELECTROMAGNETIC, PHYSICS,
                           CONVENTION_PLUS, CONVENTION_MINUS,
                           STRICT_RELATIVE, THETA_SCAN_POINTS)
from minwave.exceptions import ValidationError, PassivityError

LOGGER = logging.getLogger(__name__)

STRICT = 'strict'
SEMIDEFINITE = 'semidefinite'
VIOLATED = 'violated'

# sign making the imaginary part positive definite, per (primal, dual)
SIGNS = {
    ELASTIC: (1.0, -1.0),
    ACOUSTIC: (-1.0, 1.0),
    ELECTROMAGNETIC: (1.0, -1.0),
}

TENSOR_NAMES = {
    ELASTIC: ('stiffness', 'density'),
    ACOUSTIC: ('compressibility', 'inverse_density'),
    ELECTROMAGNETIC: ('permittivity', 'inverse_permeability'),
}

# interval scanned for a global phase when the dual tensor is lossless
ROTATION_INTERVALS = {
    ELASTIC: (-np.pi / 2, 0.0),
    ACOUSTIC: (0.0, np.pi / 2),
    ELECTROMAGNETIC: (-np.pi / 2, 0.0),
}


def _symmetric(matrix, tol=1e-12):
    """True when a real matrix equals its transpose to relative tol."""
    scale = max(np.abs(matrix).max(), 1.0)
    return np.allclose(matrix, matrix.T, rtol=0.0, atol=tol * scale)


def _as_square(value, name):
    """Promote value to a square complex matrix or fail."""
    matrix = np.atleast_2d(np.asarray(value, dtype=complex))
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError("{} must be a square matrix, got shape {}".format(
            name, matrix.shape))
    if not np.all(np.isfinite(matrix)):
        raise ValidationError("{} has non-finite entries".format(name))
    for part, label in ((matrix.real, 'real'), (matrix.imag, 'imaginary')):
        if not _symmetric(part):
            raise ValidationError("{} part of {} is not symmetric".format(
                label, name))
    return matrix


def mandel_pairs(dim):
    """Index pairs and weights of compressed symmetric storage."""
    pairs = [(i, i) for i in range(dim)]
    if dim == 2:
        pairs.append((0, 1))
    elif dim == 3:
        pairs.extend([(1, 2), (0, 2), (0, 1)])
    weights = np.array([1.0 if i == j else np.sqrt(2.0) for i, j in pairs])
    return pairs, weights


def isotropic_stiffness(lam, mu, dim=3):
    """Isotropic stiffness in compressed symmetric storage."""
    pairs, _ = mandel_pairs(dim)
    size = len(pairs)
    stiffness = np.zeros((size, size), dtype=np.result_type(lam, mu, float))
    for row, (i, j) in enumerate(pairs):
        for col, (k, l) in enumerate(pairs):
            if i == j and k == l:
                stiffness[row, col] = lam + (2 * mu if i == k else 0)
            elif row == col:
                stiffness[row, col] = 2 * mu
    return stiffness


class ComplexModuli(object):
    """Complex material tensors of one region for one physics."""

    def __init__(self, physics, primal, dual, frequency, region=None,
                 theta=0.0):
        """Validate and store the tensors."""
        if physics not in PHYSICS:
            raise ValidationError("unknown physics '{}'".format(physics))
        try:
            frequency = float(frequency)
        except (TypeError, ValueError):
            raise ValidationError("frequency must be a number")
        if not frequency > 0:
            raise ValidationError("frequency must be positive, got {}".format(
                frequency))
        names = TENSOR_NAMES[physics]
        self.physics = physics
        self.primal = _as_square(primal, names[0])
        self.dual = _as_square(dual, names[1])
        self.frequency = frequency
        self.region = region
        self.theta = float(theta)

    def __repr__(self):
        """Short description."""
        return "ComplexModuli({}, region={}, omega={})".format(
            self.physics, self.region, self.frequency)

    @classmethod
    def elastic(cls, stiffness, density, frequency, region=None):
        """Stiffness in compressed symmetric storage and density."""
        return cls(ELASTIC, stiffness, density, frequency, region)

    @classmethod
    def acoustic(cls, bulk_modulus, density, frequency, region=None):
        """Bulk modulus and (possibly matrix valued) density."""
        bulk = np.atleast_2d(np.asarray(bulk_modulus, dtype=complex))
        rho = np.atleast_2d(np.asarray(density, dtype=complex))
        try:
            compressibility = np.linalg.inv(bulk)
            inverse_density = np.linalg.inv(rho)
        except np.linalg.LinAlgError:
            raise ValidationError("bulk modulus and density must be invertible")
        return cls(ACOUSTIC, compressibility, inverse_density, frequency,
                   region)

    @classmethod
    def electromagnetic(cls, permittivity, permeability, frequency,
                        region=None, convention=CONVENTION_MINUS):
        """Permittivity and permeability, stored in the e^{-iwt} convention."""
        if convention not in (CONVENTION_MINUS, CONVENTION_PLUS):
            raise ValidationError("unknown time convention '{}'".format(
                convention))
        eps = np.atleast_2d(np.asarray(permittivity, dtype=complex))
        mu = np.atleast_2d(np.asarray(permeability, dtype=complex))
        if convention == CONVENTION_PLUS:
            eps, mu = np.conj(eps), np.conj(mu)
        try:
            inverse_mu = np.linalg.inv(mu)
        except np.linalg.LinAlgError:
            raise ValidationError("permeability must be invertible")
        return cls(ELECTROMAGNETIC, eps, inverse_mu, frequency, region)

    @property
    def signs(self):
        """Signs making both imaginary parts positive definite."""
        return SIGNS[self.physics]

    @property
    def names(self):
        """Names of the primal and dual tensors."""
        return TENSOR_NAMES[self.physics]

    @property
    def strictly_passive(self):
        """True when both tensors pass the strict passivity test."""
        return check_passivity(self).strict

    def replace(self, primal=None, dual=None, theta=None):
        """Copy with some tensors replaced."""
        return ComplexModuli(
            self.physics,
            self.primal if primal is None else primal,
            self.dual if dual is None else dual,
            self.frequency, self.region,
            self.theta if theta is None else theta)


class CGBlock(object):
    """Real symmetric 2x2 block matrix [[a, b], [b^T, d]]."""

    def __init__(self, a, b, d):
        """Store blocks."""
        self.a = np.atleast_2d(np.asarray(a, dtype=float))
        self.b = np.atleast_2d(np.asarray(b, dtype=float))
        self.d = np.atleast_2d(np.asarray(d, dtype=float))
        size = self.a.shape[0]
        for block in (self.a, self.b, self.d):
            if block.shape != (size, size):
                raise ValidationError("inconsistent block shapes")
        if not (_symmetric(self.a, 1e-10) and _symmetric(self.d, 1e-10)):
            raise ValidationError("diagonal blocks must be symmetric")

    @classmethod
    def from_matrix(cls, matrix):
        """Split a symmetric 2k x 2k matrix into blocks."""
        matrix = np.asarray(matrix, dtype=float)
        half = matrix.shape[0] // 2
        if matrix.shape != (2 * half, 2 * half):
            raise ValidationError("block matrix must be square and even")
        return cls(matrix[:half, :half], matrix[:half, half:],
                   matrix[half:, half:])

    @property
    def size(self):
        """Dimension of each block."""
        return self.a.shape[0]

    @property
    def matrix(self):
        """Full symmetric matrix."""
        return np.block([[self.a, self.b], [self.b.T, self.d]])

    def apply(self, vector):
        """Multiply a stacked vector."""
        return self.matrix.dot(vector)

    def eigenvalues(self):
        """Eigenvalues in ascending order."""
        return np.linalg.eigvalsh(self.matrix)

    def is_positive_definite(self):
        """Strict positive definiteness with relative tolerance."""
        values = self.eigenvalues()
        return values[0] > STRICT_RELATIVE * max(abs(values[-1]), 1e-300)


class OperatorL(object):
    """Block-diagonal composite of two CG blocks."""

    def __init__(self, block_a, block_b):
        """Store both blocks."""
        self.block_a = block_a
        self.block_b = block_b

    @property
    def sizes(self):
        """Dimensions of the two blocks."""
        return 2 * self.block_a.size, 2 * self.block_b.size

    @property
    def matrix(self):
        """Full block-diagonal matrix."""
        first, second = self.sizes
        full = np.zeros((first + second, first + second))
        full[:first, :first] = self.block_a.matrix
        full[first:, first:] = self.block_b.matrix
        return full

    def apply(self, vector):
        """Apply to a stacked pointwise vector."""
        return self.matrix.dot(np.asarray(vector, dtype=float))

    def eigenvalues(self):
        """Union of the block eigenvalues, sorted."""
        return np.sort(np.concatenate([self.block_a.eigenvalues(),
                                       self.block_b.eigenvalues()]))


def legendre_blocks(tensors, sign=1.0):
    """Stacked real block matrices (n, 2k, 2k) from complex tensors (n, k, k).

    Each block maps (e', s') onto (s'', -e'') for s = C e; sign flips
    tensors whose imaginary part is negative definite.
    """
    tensors = np.asarray(tensors, dtype=complex)
    real, imag = tensors.real, tensors.imag
    inverse = np.linalg.inv(imag)
    a = imag + np.matmul(np.matmul(real, inverse), real)
    b = -np.matmul(real, inverse)
    a = 0.5 * (a + np.swapaxes(a, 1, 2))
    d = 0.5 * (inverse + np.swapaxes(inverse, 1, 2))
    top = np.concatenate([a, b], axis=2)
    bottom = np.concatenate([np.swapaxes(b, 1, 2), d], axis=2)
    return sign * np.concatenate([top, bottom], axis=1)


def legendre_block(tensor, sign=1.0):
    """Real block form of a complex tensor whose sign*imag part is PD."""
    tensor = np.asarray(tensor, dtype=complex)
    return CGBlock.from_matrix(legendre_blocks(tensor[None], sign)[0])


class TensorPassivity(object):
    """Passivity verdict for one tensor."""

    def __init__(self, name, min_eigenvalue, max_eigenvalue, status):
        """Store verdict."""
        self.name = name
        self.min_eigenvalue = min_eigenvalue
        self.max_eigenvalue = max_eigenvalue
        self.status = status

    def __repr__(self):
        """Short description."""
        return "{}: {} (min eigenvalue {:.3g})".format(
            self.name, self.status, self.min_eigenvalue)


class PassivityReport(object):
    """Passivity verdicts for the primal and dual tensors of a region."""

    def __init__(self, primal, dual, region=None):
        """Store verdicts."""
        self.primal = primal
        self.dual = dual
        self.region = region

    @property
    def tensors(self):
        """Both verdicts."""
        return (self.primal, self.dual)

    @property
    def strict(self):
        """Both tensors strictly passive."""
        return all(t.status == STRICT for t in self.tensors)

    @property
    def violations(self):
        """Verdicts that fail the sign condition."""
        return [t for t in self.tensors if t.status == VIOLATED]

    def raise_for_violation(self, allow_semidefinite=False):
        """Raise PassivityError for the first failing tensor."""
        for tensor in self.tensors:
            if tensor.status == VIOLATED or (
                    tensor.status == SEMIDEFINITE and not allow_semidefinite):
                raise PassivityError(tensor.name, self.region,
                                     tensor.min_eigenvalue)


def _classify(name, tensor, sign):
    """Classify sign*imag(tensor)."""
    values = np.linalg.eigvalsh(sign * tensor.imag)
    scale = np.abs(values).max()
    low = values[0]
    if low > STRICT_RELATIVE * scale and low > 0:
        status = STRICT
    elif low >= -STRICT_RELATIVE * scale:
        status = SEMIDEFINITE
    else:
        status = VIOLATED
    return TensorPassivity(name, float(low), float(values[-1]), status)


def check_passivity(moduli):
    """Report the passivity class of both tensors."""
    primal_sign, dual_sign = moduli.signs
    primal_name, dual_name = moduli.names
    return PassivityReport(
        _classify(primal_name, moduli.primal, primal_sign),
        _classify(dual_name, moduli.dual, dual_sign),
        moduli.region)


def build_blocks(moduli):
    """Return the two positive-definite blocks of a strictly passive medium."""
    check_passivity(moduli).raise_for_violation()
    primal_sign, dual_sign = moduli.signs
    return (legendre_block(moduli.primal, primal_sign),
            legendre_block(moduli.dual, dual_sign))


def assemble_L(block_a, block_b):  # pylint: disable=invalid-name
    """Block-diagonal operator acting on a pointwise field quadruple."""
    if not isinstance(block_a, CGBlock) or not isinstance(block_b, CGBlock):
        raise ValidationError("assemble_L expects two CGBlock instances")
    return OperatorL(block_a, block_b)


def rotate_moduli(moduli, theta):
    """Multiply both tensors by exp(i theta); flag strict passivity."""
    phase = np.exp(1j * theta)
    rotated = moduli.replace(primal=moduli.primal * phase,
                             dual=moduli.dual * phase,
                             theta=moduli.theta + theta)
    return rotated, check_passivity(rotated).strict


def rotation_margin(moduli, theta):
    """Smallest scaled passivity eigenvalue after rotation."""
    phase = np.exp(1j * theta)
    margins = []
    for tensor, sign in zip((moduli.primal, moduli.dual), moduli.signs):
        rotated = tensor * phase
        scale = max(np.linalg.norm(rotated, 2), 1e-300)
        margins.append(np.linalg.eigvalsh(sign * rotated.imag)[0] / scale)
    return min(margins)


def choose_rotation(moduli_list, points=THETA_SCAN_POINTS):
    """Scan a global phase and keep the one with the best margin."""
    physics = moduli_list[0].physics
    low, high = ROTATION_INTERVALS[physics]
    grid = np.linspace(low, high, points + 2)[1:-1]
    margins = np.array([min(rotation_margin(m, theta) for m in moduli_list)
                        for theta in grid])
    best = int(np.argmax(margins))
    theta = float(grid[best])
    for moduli in moduli_list:
        if rotation_margin(moduli, theta) <= 0:
            LOGGER.warning("Region %s is not strictly passive at theta=%.4f",
                           moduli.region, theta)
    LOGGER.debug("Selected rotation %.4f with margin %.3g",
                 theta, margins[best])
    return theta, float(margins[best])


class ReducedFormSpec(object):
    """Pointwise elimination of the dual unknown for a lossless dual tensor."""

    def __init__(self, physics, dual_real, frequency):
        """Store the real dual tensor, one (k, k) or a stack (n, k, k)."""
        self.physics = physics
        self.dual_real = np.asarray(dual_real, dtype=float)
        self.frequency = frequency
        self.dual_inverse = np.linalg.inv(self.dual_real)

    @property
    def matrix(self):
        """Pointwise map from driving field to eliminated unknown."""
        if self.physics == ELASTIC:
            return self.dual_inverse / self.frequency
        return self.dual_real

    @property
    def batched(self):
        """True for one tensor per entity."""
        return self.dual_real.ndim == 3

    def _map(self, matrix, value):
        """Apply a pointwise matrix to rows, or to a flat entity vector."""
        value = np.asarray(value, dtype=float)
        if not self.batched:
            return value.dot(matrix.T)
        count, size, _ = matrix.shape
        return np.einsum('nij,nj->ni', matrix,
                         value.reshape(count, size)).ravel()

    def eliminate(self, value):
        """Dependent unknown from the dual-block driving field.

        Elastic: u' from p''. Acoustic: v'' from p''. Electromagnetic:
        H'' from B''.
        """
        return self._map(self.matrix, value)

    def restore(self, value):
        """Driving field from the eliminated unknown."""
        if self.physics == ELASTIC:
            return self._map(self.dual_real, value) * self.frequency
        return self._map(self.dual_inverse, value)


def lossless_limit(moduli):
    """Reduced form for a medium whose dual tensor has no loss."""
    dual = moduli.dual
    scale = max(np.abs(dual).max(), 1e-300)
    if np.abs(dual.imag).max() > 1e-14 * scale:
        raise ValidationError(
            "{} has a nonzero imaginary part; use the full formulation".format(
                moduli.names[1]))
    real = dual.real
    if np.linalg.cond(real) > 1e12:
        raise ValidationError("real part of {} is singular".format(
            moduli.names[1]))
    return ReducedFormSpec(moduli.physics, real, moduli.frequency)
