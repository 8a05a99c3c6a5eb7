"""Exception taxonomy shared across the package."""


class HalfspaceLppError(Exception):
    """Base class for all package errors."""


class DimensionError(HalfspaceLppError):
    """Matrix or domain dimensions are inconsistent (e.g. odd-size skew matrix)."""


class SizeError(HalfspaceLppError):
    """Input is too large for the requested (usually combinatorial) algorithm."""


class NumericError(HalfspaceLppError):
    """Non-finite input or a numerically meaningless intermediate."""


class NumericIntegrityError(HalfspaceLppError):
    """A value that must be real carries an imaginary residue above tolerance,
    or a CDF-valued quantity leaves [0, 1] beyond tolerance."""


class RegimeError(HalfspaceLppError):
    """A sign/branch condition failed, typically signalling a discretization
    that is too coarse for the requested square root or regime."""


class ContourError(HalfspaceLppError):
    """No contour placement satisfies the required pole-separation
    inequalities; the message names the violated inequality."""


class PoleCollisionError(HalfspaceLppError):
    """An integrand evaluated non-finite at a quadrature node pair."""


class DiscretizationError(HalfspaceLppError):
    """Nystrom discretization produced an inadmissible determinant; raise the
    node count."""


class TruncationError(HalfspaceLppError):
    """A truncated lattice sum or series cannot meet its tail bound."""


class DomainError(HalfspaceLppError):
    """Parameter outside the admissible domain (e.g. eta <= 0 for the
    symplectic-unitary kernel)."""
