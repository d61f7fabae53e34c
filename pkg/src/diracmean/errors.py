"""Exception types shared across the package."""

from __future__ import annotations


class DiracMeanError(Exception):
    """Base class for all errors raised by this package."""


class BadGenerator(DiracMeanError):
    """A Weyl generator is rational (or indistinguishable from a rational
    with denominator <= 10^6) and would produce a periodic sequence."""


class QuantileDomain(DiracMeanError):
    """A base coordinate hit 0 or 1 exactly, where the quantile transform
    is undefined."""


class InsufficientSample(DiracMeanError):
    """Too few points for the requested binning (needs >= 5 expected
    counts per cell)."""


class RankUnsupported(DiracMeanError):
    """Requested rank is outside the supported range for this operation."""


class RankExceeded(DiracMeanError):
    """A function was evaluated on a point with fewer coordinates than its
    declared rank."""


class RankMismatch(DiracMeanError):
    """Ranks of the supplied components are inconsistent."""


class CylinderViolation(DiracMeanError):
    """A declared finite-rank function was observed to depend on a
    coordinate beyond its rank."""


class NegativeDensity(DiracMeanError):
    """A density or regularizer returned a negative value at a sampled
    point."""


class WeightOverflow(DiracMeanError):
    """exp(-action) would overflow to infinity (action < -700)."""


class NonFiniteInput(DiracMeanError):
    """A weight or function value was NaN or infinite."""


class EmptyAccumulator(DiracMeanError):
    """estimate() was called before any accumulation."""


class AsymmetricMatrix(DiracMeanError):
    """The quadratic-form matrix is not exactly symmetric."""


class NonpositiveWidth(DiracMeanError):
    """A width parameter must be strictly positive."""


class UnsupportedMoment(DiracMeanError):
    """Only moments 0 and 2 have closed forms here."""


class NoConvergence(DiracMeanError):
    """Cell doubling hit the resolution cap before successive quadrature
    values agreed."""


class DegenerateOracle(DiracMeanError):
    """The oracle's normalizing integral is too close to zero relative to
    the integral of the absolute density."""


class CertificationError(DiracMeanError):
    """A source failed the equidistribution certificate required for this
    run."""


class ParseError(DiracMeanError):
    """The experiment description is not well-formed."""


class ValidationError(DiracMeanError):
    """The experiment description is well-formed but names an unknown
    entry or violates a precondition."""
