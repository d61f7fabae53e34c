"""Weight policies attached to evaluation points.

A policy maps the point (and its index) to the complex weight that
multiplies the function evaluation in the self-normalized mean.  All
policies are pure functions of ``(point, index)``, so blocks of weights
can be computed concurrently without coordination.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NegativeDensity, WeightOverflow

__all__ = [
    "WeightPolicy",
    "constant_policy",
    "density_policy",
    "boltzmann_policy",
    "oscillatory_policy",
    "product_regularized_policy",
]

# exp(x) overflows double precision just above x = 709.
_EXP_OVERFLOW = 700.0


class WeightPolicy:
    """Rule assigning a weight to each evaluation point.

    ``rank`` is the number of leading coordinates the policy reads; the
    engine generates blocks at least that wide and the policy truncates
    before evaluating its payload.
    """

    kind: str = "abstract"
    rank: int = 0

    def weights(self, points: np.ndarray, start_index: int = 0) -> np.ndarray:
        """Weights for a block of points whose first row has the given index."""
        raise NotImplementedError

    def weight(self, point, index: int = 0) -> complex:
        """Weight of a single point (``Point`` or coordinate sequence)."""
        coords = getattr(point, "coords", point)
        block = np.asarray([coords], dtype=np.float64)
        return complex(self.weights(block, start_index=index)[0])


class ConstantPolicy(WeightPolicy):
    kind = "constant"
    rank = 0

    def weights(self, points: np.ndarray, start_index: int = 0) -> np.ndarray:
        return np.ones(len(points))


class DensityPolicy(WeightPolicy):
    kind = "density"

    def __init__(self, density: Callable[[np.ndarray], np.ndarray], rank: int):
        if rank < 1:
            raise ValueError("density rank must be >= 1")
        self.density = density
        self.rank = int(rank)

    def weights(self, points: np.ndarray, start_index: int = 0) -> np.ndarray:
        w = np.asarray(self.density(points[:, : self.rank]), dtype=np.float64)
        if np.any(w < 0):
            raise NegativeDensity("density returned a negative value at a sampled point")
        return w


class BoltzmannPolicy(WeightPolicy):
    kind = "boltzmann"

    def __init__(self, action):
        self.action = action
        self.rank = int(action.rank)

    def weights(self, points: np.ndarray, start_index: int = 0) -> np.ndarray:
        s = np.asarray(self.action(points[:, : self.rank]), dtype=np.float64)
        if np.any(s < -_EXP_OVERFLOW):
            raise WeightOverflow(
                f"action below {-_EXP_OVERFLOW} would overflow exp(-action)"
            )
        # Underflow of huge positive actions to weight 0 is harmless.
        with np.errstate(under="ignore"):
            return np.exp(-s)


class OscillatoryPolicy(WeightPolicy):
    kind = "oscillatory"

    def __init__(self, action, index_phase: float = 0.0):
        self.action = action
        self.index_phase = float(index_phase)
        self.rank = int(action.rank)

    def weights(self, points: np.ndarray, start_index: int = 0) -> np.ndarray:
        s = np.asarray(self.action(points[:, : self.rank]), dtype=np.float64)
        if self.index_phase != 0.0:
            n = np.arange(start_index, start_index + len(points), dtype=np.float64)
            s = s + self.index_phase * n
        return np.exp(-1j * s)


class ProductRegularizedPolicy(WeightPolicy):
    kind = "product-regularized"

    def __init__(self, regularizer, action, index_phase: float = 0.0):
        self.regularizer = regularizer
        self.action = action
        self.index_phase = float(index_phase)
        self.rank = max(int(regularizer.rank), int(action.rank))

    def weights(self, points: np.ndarray, start_index: int = 0) -> np.ndarray:
        xi = np.asarray(
            self.regularizer.value(points[:, : self.regularizer.rank]),
            dtype=np.float64,
        )
        if np.any(xi < 0):
            raise NegativeDensity("regularizer returned a negative value")
        s = np.asarray(self.action(points[:, : self.action.rank]), dtype=np.float64)
        if self.index_phase != 0.0:
            n = np.arange(start_index, start_index + len(points), dtype=np.float64)
            s = s + self.index_phase * n
        return xi * np.exp(-1j * s)


def constant_policy() -> WeightPolicy:
    """Unit weights: the classical equal-weight mean."""
    return ConstantPolicy()


def density_policy(density: Callable[[np.ndarray], np.ndarray], rank: int) -> WeightPolicy:
    """Weights ``density(x)`` for a nonnegative density of the first
    ``rank`` coordinates; realizes the density-reweighted mean
    ``sum(phi f) / sum(phi)``."""
    return DensityPolicy(density, rank)


def boltzmann_policy(action) -> WeightPolicy:
    """Positive weights ``exp(-action(x))``; raises ``WeightOverflow``
    if the action drops below -700 (a single infinite weight would
    destroy the accumulator), while underflow to 0 is silent."""
    return BoltzmannPolicy(action)


def oscillatory_policy(action, index_phase: float = 0.0) -> WeightPolicy:
    """Unit-modulus weights ``exp(-i action(x))``.

    ``index_phase`` adds ``index_phase * n`` to the phase of point ``n``;
    with ``index_phase = pi`` the weights alternate in sign, the designed
    cancellation case for exercising the degeneracy guard.
    """
    return OscillatoryPolicy(action, index_phase)


def product_regularized_policy(regularizer, action, index_phase: float = 0.0) -> WeightPolicy:
    """Weights ``xi(x) * exp(-i action(x))`` carrying the integrable
    product regularizer in the weight instead of the sampling measure."""
    return ProductRegularizedPolicy(regularizer, action, index_phase)
