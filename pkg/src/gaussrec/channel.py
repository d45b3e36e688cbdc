"""Correlated Gaussian source model and its equivalent observation channel.

Alice observes X ~ N(0, sigma_x^2); Bob observes Y = X + eps with
eps ~ N(0, sigma_n^2).  Everything downstream only needs the conditional
law of X given Y (Gaussian with shrunk mean and reduced variance), so this
module exposes that posterior in closed form along with sampling and the
baseline mutual information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    DegenerateIntervalError,
    EmptyBatchError,
    InfiniteInformationError,
    InvalidInputError,
)
from .quadrature import log_gauss_mass

if TYPE_CHECKING:  # pragma: no cover
    from .quantizer import Quantizer


@dataclass(frozen=True)
class ChannelParams:
    """Standard deviations of the source and of the additive noise."""

    sigma_x: float
    sigma_n: float

    def __post_init__(self):
        if not self.sigma_x > 0:
            raise InvalidInputError(f"sigma_x must be positive, got {self.sigma_x}")
        if self.sigma_n < 0:
            raise InvalidInputError(f"sigma_n must be nonnegative, got {self.sigma_n}")

    @classmethod
    def from_snr(cls, snr: float, sigma_x: float = 1.0) -> "ChannelParams":
        """Build parameters with the given sigma_x^2 / sigma_n^2 ratio."""
        if not snr > 0:
            raise InvalidInputError(f"snr must be positive, got {snr}")
        return cls(sigma_x=sigma_x, sigma_n=sigma_x / math.sqrt(snr))

    @property
    def snr(self) -> float:
        if self.sigma_n == 0:
            return math.inf
        return (self.sigma_x / self.sigma_n) ** 2

    @property
    def sigma_y(self) -> float:
        """Standard deviation of the marginal of Y."""
        return math.hypot(self.sigma_x, self.sigma_n)

    @property
    def posterior_gain(self) -> float:
        """E[X | Y=y] = posterior_gain * y."""
        vx = self.sigma_x**2
        return vx / (vx + self.sigma_n**2)

    @property
    def posterior_std(self) -> float:
        """Std of X given Y (independent of y)."""
        if self.sigma_n == 0:
            return 0.0
        vx, vn = self.sigma_x**2, self.sigma_n**2
        return math.sqrt(vx * vn / (vx + vn))


@dataclass(frozen=True)
class SampleBatch:
    """Paired observations of the two parties; immutable after creation."""

    xs: np.ndarray
    ys: np.ndarray
    seed: int

    def __post_init__(self):
        if self.xs.shape != self.ys.shape or self.xs.ndim != 1:
            raise InvalidInputError("xs and ys must be 1-d arrays of equal length")
        self.xs.setflags(write=False)
        self.ys.setflags(write=False)

    def __len__(self) -> int:
        return len(self.xs)


def generate_pairs(n: int, params: ChannelParams, seed: int) -> SampleBatch:
    """Draw n i.i.d. (x, y) pairs; bit-reproducible for a given seed.

    Uses numpy's PCG64 generator, so the seed -> output mapping is fixed per
    numpy release.
    """
    if n < 1:
        raise EmptyBatchError(f"need at least one sample, got n={n}")
    rng = np.random.default_rng(seed)
    xs = params.sigma_x * rng.standard_normal(n)
    ys = xs + params.sigma_n * rng.standard_normal(n)
    return SampleBatch(xs=xs, ys=ys, seed=seed)


def mutual_information_xy(params: ChannelParams) -> float:
    """I(X;Y) = 0.5 * log2(1 + snr) bits per symbol."""
    if params.sigma_n == 0:
        raise InfiniteInformationError("I(X;Y) is infinite for a noiseless channel")
    return 0.5 * math.log2(1.0 + params.snr)


def y_marginal_logpdf(y: np.ndarray, params: ChannelParams) -> np.ndarray:
    sy = params.sigma_y
    y = np.asarray(y, float)
    return -0.5 * (y / sy) ** 2 - math.log(sy) - 0.5 * math.log(2 * math.pi)


def y_marginal_pdf(y: np.ndarray, params: ChannelParams) -> np.ndarray:
    return np.exp(y_marginal_logpdf(y, params))


def interval_log_posteriors(
    y: np.ndarray, boundaries: np.ndarray, params: ChannelParams
) -> np.ndarray:
    """log P(X in I_j | Y=y) for every interval, shape (len(y), k).

    Intervals are delimited by the sorted ``boundaries`` with unbounded outer
    intervals.  Requires sigma_n > 0 (the posterior of X given Y is then a
    proper Gaussian).
    """
    if params.sigma_n == 0:
        raise InvalidInputError("interval posteriors need sigma_n > 0")
    y = np.atleast_1d(np.asarray(y, float))
    edges = np.concatenate(([-np.inf], np.asarray(boundaries, float), [np.inf]))
    mu = params.posterior_gain * y[:, None]
    sp = params.posterior_std
    z = (edges[None, :] - mu) / sp
    return log_gauss_mass(z[:, :-1], z[:, 1:])


def interval_posteriors(
    y: np.ndarray, boundaries: np.ndarray, params: ChannelParams
) -> np.ndarray:
    """P(X in I_j | Y=y), shape (len(y), k); rows sum to 1."""
    return np.exp(interval_log_posteriors(y, boundaries, params))


def transition_density(
    y: float | np.ndarray, j: int, quantizer: "Quantizer", params: ChannelParams
) -> float | np.ndarray:
    """Density p(y | X in I_j) of Bob's observation given Alice's interval.

    Closed form: the joint mass p(y, X in I_j) equals the marginal density of
    y times the Gaussian posterior mass of I_j, so no quadrature is needed.
    """
    k = quantizer.k
    if not 1 <= j <= k:
        raise InvalidInputError(f"interval index {j} outside 1..{k}")
    pj = quantizer.probabilities[j - 1]
    if pj <= 0.0:
        raise DegenerateIntervalError(f"interval {j} has zero probability mass")
    y_arr = np.atleast_1d(np.asarray(y, float))
    if params.sigma_n == 0:
        # Degenerate channel: Y = X, density is the truncated source density.
        edges = np.concatenate(([-np.inf], quantizer.boundaries, [np.inf]))
        inside = (y_arr >= edges[j - 1]) & (y_arr < edges[j])
        dens = np.where(
            inside,
            np.exp(-0.5 * (y_arr / params.sigma_x) ** 2)
            / (params.sigma_x * math.sqrt(2 * math.pi))
            / pj,
            0.0,
        )
    else:
        log_post = interval_log_posteriors(y_arr, quantizer.boundaries, params)[:, j - 1]
        dens = np.exp(y_marginal_logpdf(y_arr, params) + log_post - math.log(pj))
    if np.isscalar(y) or np.ndim(y) == 0:
        return float(dens[0])
    return dens
