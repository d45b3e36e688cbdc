"""Soft per-level bit information from one observed symbol.

For an observation y the demapper weighs every quantizer interval by its
closed-form posterior mass times the prior probability that the interval's
label agrees with the current beliefs on the other levels, then returns the
log-ratio of the two label classes of the target level.  All mass arithmetic
stays in the log domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .channel import ChannelParams, interval_log_posteriors
from .errors import DegenerateClassError, IndeterminateError, InvalidInputError
from .quantizer import Labeling, Quantizer


@dataclass(frozen=True)
class LlrRecord:
    """Decomposition of one bit's log-likelihood ratio.

    total is the belief used for decisions; intrinsic is the symbol-local
    (channel plus other-level priors) part; extrinsic is what the code
    contributed beyond it.  Positive values favor bit 1.
    """

    total: float
    intrinsic: float
    extrinsic: float

    def __post_init__(self):
        if np.isfinite(self.total) and np.isfinite(self.intrinsic):
            if abs(self.total - self.intrinsic - self.extrinsic) > 1e-9:
                raise InvalidInputError("total must equal intrinsic + extrinsic")


def _prior_log_weights(priors: np.ndarray, labeling: Labeling, skip_level: int) -> np.ndarray:
    """Per-interval log prior mass from the other levels' bit-1 probabilities."""
    k = labeling.k
    out = np.zeros((priors.shape[1] if priors.ndim == 2 else 1, k))
    with np.errstate(divide="ignore"):
        for m in range(1, labeling.l + 1):
            if m == skip_level:
                continue
            p1 = np.atleast_1d(priors[m - 1])
            if np.any((p1 < 0) | (p1 > 1) | ~np.isfinite(p1)):
                raise InvalidInputError(f"level {m} priors must be probabilities in [0,1]")
            bits = labeling.level_bits(m)[None, :]
            log_p1 = np.log(p1)[:, None]
            log_p0 = np.log1p(-p1)[:, None]
            out = out + np.where(bits == 1, log_p1, log_p0)
    return out


def batch_bit_llrs(
    ys: np.ndarray,
    level: int,
    priors: np.ndarray,
    quantizer: Quantizer,
    labeling: Labeling,
    params: ChannelParams,
) -> np.ndarray:
    """Log class-mass ratio of the target level for a batch of observations.

    priors: array (l,) or (l, n) of bit-1 probabilities per level; the row
    of the target level is ignored.  Fixed known bits are passed as 0 or 1.
    Returns shape (n,); positive values favor bit 1.
    """
    ys = np.atleast_1d(np.asarray(ys, float))
    priors = np.asarray(priors, float)
    if priors.ndim == 1:
        priors = priors[:, None]
    if priors.shape[0] != labeling.l:
        raise InvalidInputError(f"priors must have one row per level ({labeling.l})")
    if not 1 <= level <= labeling.l:
        raise InvalidInputError(f"level {level} outside 1..{labeling.l}")

    log_w = interval_log_posteriors(ys, quantizer.boundaries, params)
    log_w = log_w + _prior_log_weights(priors, labeling, level)

    bits = labeling.level_bits(level)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_num = logsumexp(log_w, axis=1, b=(bits == 1).astype(float))
        log_den = logsumexp(log_w, axis=1, b=(bits == 0).astype(float))
    bad = np.isneginf(log_num) & np.isneginf(log_den)
    if np.any(bad):
        raise DegenerateClassError(
            "both label classes have zero mass after conditioning"
        )
    return log_num - log_den


def symbol_bit_llr(
    y: float,
    level: int,
    priors: np.ndarray,
    quantizer: Quantizer,
    labeling: Labeling,
    params: ChannelParams,
) -> float:
    """Single-symbol form of :func:`batch_bit_llrs`."""
    return float(
        batch_bit_llrs(np.array([y]), level, priors, quantizer, labeling, params)[0]
    )


def extrinsic_from_decoder(total_llr, channel_llr):
    """Extrinsic part of a decoder's output: total minus the channel input.

    Scalar or elementwise on arrays.  Infinities propagate (inf - finite =
    inf) but opposing certainties are contradictory: inf - inf raises.
    """
    total = np.asarray(total_llr, float)
    channel = np.asarray(channel_llr, float)
    conflict = np.isinf(total) & np.isinf(channel) & (np.sign(total) == np.sign(channel))
    if np.any(conflict):
        raise IndeterminateError("cannot subtract two like-signed infinite LLRs")
    with np.errstate(invalid="raise"):
        out = total - channel
    if np.ndim(total_llr) == 0 and np.ndim(channel_llr) == 0:
        return float(out)
    return out


def llr_to_prob(llr: np.ndarray) -> np.ndarray:
    """P(bit = 1) from an LLR under the positive-favors-1 convention."""
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(llr, float)))


def prob_to_llr(p1: np.ndarray) -> np.ndarray:
    p1 = np.asarray(p1, float)
    with np.errstate(divide="ignore"):
        return np.log(p1) - np.log1p(-p1)
