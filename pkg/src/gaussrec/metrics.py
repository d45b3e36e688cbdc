"""Information measures for quantized reconciliation.

Everything here is exact quadrature, no sampling: source entropy, conditional
entropy given the other terminal's observation, per-level rates for multilevel
coding, marginal-bit rate bounds for the interleaved scheme, a Fano-style
upper bound for independent per-level codes, and the disclosure efficiency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .channel import (
    ChannelParams,
    interval_posteriors,
    mutual_information_xy,
    y_marginal_pdf,
)
from .errors import InvalidInputError
from .quadrature import (
    DEFAULT_TOL,
    GAUSS_WINDOW_SIGMAS,
    binary_entropy,
    integrate,
    integrate_piecewise,
    panel_nodes,
    xlog2x,
)
from .quantizer import Labeling, Quantizer, _cond_entropy


@dataclass(frozen=True)
class LevelRateReport:
    """Per-level mutual informations and code rates, in decode order.

    levels: level indices in the order they are decoded.
    per_level_mi: I(L_i; Y | earlier levels) at the channel SNR.
    per_level_mi_noiseless: the same quantity for a noiseless channel,
        i.e. the conditional label entropy H(L_i | earlier levels).
    optimal_rates: ideal syndrome code rate per level,
        1 - (per_level_mi_noiseless - per_level_mi).
    total_mi: I(quantized X; Y), computed independently of the levels.
    """

    levels: tuple[int, ...]
    per_level_mi: np.ndarray
    per_level_mi_noiseless: np.ndarray
    optimal_rates: np.ndarray
    total_mi: float

    def __post_init__(self):
        for name in ("per_level_mi", "per_level_mi_noiseless", "optimal_rates"):
            getattr(self, name).setflags(write=False)


@dataclass(frozen=True)
class EfficiencyReport:
    h_qx: float
    i_red: float
    i_xy: float
    eta: float
    negative: bool


def entropy_qx(quantizer: Quantizer) -> float:
    """Entropy of the quantized source in bits."""
    return float(-np.sum(xlog2x(quantizer.probabilities)))


def cond_entropy_qx_given_y(
    quantizer: Quantizer, params: ChannelParams, tol: float = DEFAULT_TOL
) -> float:
    """H(quantized X | Y) in bits, by quadrature over y."""
    return _cond_entropy(quantizer.boundaries, params, tol)


def mi_qx_y(quantizer: Quantizer, params: ChannelParams, tol: float = DEFAULT_TOL) -> float:
    return entropy_qx(quantizer) - cond_entropy_qx_given_y(quantizer, params, tol)


def _check_pairing(quantizer: Quantizer, labeling: Labeling):
    if labeling.k != quantizer.k:
        raise InvalidInputError(
            f"labeling is for k={labeling.k} but quantizer has k={quantizer.k}"
        )


def _pattern_masks(labeling: Labeling, cond_levels: tuple[int, ...]) -> list[np.ndarray]:
    """Interval masks for every bit pattern of the conditioned levels."""
    if not cond_levels:
        return [np.ones(labeling.k, bool)]
    bit_rows = [labeling.level_bits(m) for m in cond_levels]
    masks = []
    for pattern in range(2 ** len(cond_levels)):
        mask = np.ones(labeling.k, bool)
        for pos, bits in enumerate(bit_rows):
            mask &= bits == (pattern >> pos) & 1
        masks.append(mask)
    return masks


def _joint_entropy_terms(w: np.ndarray, mask1: np.ndarray, mask_all: np.ndarray) -> np.ndarray:
    # sum over patterns of P(pattern|y) * h(P(bit=1 | pattern, y)), stable as mass -> 0
    p1 = w[:, mask1].sum(axis=1)
    pw = w[:, mask_all].sum(axis=1)
    return -(xlog2x(p1) + xlog2x(pw - p1) - xlog2x(pw))


def _level_cond_entropy_given_y(
    quantizer: Quantizer,
    labeling: Labeling,
    level: int,
    cond_levels: tuple[int, ...],
    params: ChannelParams,
    tol: float,
) -> float:
    """H(L_level | Y, L_cond) by quadrature."""
    masks = _pattern_masks(labeling, cond_levels)
    bits = labeling.level_bits(level)
    lim = GAUSS_WINDOW_SIGMAS * params.sigma_y

    def integrand(y):
        w = interval_posteriors(y, quantizer.boundaries, params)
        total = np.zeros(len(y))
        for mask in masks:
            total += _joint_entropy_terms(w, mask & (bits == 1), mask)
        return y_marginal_pdf(y, params) * total

    return integrate(integrand, -lim, lim, tol=tol)


def _level_prior_entropy(
    quantizer: Quantizer, labeling: Labeling, level: int, cond_levels: tuple[int, ...]
) -> float:
    """H(L_level | L_cond) from the interval probabilities alone."""
    masks = _pattern_masks(labeling, cond_levels)
    bits = labeling.level_bits(level)
    probs = quantizer.probabilities
    total = 0.0
    for mask in masks:
        p1 = probs[mask & (bits == 1)].sum()
        pw = probs[mask].sum()
        total -= xlog2x(p1) + xlog2x(pw - p1) - xlog2x(pw)
    return float(total)


def per_level_mi(
    quantizer: Quantizer,
    labeling: Labeling,
    params: ChannelParams,
    tol: float = DEFAULT_TOL,
) -> LevelRateReport:
    """Chain-rule split of I(quantized X; Y) across label levels.

    Levels are processed in the labeling's decode order; each level is
    conditioned on the exact bits of all previously decoded levels.
    """
    _check_pairing(quantizer, labeling)
    mi, mi_noiseless, rates = [], [], []
    for pos, level in enumerate(labeling.level_order):
        cond = labeling.level_order[:pos]
        h_prior = _level_prior_entropy(quantizer, labeling, level, cond)
        h_cond = _level_cond_entropy_given_y(quantizer, labeling, level, cond, params, tol)
        mi.append(h_prior - h_cond)
        mi_noiseless.append(h_prior)
        rates.append(1.0 - h_cond)
    return LevelRateReport(
        levels=labeling.level_order,
        per_level_mi=np.array(mi),
        per_level_mi_noiseless=np.array(mi_noiseless),
        optimal_rates=np.array(rates),
        total_mi=mi_qx_y(quantizer, params, tol),
    )


def level_exit_ceiling(
    quantizer: Quantizer,
    labeling: Labeling,
    level: int,
    params: ChannelParams,
    tol: float = DEFAULT_TOL,
) -> float:
    """1 - H(L_level | Y, all other levels): the demapper transfer ceiling.

    This is the value a level transfer curve approaches at full prior
    information, on the same unit-entropy scale the Monte-Carlo estimator
    uses (it exceeds the Shannon conditional MI when the level's prior
    entropy is below one bit).
    """
    _check_pairing(quantizer, labeling)
    rest = tuple(m for m in range(1, labeling.l + 1) if m != level)
    h_cond = _level_cond_entropy_given_y(quantizer, labeling, level, rest, params, tol)
    return 1.0 - h_cond


def bicm_rate_bounds(
    quantizer: Quantizer,
    labeling: Labeling,
    params: ChannelParams,
    tol: float = DEFAULT_TOL,
) -> tuple[float, float]:
    """(lower, upper) bounds on the single-code rate for the interleaved scheme.

    Both bounds use the marginal per-level bit variables, without conditioning
    on other levels: lower = 1 - sum_m H(X_m|Y)/l, and
    upper = 1 - max(0, H(X) - sum_m I(X_m;Y))/l.
    """
    _check_pairing(quantizer, labeling)
    l = labeling.l
    sum_h_cond = 0.0
    sum_mi = 0.0
    for m in range(1, l + 1):
        bits = labeling.level_bits(m)
        h_prior = binary_entropy(float(quantizer.probabilities[bits == 1].sum()))
        h_cond = _level_cond_entropy_given_y(quantizer, labeling, m, (), params, tol)
        sum_h_cond += h_cond
        sum_mi += h_prior - h_cond
    lower = 1.0 - sum_h_cond / l
    upper = 1.0 - max(0.0, entropy_qx(quantizer) - sum_mi) / l
    return lower, upper


def sec_level_error_probs(
    quantizer: Quantizer,
    labeling: Labeling,
    params: ChannelParams,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """Error probability of the per-level ML bit estimator, in decode order.

    Level i's estimator sees y and the true bits of all previously decoded
    levels; its error probability is E[min_b P(L_i = b | y, earlier bits)].
    """
    _check_pairing(quantizer, labeling)
    lim = GAUSS_WINDOW_SIGMAS * params.sigma_y
    out = []
    for pos, level in enumerate(labeling.level_order):
        masks = [
            (mask, mask & (labeling.level_bits(level) == 1))
            for mask in _pattern_masks(labeling, labeling.level_order[:pos])
        ]

        def integrand(y):
            w = interval_posteriors(y, quantizer.boundaries, params)
            total = np.zeros(len(np.atleast_1d(y)))
            for mask, mask1 in masks:
                p1 = w[:, mask1].sum(axis=1)
                total += np.minimum(p1, w[:, mask].sum(axis=1) - p1)
            return y_marginal_pdf(y, params) * total

        # the pointwise min kinks where the ML decision flips; split there
        kinks = _decision_kinks(masks, quantizer.boundaries, params, lim)
        breakpoints = np.concatenate(([-lim], kinks, [lim]))
        out.append(integrate_piecewise(integrand, breakpoints, tol=tol))
    return np.array(out)


def _decision_kinks(
    masks: list[tuple[np.ndarray, np.ndarray]],
    boundaries: np.ndarray,
    params: ChannelParams,
    lim: float,
    grid_points: int = 4001,
) -> np.ndarray:
    """y values where some pattern's ML bit decision changes sign."""
    grid = np.linspace(-lim, lim, grid_points)
    w = interval_posteriors(grid, boundaries, params)
    kinks = []
    for mask, mask1 in masks:
        diff = 2.0 * w[:, mask1].sum(axis=1) - w[:, mask].sum(axis=1)

        def scalar_diff(y):
            row = interval_posteriors(y, boundaries, params)[0]
            return 2.0 * row[mask1].sum() - row[mask].sum()

        sign = np.sign(diff)
        flips = sign[:-1] * sign[1:] < 0
        # ulp-scale oscillations in the far tails are not real decision flips
        flips &= np.maximum(np.abs(diff[:-1]), np.abs(diff[1:])) > 1e-13
        for i in np.nonzero(flips)[0]:
            fa, fb = scalar_diff(grid[i]), scalar_diff(grid[i + 1])
            if fa * fb < 0:
                kinks.append(brentq(scalar_diff, grid[i], grid[i + 1], xtol=1e-12))
    return np.sort(np.array(kinks))


def sec_fano_efficiency(
    quantizer: Quantizer,
    labeling: Labeling,
    params: ChannelParams,
    tol: float = DEFAULT_TOL,
) -> float:
    """Best-case efficiency when every level uses an ideal hard-input code.

    Models level i as a BSC whose crossover is the ML estimator's error
    probability p_i.  Fano's inequality gives H(L_i|Y, earlier) <= h(p_i)
    per level, hence I(X;Y-side) >= H(X) - sum_i h(p_i); normalizing by
    I(X;Y) yields the efficiency bound of the per-level hard scheme.
    """
    probs = sec_level_error_probs(quantizer, labeling, params, tol)
    net = entropy_qx(quantizer) - float(np.sum(binary_entropy(probs)))
    return net / mutual_information_xy(params)


def optimize_sec_quantizer(
    k: int,
    params: ChannelParams,
    labeling: Labeling | None = None,
    max_iter: int = 5000,
    restarts: int = 2,
) -> Quantizer:
    """Boundaries maximizing the per-level hard-decoding rate of
    :func:`sec_fano_efficiency` rather than the mutual information.

    The two optima differ noticeably: the hard scheme prefers wider central
    intervals that keep the upper levels' estimators reliable.
    """
    from scipy.optimize import minimize
    from scipy.special import ndtri

    from .quantizer import _interval_probs, make_labeling, make_quantizer

    if k < 4 or k % 2 != 0:
        raise InvalidInputError(f"k must be even and >= 4, got {k}")
    if labeling is None:
        labeling = make_labeling("binary", k)
    _check_pairing_k(labeling, k)

    level_masks = []
    for pos, level in enumerate(labeling.level_order):
        bits = labeling.level_bits(level)
        level_masks.append(
            [
                (mask, mask & (bits == 1))
                for mask in _pattern_masks(labeling, labeling.level_order[:pos])
            ]
        )

    lim = GAUSS_WINDOW_SIGMAS * params.sigma_y
    nodes, wts = panel_nodes(-lim, lim, 64)
    pdf_w = wts * y_marginal_pdf(nodes, params)

    def neg_net(offsets: np.ndarray) -> float:
        pos = np.cumsum(np.abs(offsets))
        b = np.concatenate((-pos[::-1], [0.0], pos))
        h_q = -np.sum(xlog2x(_interval_probs(b, params.sigma_x)))
        w = interval_posteriors(nodes, b, params)
        leak = 0.0
        for pairs in level_masks:
            total = np.zeros(len(nodes))
            for mask, mask1 in pairs:
                p1 = w[:, mask1].sum(axis=1)
                total += np.minimum(p1, w[:, mask].sum(axis=1) - p1)
            leak += binary_entropy(float(np.dot(pdf_w, total)))
        return -(h_q - leak)

    quantiles = ndtri(np.arange(k // 2 + 1, k) / k) * params.sigma_y
    best_x = np.diff(np.concatenate(([0.0], quantiles)))
    best_f = neg_net(best_x)
    for _ in range(restarts + 1):
        res = minimize(
            neg_net,
            best_x,
            method="Nelder-Mead",
            options={"maxiter": max_iter, "xatol": 1e-8, "fatol": 1e-9, "adaptive": True},
        )
        improved = best_f - res.fun
        if res.fun < best_f:
            best_x, best_f = res.x, res.fun
        if improved < 1e-8:
            break

    pos = np.cumsum(np.abs(best_x))
    b = np.concatenate((-pos[::-1], [0.0], pos))
    return make_quantizer(0.5 * (b - b[::-1]), params.sigma_x)


def _check_pairing_k(labeling: Labeling, k: int):
    if labeling.k != k:
        raise InvalidInputError(f"labeling is for k={labeling.k}, expected k={k}")


def efficiency(h_qx: float, i_red: float, params: ChannelParams) -> EfficiencyReport:
    """Disclosure efficiency eta = (H(quantized X) - disclosed bits) / I(X;Y)."""
    if i_red < 0:
        raise InvalidInputError(f"disclosed information must be >= 0, got {i_red}")
    i_xy = mutual_information_xy(params)
    return EfficiencyReport(
        h_qx=h_qx,
        i_red=i_red,
        i_xy=i_xy,
        eta=(h_qx - i_red) / i_xy,
        negative=i_red > h_qx,
    )
