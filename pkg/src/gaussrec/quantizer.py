"""Symmetric scalar quantizer and per-level bit labelings.

The quantizer splits the real line into k intervals symmetric about zero and
is optimized (Nelder-Mead over the positive boundary offsets) to maximize the
mutual information between the quantized source and Bob's observation.
Labelings assign each interval an l-bit label; the three supported schemes
share the same centered index but differ in bit transform or decode order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtri
from scipy.stats import norm

from .channel import ChannelParams, interval_posteriors, y_marginal_pdf
from .errors import ConvergenceError, InvalidInputError
from .quadrature import (
    GAUSS_WINDOW_SIGMAS,
    gauss_mass,
    integrate,
    panel_nodes,
    xlog2x,
)

SCHEMES = ("binary", "anti_binary", "gray")


@dataclass(frozen=True)
class Quantizer:
    """Interval partition of the real line.

    boundaries: sorted array of k-1 finite interval edges.
    representatives: conditional means of the source inside each interval.
    probabilities: source mass of each interval; sums to 1.
    """

    boundaries: np.ndarray
    representatives: np.ndarray
    probabilities: np.ndarray
    sigma_x: float
    objective: float | None = None  # I(quantized X; Y) reported by the optimizer

    def __post_init__(self):
        b = np.asarray(self.boundaries, float)
        if b.ndim != 1 or not np.all(np.diff(b) > 0):
            raise InvalidInputError("boundaries must be strictly increasing")
        if len(self.probabilities) != len(b) + 1:
            raise InvalidInputError("probabilities must have k = len(boundaries)+1 entries")
        for name in ("boundaries", "representatives", "probabilities"):
            getattr(self, name).setflags(write=False)

    @property
    def k(self) -> int:
        return len(self.probabilities)

    def is_symmetric(self, tol: float = 1e-9) -> bool:
        b = self.boundaries
        return self.k % 2 == 0 and bool(np.all(np.abs(b + b[::-1]) <= tol))

    def to_json(self, snr: float | None = None, scheme: str | None = None) -> str:
        doc = {
            "snr": snr,
            "k": self.k,
            "boundaries": self.boundaries.tolist(),
            "probabilities": self.probabilities.tolist(),
            "scheme": scheme,
            "sigma_x": self.sigma_x,
            "objective": self.objective,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Quantizer":
        doc = json.loads(text)
        sigma_x = float(doc.get("sigma_x", 1.0))
        boundaries = np.asarray(doc["boundaries"], float)
        return cls(
            boundaries=boundaries,
            representatives=_conditional_means(boundaries, sigma_x),
            probabilities=np.asarray(doc["probabilities"], float),
            sigma_x=sigma_x,
            objective=doc.get("objective"),
        )


def _interval_probs(boundaries: np.ndarray, sigma_x: float) -> np.ndarray:
    edges = np.concatenate(([-np.inf], boundaries, [np.inf])) / sigma_x
    return gauss_mass(edges[:-1], edges[1:])


def _conditional_means(boundaries: np.ndarray, sigma_x: float) -> np.ndarray:
    edges = np.concatenate(([-np.inf], boundaries, [np.inf])) / sigma_x
    probs = gauss_mass(edges[:-1], edges[1:])
    pdf = norm.pdf(edges)
    pdf = np.where(np.isfinite(edges), pdf, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        means = sigma_x * (pdf[:-1] - pdf[1:]) / probs
    return np.where(probs > 0, means, 0.0)


def make_quantizer(boundaries: np.ndarray, sigma_x: float = 1.0) -> Quantizer:
    """Quantizer from explicit boundaries; probabilities from the source CDF."""
    boundaries = np.asarray(boundaries, float)
    return Quantizer(
        boundaries=boundaries,
        representatives=_conditional_means(boundaries, sigma_x),
        probabilities=_interval_probs(boundaries, sigma_x),
        sigma_x=sigma_x,
    )


def quantize(x, quantizer: Quantizer):
    """Interval index in 1..k; boundary points belong to the right interval."""
    x_arr = np.asarray(x, float)
    if np.any(np.isnan(x_arr)):
        raise InvalidInputError("cannot quantize NaN")
    idx = np.searchsorted(quantizer.boundaries, x_arr, side="right") + 1
    if np.ndim(x) == 0:
        return int(idx)
    return idx


def quantizer_mi(quantizer: Quantizer, params: ChannelParams, tol: float = 1e-10) -> float:
    """I(quantized X; Y) in bits, by quadrature over y."""
    h_q = float(-np.sum(xlog2x(quantizer.probabilities)))
    return h_q - _cond_entropy(quantizer.boundaries, params, tol)


def _cond_entropy(boundaries: np.ndarray, params: ChannelParams, tol: float) -> float:
    lim = GAUSS_WINDOW_SIGMAS * params.sigma_y

    def integrand(y):
        w = interval_posteriors(y, boundaries, params)
        return -y_marginal_pdf(y, params) * xlog2x(w).sum(axis=1)

    return integrate(integrand, -lim, lim, tol=tol)


class _Objective:
    """Negative I(quantized X;Y) over the free positive boundary offsets.

    Evaluated on a fixed dense Gauss-Legendre grid: the integrand is smooth,
    so a static 1536-node rule is accurate far beyond the optimizer's needs
    and much faster than re-running the adaptive rule per iterate.
    """

    def __init__(self, k: int, params: ChannelParams):
        self.k = k
        self.params = params
        lim = GAUSS_WINDOW_SIGMAS * params.sigma_y
        self.nodes, self.weights = panel_nodes(-lim, lim, 64)
        self.pdf_w = self.weights * y_marginal_pdf(self.nodes, params)

    def boundaries_from(self, offsets: np.ndarray) -> np.ndarray:
        # offsets are |deltas| between consecutive positive boundaries; the
        # middle boundary sits at zero by symmetry.
        pos = np.cumsum(np.abs(offsets))
        return np.concatenate((-pos[::-1], [0.0], pos))

    def __call__(self, offsets: np.ndarray) -> float:
        b = self.boundaries_from(offsets)
        probs = _interval_probs(b, self.params.sigma_x)
        h_q = -np.sum(xlog2x(probs))
        w = interval_posteriors(self.nodes, b, self.params)
        h_cond = -np.dot(self.pdf_w, xlog2x(w).sum(axis=1))
        return -(h_q - h_cond)


def optimize_quantizer(
    k: int,
    params: ChannelParams,
    max_iter: int = 2000,
    tol: float = 1e-8,
    restarts: int = 2,
) -> Quantizer:
    """Maximize I(quantized X;Y) over symmetric k-interval partitions.

    Nelder-Mead over the k/2 - 1 positive boundary offsets, initialized at
    the equal-probability quantiles of the marginal of Y.  The final
    objective is re-evaluated with the adaptive rule and stored on the
    returned quantizer.
    """
    if k < 2 or k % 2 != 0:
        raise InvalidInputError(f"k must be even and >= 2, got {k}")
    if k == 2:
        q = make_quantizer(np.array([0.0]), params.sigma_x)
        return Quantizer(
            boundaries=q.boundaries,
            representatives=q.representatives,
            probabilities=q.probabilities,
            sigma_x=params.sigma_x,
            objective=quantizer_mi(q, params),
        )

    objective = _Objective(k, params)
    quantiles = ndtri(np.arange(k // 2 + 1, k) / k) * params.sigma_y
    x0 = np.diff(np.concatenate(([0.0], quantiles)))

    best_x, best_f = x0, objective(x0)
    for _ in range(restarts + 1):
        res = minimize(
            objective,
            best_x,
            method="Nelder-Mead",
            options={
                "maxiter": max_iter,
                "xatol": tol,
                "fatol": tol,
                "adaptive": k > 8,
            },
        )
        moved = best_f - res.fun
        if res.fun < best_f:
            best_x, best_f = res.x, res.fun
        if moved < 1e-9:
            break
    else:
        if moved > 1e-6:
            raise ConvergenceError(
                f"quantizer optimization still improving after {restarts + 1} runs",
                best=objective.boundaries_from(best_x),
            )

    boundaries = objective.boundaries_from(best_x)
    # Enforce exact antisymmetry lost to floating-point roundoff.
    boundaries = 0.5 * (boundaries - boundaries[::-1])
    q = make_quantizer(boundaries, params.sigma_x)
    return Quantizer(
        boundaries=q.boundaries,
        representatives=q.representatives,
        probabilities=q.probabilities,
        sigma_x=params.sigma_x,
        objective=quantizer_mi(q, params),
    )


@dataclass(frozen=True)
class Labeling:
    """Per-interval bit labels and the level decode order.

    ``table[j-1, m-1]`` is the level-m bit of interval j, where level m is
    the bit of significance m-1 (level 1 = least significant bit) of the
    centered interval index.  ``level_order`` is the decode sequence:
    natural for binary and gray, reversed for anti_binary.
    """

    scheme: str
    k: int
    table: np.ndarray
    level_order: tuple[int, ...]

    def __post_init__(self):
        self.table.setflags(write=False)
        codes = {tuple(row) for row in self.table.tolist()}
        if len(codes) != self.k:
            raise InvalidInputError("labels must be distinct across intervals")
        if sorted(self.level_order) != list(range(1, self.l + 1)):
            raise InvalidInputError("level_order must be a permutation of 1..l")

    @property
    def l(self) -> int:
        return self.table.shape[1]

    def level_bits(self, m: int) -> np.ndarray:
        """Bit of level m for every interval, shape (k,)."""
        return self.table[:, m - 1]


def centered_codes(k: int, gray: bool = False) -> np.ndarray:
    """l-bit integer codes of the k intervals, centered in the label space."""
    l = max(1, math.ceil(math.log2(k)))
    offset = (2**l - k) // 2
    codes = np.arange(k) + offset
    if gray:
        codes = codes ^ (codes >> 1)
    return codes


def make_labeling(scheme: str, k: int) -> Labeling:
    if scheme not in SCHEMES:
        raise InvalidInputError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    l = max(1, math.ceil(math.log2(k)))
    codes = centered_codes(k, gray=scheme == "gray")
    table = (codes[:, None] >> np.arange(l)[None, :]) & 1
    order = tuple(range(l, 0, -1)) if scheme == "anti_binary" else tuple(range(1, l + 1))
    return Labeling(scheme=scheme, k=k, table=table.astype(np.uint8), level_order=order)


def label_bit(m: int, j: int, labeling: Labeling) -> int:
    """Level-m bit of interval j (both 1-based)."""
    if not 1 <= m <= labeling.l:
        raise InvalidInputError(f"level {m} outside 1..{labeling.l}")
    if not 1 <= j <= labeling.k:
        raise InvalidInputError(f"interval {j} outside 1..{labeling.k}")
    return int(labeling.table[j - 1, m - 1])


def check_symmetry(
    labeling: Labeling,
    quantizer: Quantizer,
    params: ChannelParams,
    tol: float = 1e-8,
    grid_points: int = 201,
) -> list[bool]:
    """Per-level test of the mirror property p(y, bit=b) = p(-y, bit=1-b).

    Evaluated on a symmetric y-grid; a level passes when the worst absolute
    mismatch of the joint density is below ``tol``.
    """
    lim = GAUSS_WINDOW_SIGMAS * params.sigma_y
    y = np.linspace(-lim, lim, grid_points)
    w = interval_posteriors(y, quantizer.boundaries, params) * y_marginal_pdf(y, params)[:, None]
    results = []
    for m in range(1, labeling.l + 1):
        bits = labeling.level_bits(m)
        joint_b1 = w[:, bits == 1].sum(axis=1)  # p(y, bit=1)
        joint_b0 = w[:, bits == 0].sum(axis=1)
        mismatch = np.max(np.abs(joint_b1 - joint_b0[::-1]))
        results.append(bool(mismatch <= tol))
    return results
