"""Extrinsic-information transfer curves for demappers and codes.

Priors are modeled by the symmetric Gaussian LLR channel N((2b-1) s^2/2,
s^2) whose mutual information J(s) is evaluated by quadrature; curves are
measured by Monte-Carlo and composed to predict whether an iterative
decoding schedule can finish.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from . import quadrature
from .channel import ChannelParams, generate_pairs
from .demapper import batch_bit_llrs, extrinsic_from_decoder
from .errors import InvalidInputError, PrecisionWarning
from .ldpc import LdpcCode, decode_coset_soft
from .quantizer import Labeling, Quantizer, quantize

SIGMA_CAP = 45.0
DEFAULT_GRID = np.round(np.linspace(0.0, 1.0, 11), 10)
DEFAULT_TRIALS = 100_000


def j_function(sigma: float) -> float:
    """MI of a binary input seen through the consistent Gaussian LLR channel."""
    if sigma < 0:
        raise InvalidInputError("sigma must be nonnegative")
    if sigma == 0.0:
        return 0.0
    if sigma >= SIGMA_CAP:
        return 1.0
    mean, sd = 0.5 * sigma * sigma, sigma

    def integrand(lam):
        pdf = np.exp(-0.5 * ((lam - mean) / sd) ** 2) / (sd * np.sqrt(2 * np.pi))
        return pdf * np.logaddexp(0.0, -lam) / np.log(2.0)

    lo = mean - 10.0 * sd
    hi = mean + 10.0 * sd
    loss = quadrature.integrate(integrand, lo, hi, tol=1e-12)
    return float(min(max(1.0 - loss, 0.0), 1.0))


def j_inverse(ia: float) -> float:
    """Noise parameter with J(sigma) = ia; saturates at the numerical cap."""
    if not 0.0 <= ia <= 1.0:
        raise InvalidInputError("mutual information must lie in [0, 1]")
    if ia == 0.0:
        return 0.0
    if ia >= j_function(SIGMA_CAP - 1e-9):
        return SIGMA_CAP
    return float(brentq(lambda s: j_function(s) - ia, 1e-8, SIGMA_CAP, xtol=1e-12))


def gaussian_prior_llrs(target_ia: float, true_bits: np.ndarray, seed) -> np.ndarray:
    """Synthetic prior LLRs carrying target_ia bits about true_bits each."""
    bits = np.asarray(true_bits)
    sigma = j_inverse(target_ia)
    rng = np.random.default_rng(seed)
    signs = 2.0 * bits.astype(float) - 1.0
    return signs * 0.5 * sigma * sigma + sigma * rng.standard_normal(bits.shape)


def mi_from_llrs(llrs: np.ndarray, true_bits: np.ndarray) -> tuple[float, float]:
    """(estimate, standard error) of the per-bit MI carried by the LLRs.

    Expectation estimator 1 - E[log2(1 + exp(-(2b-1) lambda))] under the
    positive-favors-1 convention.
    """
    llrs = np.asarray(llrs, float)
    bits = np.asarray(true_bits)
    if llrs.shape != bits.shape:
        raise InvalidInputError("llrs and true_bits must have matching shapes")
    aligned = (2.0 * bits.astype(float) - 1.0) * llrs
    losses = np.logaddexp(0.0, -aligned) / np.log(2.0)
    est = 1.0 - float(np.mean(losses))
    stderr = float(np.std(losses) / np.sqrt(losses.size))
    return est, stderr


@dataclass(frozen=True)
class TransferCurve:
    """Sampled (I_A, I_E) transfer characteristic of one soft component."""

    kind: str
    context_id: str
    snr: float
    i_a: np.ndarray = field(repr=False)
    i_e: np.ndarray = field(repr=False)
    trials: int = 0
    stderr: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("demapper", "code"):
            raise InvalidInputError("kind must be 'demapper' or 'code'")
        ia = np.asarray(self.i_a, float)
        ie = np.clip(np.asarray(self.i_e, float), 0.0, 1.0)
        if ia.ndim != 1 or ia.shape != ie.shape:
            raise InvalidInputError("i_a and i_e must be matching 1-d arrays")
        if np.any(np.diff(ia) <= 0):
            raise InvalidInputError("i_a samples must be strictly increasing")
        if np.any((ia < 0) | (ia > 1)):
            raise InvalidInputError("i_a samples must lie in [0, 1]")
        err = self.stderr if self.stderr is None else np.asarray(self.stderr, float)
        for name, arr in (("i_a", ia), ("i_e", ie), ("stderr", err)):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "i_a", ia)
        object.__setattr__(self, "i_e", ie)
        object.__setattr__(self, "stderr", err)

    def __call__(self, ia) -> np.ndarray:
        """Linear interpolation, clamped at the sampled ends."""
        return np.interp(ia, self.i_a, self.i_e)


def _curve_points(grid) -> np.ndarray:
    grid = np.asarray(grid, float)
    if np.any((grid < 0) | (grid > 1)):
        raise InvalidInputError("grid values must lie in [0, 1]")
    return grid


def _warn_if_noisy(stderrs, context: str):
    worst = float(np.max(stderrs))
    if worst > 0.01:
        warnings.warn(
            f"{context}: MI standard error {worst:.4f} exceeds 0.01; "
            "increase trials",
            PrecisionWarning,
            stacklevel=3,
        )


def demapper_curve(
    quantizer: Quantizer,
    labeling: Labeling,
    params: ChannelParams,
    level: int | None = None,
    grid=DEFAULT_GRID,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
) -> TransferCurve:
    """Monte-Carlo demapper transfer curve.

    level None measures the interleaved scheme: every level is demapped
    with Gaussian priors of the same strength on all other levels, and the
    output MI is averaged over levels.  A concrete level measures the
    successive scheme: levels decoded before it (in the labeling's decode
    order) are fixed to their true bits, later levels get Gaussian priors.
    """
    grid = _curve_points(grid)
    l = labeling.l
    pos = None if level is None else labeling.level_order.index(level)
    point_seeds = np.random.SeedSequence(seed).spawn(grid.size)
    out, errs = [], []
    for ia, pseed in zip(grid, point_seeds):
        rng = np.random.default_rng(pseed)
        batch = generate_pairs(trials, params, rng.integers(2**63))
        cells = quantize(batch.xs, quantizer) - 1
        bit_rows = np.stack([labeling.level_bits(m)[cells] for m in range(1, l + 1)])
        prior_seeds = rng.integers(2**63, size=l)

        def priors_for(target: int) -> np.ndarray:
            rows = np.empty((l, trials))
            for m in range(1, l + 1):
                if m == target:
                    rows[m - 1] = 0.5
                elif pos is not None and labeling.level_order.index(m) < pos:
                    rows[m - 1] = bit_rows[m - 1].astype(float)
                else:
                    lam = gaussian_prior_llrs(ia, bit_rows[m - 1], prior_seeds[m - 1])
                    rows[m - 1] = expit(lam)
            return rows

        if level is None:
            per_level = [
                mi_from_llrs(
                    batch_bit_llrs(batch.ys, m, priors_for(m), quantizer, labeling, params),
                    bit_rows[m - 1],
                )
                for m in range(1, l + 1)
            ]
            out.append(float(np.mean([v for v, _ in per_level])))
            errs.append(float(np.sqrt(np.mean([e**2 for _, e in per_level]))))
        else:
            llrs = batch_bit_llrs(
                batch.ys, level, priors_for(level), quantizer, labeling, params
            )
            est, err = mi_from_llrs(llrs, bit_rows[level - 1])
            out.append(est)
            errs.append(err)
    label = "global" if level is None else f"level{level}"
    context = f"{labeling.scheme}-k{labeling.k}-{label}"
    _warn_if_noisy(errs, context)
    return TransferCurve(
        kind="demapper",
        context_id=context,
        snr=params.snr,
        i_a=grid,
        i_e=np.array(out),
        trials=trials,
        stderr=np.array(errs),
    )


def code_curve(
    code: LdpcCode,
    trials: int = DEFAULT_TRIALS,
    grid=DEFAULT_GRID,
    seed: int = 0,
    max_iter: int = 100,
) -> TransferCurve:
    """Transfer curve of a syndrome decoder, all-zero-word simulation.

    By coset symmetry the all-zero word with a zero target syndrome is
    representative of every coset.
    """
    grid = _curve_points(grid)
    blocks = max(1, int(np.ceil(trials / code.n)))
    zeros_bits = np.zeros(code.n, np.uint8)
    zero_syndrome = np.zeros(code.m, np.uint8)
    point_seeds = np.random.SeedSequence(seed).spawn(grid.size)
    out, errs = [], []
    for ia, pseed in zip(grid, point_seeds):
        rng = np.random.default_rng(pseed)
        ext_all, bits_all = [], []
        for _ in range(blocks):
            prior = gaussian_prior_llrs(ia, zeros_bits, rng.integers(2**63))
            _, _, _, total = decode_coset_soft(
                prior, zero_syndrome, code, max_iter, min_iter=1
            )
            ext_all.append(extrinsic_from_decoder(total, np.clip(prior, -30, 30)))
            bits_all.append(zeros_bits)
        est, err = mi_from_llrs(np.concatenate(ext_all), np.concatenate(bits_all))
        out.append(est)
        errs.append(err)
    context = f"{code.dist_id}-n{code.n}-s{code.seed}"
    _warn_if_noisy(errs, context)
    return TransferCurve(
        kind="code",
        context_id=context,
        snr=float("nan"),
        i_a=grid,
        i_e=np.array(out),
        trials=blocks * code.n,
        stderr=np.array(errs),
    )


def predict_decodable(
    demapper_curves,
    code_curves,
    start_ia: float = 0.0,
    max_steps: int = 200,
    target: float = 0.999,
) -> tuple[bool, list]:
    """Fixed-point iteration of the demapper/decoder composition.

    Single curves model the interleaved scheme (one demapper, one code);
    equal-length sequences model the successive scheme, one pair per
    syndrome level in decode order.  Each level's demapper input is the
    weakest current belief among the other levels (levels decoded earlier
    are treated as recovered, matching how level curves are measured).
    Returns (decodable, staircase) where the staircase traces (I_A, I_E)
    pairs of the composition for plotting.
    """
    d_curves = [demapper_curves] if isinstance(demapper_curves, TransferCurve) else list(demapper_curves)
    c_curves = [code_curves] if isinstance(code_curves, TransferCurve) else list(code_curves)
    if len(d_curves) != len(c_curves):
        raise InvalidInputError("need one code curve per demapper curve")
    n_lvl = len(d_curves)
    state = np.full(n_lvl, float(start_ia))
    trajectory = [(float(np.mean(state)), 0.0)]
    for _ in range(max_steps):
        prev = state.copy()
        outs = []
        for i in range(n_lvl):
            others = np.delete(state, i)
            ia_in = float(others.min()) if others.size else 1.0
            d_out = float(d_curves[i](ia_in))
            state[i] = float(c_curves[i](d_out))
            outs.append(d_out)
        trajectory.append((float(np.mean(prev)), float(np.mean(outs))))
        trajectory.append((float(np.mean(state)), float(np.mean(outs))))
        if np.all(np.abs(state - prev) < 1e-6):
            break
    decodable = bool(np.all(state >= target))
    return decodable, trajectory


def curves_to_csv(curves, stream=None) -> str:
    """Serialize curves to the interchange CSV (one row per sample)."""
    own = stream is None
    buf = stream or io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["kind", "context_id", "snr", "i_a", "i_e", "trials", "stderr"])
    for curve in curves:
        errs = curve.stderr if curve.stderr is not None else np.full(curve.i_a.size, np.nan)
        for ia, ie, se in zip(curve.i_a, curve.i_e, errs):
            writer.writerow(
                [curve.kind, curve.context_id, repr(float(curve.snr)),
                 repr(float(ia)), repr(float(ie)), curve.trials, repr(float(se))]
            )
    return buf.getvalue() if own else ""


def curves_from_csv(text: str) -> list:
    """Parse the interchange CSV back into TransferCurve objects."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        return []
    grouped: dict = {}
    for row in rows:
        key = (row["kind"], row["context_id"], row["snr"])
        grouped.setdefault(key, []).append(row)
    curves = []
    for (kind, context_id, snr), group in grouped.items():
        group.sort(key=lambda r: float(r["i_a"]))
        curves.append(
            TransferCurve(
                kind=kind,
                context_id=context_id,
                snr=float(snr),
                i_a=np.array([float(r["i_a"]) for r in group]),
                i_e=np.array([float(r["i_e"]) for r in group]),
                trials=int(group[0]["trials"]),
                stderr=np.array([float(r["stderr"]) for r in group]),
            )
        )
    return curves
