"""
Combining per-group p-values with weighted Stouffer.

Per-group tests are discrete, so either mid-p-values (used to rank pairs in
the greedy search) or randomised p-values (used for final inference) are
combined.
"""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri_exp

from mutexsets.analysis.exact_test import PValueTriple
from mutexsets.utils.constants import LOG_CDF_Z_THRESHOLD
from mutexsets.utils.helpers import derive_uniform

MID = "mid"
RANDOMIZED = "randomized"


@dataclass(frozen=True)
class CombineMode:
    """How per-group triples are turned into p-values before combining."""

    kind: str
    seed: int = None

    def __post_init__(self):
        if self.kind not in (MID, RANDOMIZED):
            raise ValueError(f"unknown combine mode: {self.kind}")
        if self.kind == RANDOMIZED:
            if self.seed is None or not 0 <= int(self.seed) < 2**64:
                raise ValueError("randomized mode needs a 64-bit master seed")

    @classmethod
    def mid(cls):
        return cls(MID)

    @classmethod
    def randomized(cls, seed):
        return cls(RANDOMIZED, int(seed))


@dataclass(frozen=True)
class GroupEvidence:
    """One group's test result and its Stouffer weight."""

    group: str
    triple: PValueTriple
    weight: float

    def __post_init__(self):
        if not math.isfinite(self.weight) or self.weight < 0:
            raise ValueError(f"invalid weight for group {self.group}: {self.weight}")

    @property
    def informative(self):
        """False when the weight is 0 or the null distribution is a single point."""
        return self.weight > 0 and not (self.triple.p >= 1.0 and self.triple.p_minus <= 0.0)


def pairwise_weight(n_tau, c1, c2):
    """
    Stouffer weight of a group for a pair of alterations.

    The inverse asymptotic standard deviation of the empirical log-odds
    ratio under the null. Degenerate margins (0 or n_tau) give weight 0.

    Args:
        n_tau: Number of samples in the group
        c1, c2: Coverages of the two alterations in the group

    Returns:
        float: The unnormalised weight
    """
    if not (0 < c1 < n_tau and 0 < c2 < n_tau):
        return 0.0
    n = float(n_tau)
    total = (
        n / (c1 * c2)
        + n / (c1 * (n - c2))
        + n / ((n - c1) * c2)
        + n / ((n - c1) * (n - c2))
    )
    return total ** -0.5


def pairwise_weight_batch(n_tau, c1, c2):
    """Vectorised pairwise_weight."""
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    n = float(n_tau)
    valid = (c1 > 0) & (c1 < n) & (c2 > 0) & (c2 < n)
    with np.errstate(divide="ignore", invalid="ignore"):
        total = n / (c1 * c2) + n / (c1 * (n - c2)) + n / ((n - c1) * c2) + n / ((n - c1) * (n - c2))
        weights = total ** -0.5
    return np.where(valid, weights, 0.0)


def group_weight(pair_weights):
    """Heuristic group weight: square root of the sum of squared pair weights."""
    pair_weights = np.asarray(list(pair_weights), dtype=float)
    if pair_weights.size == 0:
        raise ValueError("group_weight needs at least one pair weight")
    return float(np.sqrt(np.sum(pair_weights**2)))


def set_group_weight(n_tau, coverages):
    """Group weight of a set from the coverages of its (pseudo-)members."""
    coverages = [int(c) for c in coverages]
    if len(coverages) < 2:
        return 0.0
    return group_weight(pairwise_weight(n_tau, a, b) for a, b in combinations(coverages, 2))


def p_from_z(z):
    """Standard normal CDF, through the log-CDF deep in the lower tail."""
    if z < LOG_CDF_Z_THRESHOLD:
        return float(math.exp(log_ndtr(z)))
    return float(ndtr(z))


def stouffer_z(log_ps, ws):
    """
    Weighted Stouffer z-score from log p-values.

    Zero weights are ignored; returns -inf if a weighted p is 0 and +inf if
    a weighted p is 1.
    """
    log_ps = np.asarray(log_ps, dtype=float)
    ws = np.asarray(ws, dtype=float)
    if log_ps.shape != ws.shape:
        raise ValueError("p-values and weights must have the same length")
    active = ws > 0
    if not active.any():
        raise ValueError("at least one positive weight is required")
    log_ps, ws = log_ps[active], ws[active]
    if np.any(np.isneginf(log_ps)):
        return -math.inf
    if np.any(log_ps >= 0.0):
        return math.inf
    zs = ndtri_exp(log_ps)
    return float(np.dot(ws, zs) / np.sqrt(np.dot(ws, ws)))


def stouffer(ps, ws):
    """
    Combine p-values with Stouffer's weighted z method.

    Args:
        ps: p-values, each in (0, 1)
        ws: Non-negative weights, at least one positive

    Returns:
        float: Phi(sum(w * Phi^-1(p)) / sqrt(sum(w^2)))
    """
    ps = np.asarray(ps, dtype=float)
    with np.errstate(divide="ignore"):
        log_ps = np.log(ps)
    return p_from_z(stouffer_z(log_ps, ws))


def stouffer_z_batch(log_ps, ws):
    """
    Stouffer z-scores for many sets at once.

    Args:
        log_ps: Array (groups, sets) of log p-values
        ws: Array (groups, sets) of weights; 0 marks a skipped group

    Returns:
        np.ndarray: z per set; +inf where no group carries weight
    """
    log_ps = np.asarray(log_ps, dtype=float)
    ws = np.asarray(ws, dtype=float)
    active = ws > 0
    safe = np.where(active, np.minimum(log_ps, 0.0), -math.log(2.0))
    zs = np.where(active, ndtri_exp(safe), 0.0)
    norm = np.sqrt(np.sum(ws**2, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.sum(ws * zs, axis=0) / norm
    return np.where(norm > 0, z, np.inf)


def randomize_log_p(triple, u):
    """log of p - (p - p_minus) * u, i.e. log(u * p_minus + (1 - u) * p)."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"uniform draw outside (0, 1): {u}")
    return float(np.logaddexp(math.log(u) + triple.log_p_minus, math.log1p(-u) + triple.log_p))


def randomize_p(triple, u):
    """
    Pearson randomised p-value, uniform on (p_minus, p) under the null.

    Args:
        triple: PValueTriple
        u: Uniform(0, 1) draw

    Returns:
        float: p - (p - p_minus) * u
    """
    return float(math.exp(randomize_log_p(triple, u)))


def evidence_log_p(item, mode, set_key):
    """The log p-value a group contributes under the given mode."""
    if mode.kind == MID:
        return item.triple.log_mid
    u = derive_uniform(mode.seed, set_key, item.group)
    return randomize_log_p(item.triple, u)


def combined_z(evidence, mode, set_key):
    """Stouffer z of the informative groups; +inf when none is informative."""
    informative = [item for item in evidence if item.informative]
    if not informative:
        return math.inf
    log_ps = [evidence_log_p(item, mode, set_key) for item in informative]
    ws = [item.weight for item in informative]
    return stouffer_z(log_ps, ws)


def combine_across_groups(evidence, mode, set_key):
    """
    Combine per-group evidence for one set.

    Groups with zero weight or a single-point null distribution are skipped.
    In randomised mode each group draws its own uniform from a stream keyed
    by (master seed, set_key, group).

    Args:
        evidence: Sequence of GroupEvidence
        mode: CombineMode
        set_key: Canonical set key string

    Returns:
        float: The combined p-value (1 when no group carries evidence)
    """
    z = combined_z(evidence, mode, set_key)
    if z == math.inf:
        return 1.0
    return p_from_z(z)
