"""
Weighted multiple testing over all sets of size 2..k_max.

Set weights depend only on the set size. They decrease geometrically so
that adding one alteration must improve a p-value by roughly a factor
alpha / (m - |M|) to pay for itself, and are normalised to average 1 over
every set that could have been tested.
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.special import gammaln, logsumexp

from mutexsets.data.data_model import AlterationSet
from mutexsets.utils.helpers import log_binom

logger = logging.getLogger(__name__)

# Relative slack when comparing log p-values against the level
_LOG_TOL = 1e-12


@dataclass(frozen=True)
class WeightScheme:
    """Size-dependent weights for m alterations and sets of size 2..k_max."""

    m: int
    k_max: int
    alpha_w: float = 0.05
    _log_prod: np.ndarray = field(init=False, repr=False, compare=False)
    _log_universe: float = field(init=False, repr=False, compare=False)
    _log_norm: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.k_max < 2:
            raise ValueError(f"k_max must be at least 2, got {self.k_max}")
        if self.m < self.k_max:
            raise ValueError(f"k_max={self.k_max} exceeds the number of alterations m={self.m}")
        if not 0.0 < self.alpha_w <= 1.0:
            raise ValueError(f"alpha_w must be in (0, 1], got {self.alpha_w}")

        sizes = np.arange(2, self.k_max + 1)
        # 1 - (1 - alpha)^(1 / (m - k + 1)) for k = 2..k_max
        if self.alpha_w < 1.0:
            steps = -np.expm1(math.log1p(-self.alpha_w) / (self.m - sizes + 1))
        else:
            steps = np.ones(len(sizes))
        log_prod = np.cumsum(np.log(steps))
        log_binoms = log_binom(self.m, sizes)
        object.__setattr__(self, "_log_prod", log_prod)
        object.__setattr__(self, "_log_universe", float(logsumexp(log_binoms)))
        object.__setattr__(self, "_log_norm", float(logsumexp(log_binoms + log_prod)))

    def _index(self, size):
        if not 2 <= size <= self.k_max:
            raise ValueError(f"set size {size} outside [2, {self.k_max}]")
        return size - 2

    @property
    def n_hypotheses(self):
        """Number of sets of size 2..k_max: sum of C(m, l)."""
        return math.exp(self._log_universe)

    @property
    def log_n_hypotheses(self):
        return self._log_universe

    def log_weight(self, size):
        return float(self._log_universe + self._log_prod[self._index(size)] - self._log_norm)

    def log_correction(self, size):
        return float(self._log_norm - self._log_prod[self._index(size)])


def set_weight(scheme, size):
    """
    Weight of every set of the given size.

    Args:
        scheme: WeightScheme
        size: Set size in [2, k_max]

    Returns:
        float: The weight (average 1 over all sets of size 2..k_max)
    """
    return math.exp(scheme.log_weight(size))


def correction_factor(scheme, size):
    """
    Weighted Bonferroni multiplier for a set of the given size.

    Equal to sum(C(m, l) for l in 2..k_max) / w(size).
    """
    return math.exp(scheme.log_correction(size))


def correction_factor_approx(m, alpha_w, size):
    """
    Closed-form approximation of the correction factor for large m and k_max.

    (e^a - 1 - a) * a^(-size) * size! * C(m, size)
    """
    log_value = (
        math.log(math.expm1(alpha_w) - alpha_w)
        - size * math.log(alpha_w)
        + float(gammaln(size + 1))
        + log_binom(m, size)
    )
    return math.exp(log_value)


@dataclass(frozen=True)
class AdjustedResult:
    """A tested set with its raw and multiplicity-adjusted p-values."""

    set: AlterationSet
    p_raw: float
    p_adjusted: float
    weight: float
    significant: bool = False
    log_p_adjusted: float = None
    log_p_raw: float = None

    def __post_init__(self):
        if self.log_p_adjusted is None:
            object.__setattr__(self, "log_p_adjusted", _log(self.p_adjusted))
        if self.log_p_raw is None:
            object.__setattr__(self, "log_p_raw", _log(self.p_raw))

    @property
    def p_adjusted_clamped(self):
        return min(1.0, self.p_adjusted)

    @property
    def size(self):
        return len(self.set)


def _as_set(value):
    return value if isinstance(value, AlterationSet) else AlterationSet(tuple(value))


def _log(p):
    return math.log(p) if p > 0 else -math.inf


def weighted_bonferroni(results, scheme, level, log_p_raw=None):
    """
    Weighted Bonferroni adjustment.

    Args:
        results: Sequence of (set, p_raw)
        scheme: WeightScheme
        level: Familywise significance level
        log_p_raw: Optional log p-values matching results (for tails below 1e-308)

    Returns:
        list: AdjustedResult per input, in input order
    """
    adjusted = []
    for i, (alteration_set, p_raw) in enumerate(results):
        alteration_set = _as_set(alteration_set)
        size = len(alteration_set)
        log_p = log_p_raw[i] if log_p_raw is not None else _log(p_raw)
        log_adj = log_p + scheme.log_correction(size)
        p_adj = math.exp(log_adj) if log_adj < 709.0 else math.inf
        adjusted.append(
            AdjustedResult(
                set=alteration_set,
                p_raw=float(p_raw),
                p_adjusted=p_adj,
                weight=set_weight(scheme, size),
                significant=log_adj <= math.log(level) + _LOG_TOL,
                log_p_adjusted=log_adj,
                log_p_raw=float(log_p),
            )
        )
    return adjusted


def weighted_bh(results, scheme, level, n_hypotheses=None, log_p_raw=None):
    """
    Weighted Benjamini-Hochberg step-up on p / w.

    Hypotheses that were never tested count as p = 1, so the step-up runs
    against the full number of sets of size 2..k_max unless overridden.

    Args:
        results: Sequence of (set, p_raw)
        scheme: WeightScheme
        level: False discovery rate level
        n_hypotheses: Number of hypotheses (default: scheme.n_hypotheses)
        log_p_raw: Optional log p-values matching results

    Returns:
        np.ndarray: Boolean rejection flag per input
    """
    flags, _ = weighted_bh_adjust(results, scheme, level, n_hypotheses, log_p_raw)
    return flags


def weighted_bh_adjust(results, scheme, level, n_hypotheses=None, log_p_raw=None):
    """Weighted BH flags together with log BH-adjusted values (q-values)."""
    results = list(results)
    if not results:
        return np.zeros(0, dtype=bool), np.zeros(0)
    log_n = math.log(n_hypotheses) if n_hypotheses is not None else scheme.log_n_hypotheses

    log_q = np.empty(len(results))
    for i, (alteration_set, p_raw) in enumerate(results):
        log_p = log_p_raw[i] if log_p_raw is not None else _log(p_raw)
        log_q[i] = log_p - scheme.log_weight(len(_as_set(alteration_set)))

    order = np.argsort(log_q, kind="stable")
    ranks = np.arange(1, len(results) + 1)
    scaled = log_q[order] + log_n - np.log(ranks)
    # step-up: running minimum from the largest rank downwards
    stepped = np.minimum.accumulate(scaled[::-1])[::-1]
    adjusted = np.empty(len(results))
    adjusted[order] = stepped
    flags = adjusted <= math.log(level) + _LOG_TOL
    return flags, adjusted


def prune_nested(significant):
    """
    Drop sets that are beaten by a nested significant set.

    A set is dropped when some subset or superset among `significant` (kept
    or not) has a strictly smaller adjusted p-value; on equal adjusted
    p-values the smaller set wins, then the lexicographically smaller one.

    Args:
        significant: Sequence of AdjustedResult

    Returns:
        list: The retained results, in input order
    """
    significant = list(significant)
    index = {result.set.members: i for i, result in enumerate(significant)}

    def rank(result):
        return (result.log_p_adjusted, len(result.set), result.set.members)

    beaten = set()
    for i, result in enumerate(significant):
        members = result.set.members
        for size in range(2, len(members)):
            for sub in combinations(members, size):
                j = index.get(sub)
                if j is None:
                    continue
                if rank(significant[j]) < rank(result):
                    beaten.add(i)
                else:
                    beaten.add(j)

    kept = [result for i, result in enumerate(significant) if i not in beaten]
    logger.debug("pruning kept %d of %d significant sets", len(kept), len(significant))
    return kept
