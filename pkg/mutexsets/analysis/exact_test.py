"""
Exact conditional test for the size of the union of alteration sets.

Under independence of rows, conditional on the row margins, the union size
of a set grows by a hypergeometric increment each time a member is added.
The null distribution is built by iterated convolution of these increments
in log-space.
"""

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from mutexsets.utils.helpers import log_binom

# Upper bound on the number of log-probability cells built at once
_CHUNK_CELLS = 1 << 22
_LOG_HALF = math.log(0.5)


def _logsumexp(values, axis=None):
    """logsumexp that returns -inf for empty or all -inf input without warnings."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        if axis is None:
            return -np.inf
        return np.full(np.delete(values.shape, axis), -np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        return logsumexp(values, axis=axis)


def _exp_prob(log_value):
    return float(min(1.0, math.exp(log_value))) if log_value > -np.inf else 0.0


@dataclass(frozen=True)
class PValueTriple:
    """
    Tail information of a discrete test.

    p = P0(T >= t), p_minus = P0(T > t) and mid = (p + p_minus) / 2, with
    the log-values kept so that very small tails do not underflow.
    """

    p: float
    p_minus: float
    log_p: float = None
    log_p_minus: float = None
    mid: float = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.p_minus <= self.p <= 1.0:
            raise ValueError(f"invalid p-value triple: p={self.p}, p_minus={self.p_minus}")
        if self.log_p is None:
            object.__setattr__(self, "log_p", math.log(self.p) if self.p > 0 else -math.inf)
        if self.log_p_minus is None:
            object.__setattr__(
                self, "log_p_minus", math.log(self.p_minus) if self.p_minus > 0 else -math.inf
            )
        object.__setattr__(self, "mid", self.p - 0.5 * (self.p - self.p_minus))

    @classmethod
    def from_logs(cls, log_p, log_p_minus):
        log_p = min(0.0, float(log_p))
        log_p_minus = min(log_p, float(log_p_minus))
        return cls(_exp_prob(log_p), _exp_prob(log_p_minus), log_p, log_p_minus)

    @property
    def log_mid(self):
        return float(np.logaddexp(self.log_p, self.log_p_minus)) + _LOG_HALF

    @property
    def point_mass(self):
        """P0(T = t)."""
        return self.p - self.p_minus


@dataclass(frozen=True)
class TailDistribution:
    """
    Probability mass function of the union size on a (possibly truncated) support.

    log_masses[i] is the log-probability of union size support_floor + i.
    """

    n: int
    support_floor: int
    log_masses: np.ndarray
    support_max: int

    @property
    def masses(self):
        return np.exp(self.log_masses)

    @property
    def support(self):
        return np.arange(self.support_floor, self.support_floor + len(self.log_masses))

    def pmf(self, x):
        i = int(x) - self.support_floor
        if 0 <= i < len(self.log_masses):
            return float(np.exp(self.log_masses[i]))
        return 0.0

    def log_tail(self, x, strict=False):
        """log P(union >= x), or log P(union > x) when strict."""
        start = int(x) - self.support_floor + (1 if strict else 0)
        return float(_logsumexp(self.log_masses[max(0, start):]))

    def log_head(self, x, strict=False):
        """log P(union <= x), or log P(union < x) when strict."""
        stop = int(x) - self.support_floor + (0 if strict else 1)
        if stop <= 0:
            return -math.inf
        return float(_logsumexp(self.log_masses[:stop]))

    def total_mass(self):
        return float(np.exp(_logsumexp(self.log_masses)))


def hypergeom_logpmf(n, k, r, x):
    """
    Log-pmf of Hyperg(n, k, r) at x, vectorised; -inf outside the support.

    Hyperg(n, k, r) counts white balls in r draws without replacement from an
    urn of n balls of which k are white.
    """
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    r = np.asarray(r, dtype=float)
    x = np.asarray(x, dtype=float)
    out = log_binom(k, x) + log_binom(n - k, r - x) - log_binom(n, r)
    out = np.where(np.isnan(out), -np.inf, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def hypergeom_pmf(n, k, r, x):
    """
    Hypergeometric probability C(k,x) C(n-k,r-x) / C(n,r).

    Args:
        n: Urn size
        k: Number of white balls, 0 <= k <= n
        r: Number of draws, 0 <= r <= n
        x: Number of white balls drawn

    Returns:
        float: The probability (0 outside the support)
    """
    if n < 0 or not (0 <= k <= n) or not (0 <= r <= n):
        raise ValueError(f"hypergeometric parameters out of range: n={n}, k={k}, r={r}")
    lo, hi = max(0, k + r - n), min(k, r)
    if not lo <= x <= hi:
        return 0.0
    return math.exp(hypergeom_logpmf(n, k, r, x))


def _check_coverages(n, coverages):
    coverages = [int(c) for c in coverages]
    if not coverages:
        raise ValueError("at least one coverage is required")
    for c in coverages:
        if not 0 <= c <= n:
            raise ValueError(f"coverage {c} outside [0, {n}]")
    return coverages


def _convolve_step(n, ys, log_ys, c, lo, hi):
    """One convolution step: union sizes in [lo, hi] after adding a member of coverage c."""
    xs = np.arange(lo, hi + 1)
    if len(xs) == 0:
        return xs, np.zeros(0)
    out = np.full(len(xs), -np.inf)
    rows_per_chunk = max(1, _CHUNK_CELLS // len(xs))
    for start in range(0, len(ys), rows_per_chunk):
        y = ys[start:start + rows_per_chunk, None]
        terms = hypergeom_logpmf(n, n - y, c, xs[None, :] - y) + log_ys[start:start + rows_per_chunk, None]
        out = np.logaddexp(out, _logsumexp(terms, axis=0))
    return xs, out


def _trim(xs, log_masses):
    finite = np.flatnonzero(np.isfinite(log_masses))
    if len(finite) == 0:
        return xs[:0], log_masses[:0]
    return xs[finite[0]:finite[-1] + 1], log_masses[finite[0]:finite[-1] + 1]


def gamma_distribution(n, coverages, floor=None, ceiling=None):
    """
    Exact null distribution of the union size given the member coverages.

    Members are convolved in decreasing coverage; zero-coverage members are
    dropped. With `floor`, union sizes that cannot reach `floor` even if all
    remaining members were disjoint from the current union are discarded at
    each step. With `ceiling`, union sizes above `ceiling` are discarded
    (union sizes never decrease).

    Args:
        n: Number of samples
        coverages: Member coverages, each in [0, n]
        floor: Optional smallest union size of interest
        ceiling: Optional largest union size of interest

    Returns:
        TailDistribution: The (possibly truncated) distribution
    """
    coverages = _check_coverages(n, coverages)
    support_max = min(n, sum(coverages))
    covs = sorted((c for c in coverages if c > 0), reverse=True)
    if not covs:
        return TailDistribution(n, 0, np.zeros(1), 0)

    headroom = np.concatenate([np.cumsum(covs[::-1])[::-1][1:], [0]])
    ys = np.array([covs[0]])
    log_ys = np.zeros(1)
    for s in range(1, len(covs)):
        c = covs[s]
        lo = max(int(ys[0]), c)
        hi = min(n, int(ys[-1]) + c)
        if floor is not None:
            lo = max(lo, int(floor) - int(headroom[s]))
        if ceiling is not None:
            hi = min(hi, int(ceiling))
        ys, log_ys = _trim(*_convolve_step(n, ys, log_ys, c, lo, hi))
        if len(ys) == 0:
            break

    if len(ys) == 0:
        return TailDistribution(n, support_max + 1, np.zeros(0), support_max)
    return TailDistribution(n, int(ys[0]), log_ys, support_max)


def _check_observed(n, coverages, gamma_obs):
    coverages = _check_coverages(n, coverages)
    support_max = min(n, sum(coverages))
    if gamma_obs < 0 or gamma_obs > support_max:
        raise ValueError(f"observed union {gamma_obs} outside [0, {support_max}]")
    return coverages


def upper_p(n, coverages, gamma_obs):
    """
    Right-tail p-values for the union size (anti-co-occurrence).

    Args:
        n: Number of samples
        coverages: Member coverages
        gamma_obs: Observed union size

    Returns:
        PValueTriple: P0(union >= obs), P0(union > obs) and the mid-p-value
    """
    coverages = _check_observed(n, coverages, gamma_obs)
    dist = gamma_distribution(n, coverages, floor=gamma_obs)
    return PValueTriple.from_logs(dist.log_tail(gamma_obs), dist.log_tail(gamma_obs, strict=True))


def lower_p(n, coverages, gamma_obs):
    """
    Left-tail p-values for the union size (co-occurrence).

    Returns:
        PValueTriple: P0(union <= obs), P0(union < obs) and the mid-p-value
    """
    coverages = _check_observed(n, coverages, gamma_obs)
    dist = gamma_distribution(n, coverages, ceiling=gamma_obs)
    return PValueTriple.from_logs(dist.log_head(gamma_obs), dist.log_head(gamma_obs, strict=True))


def intersection_p(n, coverages, intersection_obs, alternative="less"):
    """
    Test the size of the intersection of the member sets.

    The intersection of sets of sizes c_i is the complement of the union of
    their complements, of sizes n - c_i.

    Args:
        n: Number of samples
        coverages: Member coverages
        intersection_obs: Observed intersection size
        alternative: "less" (intersection smaller than expected) or "greater"

    Returns:
        PValueTriple
    """
    coverages = _check_coverages(n, coverages)
    complements = [n - c for c in coverages]
    if alternative == "less":
        return upper_p(n, complements, n - intersection_obs)
    if alternative == "greater":
        return lower_p(n, complements, n - intersection_obs)
    raise ValueError(f"unknown alternative: {alternative}")


@dataclass(frozen=True)
class EffectiveMembers:
    """
    Members of a set as tested: alterations of the same gene fused into one.

    coverages has shape (pseudo-members, groups); observed holds the union
    coverage of the whole set per group; size is the original set size.
    """

    groups: tuple
    group_sizes: np.ndarray
    coverages: np.ndarray
    observed: np.ndarray
    size: int


def effective_members(matrix, alteration_set):
    """
    Fuse members sharing a gene into pseudo-members, per group.

    Args:
        matrix: AlterationMatrix
        alteration_set: AlterationSet

    Returns:
        EffectiveMembers: Per-group pseudo-member coverages and observed union
    """
    by_gene = OrderedDict()
    for i in alteration_set:
        by_gene.setdefault(matrix.genes[i], []).append(i)
    coverages = np.stack([matrix.group_coverages(rows) for rows in by_gene.values()])
    observed = matrix.group_coverages(list(alteration_set))
    return EffectiveMembers(
        groups=matrix.groups,
        group_sizes=matrix.group_sizes,
        coverages=coverages,
        observed=observed,
        size=len(alteration_set),
    )


def fisher_upper_batch(n, c1, c2, union):
    """
    One-sided Fisher tails for many 2x2 tables sharing the same n.

    The union size of two indicators with coverages c1, c2 is
    c1 + Hyperg(n, n - c1, c2) under independence.

    Args:
        n: Number of samples
        c1, c2, union: Broadcastable integer arrays

    Returns:
        tuple: (log P0(union >= obs), log P0(union > obs)) as arrays
    """
    c1, c2, union = np.broadcast_arrays(
        np.asarray(c1, dtype=np.int64), np.asarray(c2, dtype=np.int64), np.asarray(union, dtype=np.int64)
    )
    shape = c1.shape
    c1, c2, union = c1.ravel(), c2.ravel(), union.ravel()
    k = n - c1
    x_obs = union - c1
    x_max = np.minimum(k, c2)
    log_p = np.full(c1.shape, -np.inf)
    log_p_minus = np.full(c1.shape, -np.inf)
    if c1.size == 0:
        return log_p.reshape(shape), log_p_minus.reshape(shape)

    width = int(max(0, (x_max - x_obs).max())) + 1
    rows_per_chunk = max(1, _CHUNK_CELLS // width)
    offsets = np.arange(width)[None, :]
    for start in range(0, c1.size, rows_per_chunk):
        sl = slice(start, start + rows_per_chunk)
        xs = x_obs[sl, None] + offsets
        terms = hypergeom_logpmf(n, k[sl, None], c2[sl, None], xs)
        log_p[sl] = _logsumexp(terms, axis=1)
        log_p_minus[sl] = _logsumexp(terms[:, 1:], axis=1) if width > 1 else -np.inf
    np.minimum(log_p, 0.0, out=log_p)
    np.minimum(log_p_minus, log_p, out=log_p_minus)
    return log_p.reshape(shape), log_p_minus.reshape(shape)


def fisher_upper(n, c1, c2, union):
    """Single-table version of fisher_upper_batch, as a PValueTriple."""
    log_p, log_p_minus = fisher_upper_batch(n, c1, c2, union)
    return PValueTriple.from_logs(float(log_p), float(log_p_minus))
