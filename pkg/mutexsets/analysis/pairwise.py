"""
Pairwise baseline: every pair of alterations tested on its own.

Each pair gets per-group one-sided Fisher mid-p-values combined with
Stouffer, corrected by plain Bonferroni over the m(m-1)/2 pairs.
"""

import logging
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy.special import log_ndtr
from tqdm import tqdm

from mutexsets.analysis.greedy_search import indicator_scores_z
from mutexsets.data.data_model import AlterationSet, popcount
from mutexsets.utils.constants import DEFAULT_LEVEL

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PairResult:
    set: AlterationSet
    members: tuple
    coverage_fraction: float
    p_raw: float
    p_adjusted: float
    log_p_raw: float = None
    log_p_adjusted: float = None

    @property
    def p_adjusted_clamped(self):
        return min(1.0, self.p_adjusted)


@dataclass
class PairwiseReport:
    """Significant pairs (sorted by adjusted p) and the graph they form."""

    pairs: list
    graph: nx.Graph
    bonferroni_factor: float
    n_tested: int

    @property
    def n_components(self):
        return nx.number_connected_components(self.graph)

    @property
    def max_clique_size(self):
        return max((len(clique) for clique in nx.find_cliques(self.graph)), default=0)

    def summary(self):
        return {
            "pairs_tested": self.n_tested,
            "pairs_significant": len(self.pairs),
            "bonferroni_factor": self.bonferroni_factor,
            "graph_nodes": self.graph.number_of_nodes(),
            "graph_edges": self.graph.number_of_edges(),
            "connected_components": self.n_components,
            "max_clique_size": self.max_clique_size,
        }


def _log_p_from_z(z):
    with np.errstate(divide="ignore"):
        return np.where(np.isposinf(z), 0.0, log_ndtr(z))


def pairwise_baseline(matrix, level=DEFAULT_LEVEL, progress=False):
    """
    Test all pairs of rows and keep the Bonferroni-significant ones.

    Args:
        matrix: Preprocessed AlterationMatrix
        level: Familywise significance level
        progress: Show a progress bar on standard error

    Returns:
        PairwiseReport
    """
    m = matrix.m
    n_pairs = m * (m - 1) // 2
    factor = float(max(n_pairs, 1))
    log_factor = math.log(factor)
    log_level = math.log(level)
    per_group = matrix.coverages.per_group
    masks = matrix.group_masks

    hits = []
    for i in tqdm(range(m - 1), desc="pairwise baseline", disable=not progress):
        others = np.arange(i + 1, m)
        union_bits = matrix.bits[others] | matrix.bits[i]
        union_cov = np.stack([popcount(union_bits & masks[g]) for g in range(len(masks))], axis=1)
        z = indicator_scores_z(matrix.group_sizes, per_group[i], per_group[others], union_cov)
        log_p = _log_p_from_z(z)
        for offset in np.flatnonzero(log_p + log_factor <= log_level):
            hits.append((float(log_p[offset]), i, int(others[offset])))

    hits.sort()
    pairs = []
    graph = nx.Graph()
    for log_p, i, j in hits:
        p_raw = math.exp(log_p)
        a, b = matrix.row_labels[i], matrix.row_labels[j]
        pair_coverage = int(popcount(matrix.bits[i] | matrix.bits[j]))
        pairs.append(
            PairResult(
                set=AlterationSet((i, j)),
                members=tuple(sorted((a, b))),
                coverage_fraction=pair_coverage / matrix.n,
                p_raw=p_raw,
                p_adjusted=p_raw * factor,
                log_p_raw=log_p,
                log_p_adjusted=log_p + log_factor,
            )
        )
        for label, row in ((a, i), (b, j)):
            graph.add_node(label, coverage=int(matrix.coverages.total[row]))
        graph.add_edge(a, b, p_raw=p_raw)

    logger.info("pairwise baseline: %d of %d pairs significant", len(pairs), n_pairs)
    return PairwiseReport(pairs=pairs, graph=graph, bonferroni_factor=factor, n_tested=n_pairs)
