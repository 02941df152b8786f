"""
End-to-end analysis: preprocess, generate candidates, test, correct, prune.
"""

import logging
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations

import networkx as nx
import numpy as np
from scipy.special import log_ndtr
from tqdm import tqdm

from mutexsets.analysis.combine import (
    CombineMode,
    GroupEvidence,
    combined_z,
    set_group_weight,
)
from mutexsets.analysis.exact_test import effective_members, upper_p
from mutexsets.analysis.greedy_search import generate_candidates, subset_closure
from mutexsets.analysis.multiplicity import (
    AdjustedResult,
    WeightScheme,
    correction_factor,
    prune_nested,
    weighted_bh_adjust,
    weighted_bonferroni,
)
from mutexsets.analysis.pairwise import pairwise_baseline
from mutexsets.data.data_loader import DataLoader
from mutexsets.data.data_model import AlterationSet, coverage, filter_rare, merge_identical_rows
from mutexsets.utils.constants import (
    APP_NAME,
    APP_VERSION,
    CORRECTION_METHODS,
    DEFAULT_ALPHA_WEIGHTS,
    DEFAULT_CLOSURE_BUDGET,
    DEFAULT_CORRECTION,
    DEFAULT_KMAX,
    DEFAULT_LEVEL,
    DEFAULT_MAX_ITER,
    DEFAULT_SEED,
    DEFAULT_WORKERS,
)
from mutexsets.utils.errors import ConfigError
from mutexsets.utils.helpers import set_key_string

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one analysis run."""

    matrix_path: str
    groups_path: str
    out_dir: str = None
    k_max: int = DEFAULT_KMAX
    max_iter: int = DEFAULT_MAX_ITER
    alpha_w: float = DEFAULT_ALPHA_WEIGHTS
    level: float = DEFAULT_LEVEL
    correction: str = DEFAULT_CORRECTION
    seed: int = DEFAULT_SEED
    workers: int = DEFAULT_WORKERS
    closure_budget: int = DEFAULT_CLOSURE_BUDGET
    pairwise_baseline: bool = False
    pdf: bool = False
    dump_pool: bool = False
    skip_preprocessing: bool = False

    def validate(self):
        """
        Check parameter ranges.

        Returns:
            RunConfig: self, for chaining

        Raises:
            ConfigError: On the first invalid parameter
        """
        if self.k_max < 2:
            raise ConfigError(f"k_max must be at least 2, got {self.k_max}")
        if self.max_iter < 0:
            raise ConfigError(f"max_iter must be non-negative, got {self.max_iter}")
        if not 0.0 < self.alpha_w < 1.0:
            raise ConfigError(f"alpha_w must lie in (0, 1), got {self.alpha_w}")
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"level must lie in (0, 1), got {self.level}")
        if self.correction not in CORRECTION_METHODS:
            raise ConfigError(
                f"correction must be one of {', '.join(CORRECTION_METHODS)}, got {self.correction}"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.closure_budget < 1:
            raise ConfigError(f"closure budget must be positive, got {self.closure_budget}")
        return self

    def to_dict(self):
        """Plain dictionary for the run metadata (worker count left out)."""
        values = asdict(self)
        values.pop("workers")
        for key in ("matrix_path", "groups_path", "out_dir"):
            if values[key] is not None:
                values[key] = str(values[key])
        return values


@dataclass(frozen=True)
class ReportedSet:
    """One row of the significant-sets table."""

    rank: int
    members: tuple
    coverage: int
    coverage_fraction: float
    p_raw: float
    p_adjusted: float
    log_p_raw: float
    log_p_adjusted: float

    @property
    def size(self):
        return len(self.members)


@dataclass
class ResultReport:
    """Ranked significant sets, their union graph and the run metadata."""

    sets: list
    graph: nx.Graph
    metadata: dict
    pool_rows: list = None
    pairwise: object = None

    def summary(self):
        """Counts describing the reported sets and their graph."""
        labels = {label for reported in self.sets for label in reported.members}
        genes = {self.graph.nodes[label].get("gene", label) for label in labels}
        rarest = None
        if labels:
            label = min(labels, key=lambda lab: (self.graph.nodes[lab]["coverage"], lab))
            rarest = {"label": label, "coverage": int(self.graph.nodes[label]["coverage"])}
        sizes = Counter(reported.size for reported in self.sets)
        return {
            "sets": len(self.sets),
            "sets_per_size": {str(size): sizes[size] for size in sorted(sizes)},
            "alterations": len(labels),
            "genes": len(genes),
            "rarest_alteration": rarest,
            "graph_nodes": self.graph.number_of_nodes(),
            "graph_edges": self.graph.number_of_edges(),
            "connected_components": nx.number_connected_components(self.graph),
        }


@dataclass(frozen=True)
class SetEvaluation:
    """Per-group evidence for one set and its combined p-values."""

    set: AlterationSet
    labels: tuple
    evidence: tuple
    pseudo_coverages: np.ndarray = field(repr=False)
    observed: np.ndarray = field(repr=False)
    log_p_mid: float = 0.0
    log_p_randomized: float = 0.0

    @property
    def p_mid(self):
        return math.exp(self.log_p_mid)

    @property
    def p_randomized(self):
        return math.exp(self.log_p_randomized)


def _log_p_from_z(z):
    return 0.0 if z == math.inf else float(log_ndtr(z))


def group_evidence(matrix, alteration_set):
    """
    Exact union test of a set in every group.

    Returns:
        tuple: (evidence, EffectiveMembers)
    """
    effective = effective_members(matrix, alteration_set)
    evidence = []
    for g, group in enumerate(effective.groups):
        n_g = int(effective.group_sizes[g])
        covs = effective.coverages[:, g]
        triple = upper_p(n_g, covs, int(effective.observed[g]))
        evidence.append(GroupEvidence(group, triple, set_group_weight(n_g, covs)))
    return evidence, effective


def evaluate_set(matrix, alteration_set, seed, with_mid=False):
    """
    Combined p-values of one set across groups.

    Args:
        matrix: AlterationMatrix
        alteration_set: AlterationSet
        seed: Master seed for the randomised combination
        with_mid: Also combine mid-p-values

    Returns:
        SetEvaluation
    """
    labels = tuple(alteration_set.labels(matrix))
    key = set_key_string(labels)
    evidence, effective = group_evidence(matrix, alteration_set)
    log_p_rand = _log_p_from_z(combined_z(evidence, CombineMode.randomized(seed), key))
    log_p_mid = _log_p_from_z(combined_z(evidence, CombineMode.mid(), key)) if with_mid else math.nan
    return SetEvaluation(
        set=alteration_set,
        labels=labels,
        evidence=tuple(evidence),
        pseudo_coverages=effective.coverages,
        observed=effective.observed,
        log_p_mid=log_p_mid,
        log_p_randomized=log_p_rand,
    )


# Worker state, set once per process by the pool initializer
_worker_matrix = None
_worker_seed = None


def _init_worker(matrix, seed):
    global _worker_matrix, _worker_seed
    _worker_matrix = matrix
    _worker_seed = seed


def _evaluate_worker(members):
    return evaluate_set(_worker_matrix, AlterationSet(members), _worker_seed).log_p_randomized


def evaluate_candidates(matrix, candidates, seed, workers=1, progress=False):
    """
    Randomised combined log p-values of many sets, in input order.

    With more than one worker the sets are spread over a process pool; the
    draws are keyed by set labels so the result does not depend on it.
    """
    members = [s.members for s in candidates]
    if workers <= 1 or len(members) < 2:
        return [
            evaluate_set(matrix, AlterationSet(m), seed).log_p_randomized
            for m in tqdm(members, desc="exact tests", disable=not progress)
        ]
    chunksize = max(1, len(members) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(matrix, seed)) as executor:
        results = executor.map(_evaluate_worker, members, chunksize=chunksize)
        return list(tqdm(results, total=len(members), desc="exact tests", disable=not progress))


def adjust(candidates, log_ps, scheme, level, correction):
    """Multiplicity-adjusted results for the tested sets."""
    pairs = [(s, math.exp(log_p)) for s, log_p in zip(candidates, log_ps)]
    if correction == "bonferroni":
        return weighted_bonferroni(pairs, scheme, level, log_p_raw=log_ps)
    flags, log_q = weighted_bh_adjust(pairs, scheme, level, log_p_raw=log_ps)
    return [
        AdjustedResult(
            set=s,
            p_raw=p,
            p_adjusted=math.exp(min(lq, 700.0)),
            weight=math.exp(scheme.log_weight(len(s))),
            significant=bool(flag),
            log_p_adjusted=float(lq),
            log_p_raw=float(log_p),
        )
        for (s, p), log_p, flag, lq in zip(pairs, log_ps, flags, log_q)
    ]


def rank_results(matrix, results):
    """Sort retained results and turn them into report rows."""
    def display(result):
        return tuple(sorted(result.set.labels(matrix)))

    ordered = sorted(results, key=lambda r: (r.log_p_adjusted, len(r.set), display(r)))
    rows = []
    for rank, result in enumerate(ordered, start=1):
        cov = coverage(matrix, result.set)
        rows.append(
            ReportedSet(
                rank=rank,
                members=display(result),
                coverage=cov,
                coverage_fraction=cov / matrix.n if matrix.n else 0.0,
                p_raw=result.p_raw,
                p_adjusted=result.p_adjusted,
                log_p_raw=result.log_p_raw,
                log_p_adjusted=result.log_p_adjusted,
            )
        )
    return rows


def union_graph(matrix, rows):
    """
    Graph with one node per reported alteration and an edge for every pair
    of alterations that share a reported set.
    """
    graph = nx.Graph()
    for row in rows:
        for label in row.members:
            if label not in graph:
                i = matrix.row_index(label)
                graph.add_node(label, coverage=int(matrix.coverages.total[i]), gene=matrix.genes[i])
        for a, b in combinations(row.members, 2):
            if graph.has_edge(a, b):
                graph.edges[a, b]["n_sets"] += 1
            else:
                graph.add_edge(a, b, n_sets=1)
    return graph


def pool_table(matrix, pool):
    """Rows of the candidate-pool dump: members, score, iteration, epoch."""
    rows = []
    for alteration_set in pool.candidates():
        iteration, epoch = pool.origin.get(alteration_set.members, (None, None))
        rows.append(
            {
                "members": ", ".join(alteration_set.labels(matrix)),
                "score": pool.scores.get(alteration_set.members),
                "iteration": iteration,
                "epoch": epoch,
            }
        )
    return rows


def effective_k_max(k_max, m):
    """k_max capped at the number of alterations, with a warning when capped."""
    if k_max > m:
        logger.warning("k_max=%d exceeds the number of alterations m=%d, using k_max=%d", k_max, m, m)
        return m
    return k_max


def load_and_prepare(matrix_path, groups_path, skip_preprocessing=False):
    """
    Load the input files and preprocess unless asked not to.

    Returns:
        tuple: (raw matrix, prepared matrix)
    """
    raw = DataLoader().load_matrix(matrix_path, groups_path)
    if skip_preprocessing:
        return raw, raw
    merged = merge_identical_rows(raw)
    prepared = filter_rare(merged)
    logger.info(
        "preprocessing: %d rows merged, %d rare rows removed, m=%d n=%d groups=%d",
        raw.m - merged.m,
        merged.m - prepared.m,
        prepared.m,
        prepared.n,
        len(prepared.groups),
    )
    return raw, prepared


def analyze(matrix, config, progress=False, input_info=None):
    """
    Run the analysis on an already prepared matrix.

    Args:
        matrix: Preprocessed AlterationMatrix
        config: Validated RunConfig
        progress: Show progress bars
        input_info: Optional dictionary merged into the metadata

    Returns:
        ResultReport
    """
    metadata = {
        "tool": APP_NAME,
        "version": APP_VERSION,
        "seed": config.seed,
        "config": config.to_dict(),
        "input": {
            "m": matrix.m,
            "n": matrix.n,
            "groups": {g: int(s) for g, s in zip(matrix.groups, matrix.group_sizes)},
            **(input_info or {}),
        },
    }

    if matrix.m < 2:
        logger.warning("fewer than two alterations left, nothing to test")
        report = ResultReport(sets=[], graph=nx.Graph(), metadata=metadata)
        metadata["pool"] = {"generated": 0, "closed": 0, "tested": 0}
        metadata["results"] = {"significant": 0, "reported": 0, **report.summary()}
        return report
    k_max = effective_k_max(config.k_max, matrix.m)
    metadata["k_max_effective"] = k_max

    started = time.perf_counter()
    pool = generate_candidates(matrix, max_iter=config.max_iter, k_max=k_max, progress=progress)
    generated = len(pool.candidates())
    closed = subset_closure(pool, budget=config.closure_budget)
    candidates = closed.candidates()
    logger.info(
        "candidate pool: %d generated, %d after closure (%.1fs)",
        generated,
        len(candidates),
        time.perf_counter() - started,
    )
    if not candidates:
        logger.warning("candidate pool is empty")

    started = time.perf_counter()
    log_ps = evaluate_candidates(matrix, candidates, config.seed, config.workers, progress)
    logger.info("tested %d candidate sets (%.1fs)", len(candidates), time.perf_counter() - started)

    scheme = WeightScheme(matrix.m, k_max, config.alpha_w)
    adjusted = adjust(candidates, log_ps, scheme, config.level, config.correction)
    significant = [result for result in adjusted if result.significant]
    kept = prune_nested(significant)
    logger.info("%d significant sets, %d kept after pruning nested sets", len(significant), len(kept))

    rows = rank_results(matrix, kept)
    report = ResultReport(sets=rows, graph=union_graph(matrix, rows), metadata=metadata)
    metadata["pool"] = {"generated": generated, "closed": len(candidates), "tested": len(candidates)}
    metadata["correction_factors"] = {
        str(size): correction_factor(scheme, size) for size in range(2, k_max + 1)
    }
    metadata["results"] = {"significant": len(significant), "reported": len(kept), **report.summary()}

    if config.dump_pool:
        report.pool_rows = pool_table(matrix, pool)
    if config.pairwise_baseline:
        report.pairwise = pairwise_baseline(matrix, level=config.level, progress=progress)
        metadata["pairwise_baseline"] = report.pairwise.summary()
    return report


def run(config, progress=False):
    """
    Load, preprocess and analyse the files named by a RunConfig.

    Args:
        config: RunConfig
        progress: Show progress bars on standard error

    Returns:
        ResultReport
    """
    config.validate()
    raw, matrix = load_and_prepare(config.matrix_path, config.groups_path, config.skip_preprocessing)
    return analyze(matrix, config, progress=progress, input_info={"m_input": raw.m})


@dataclass(frozen=True)
class SingleSetResult:
    """Everything `test-one` prints for a single set."""

    evaluation: SetEvaluation
    p_corrected: float
    correction: float
    log_p_corrected: float = None


def resolve_labels(matrix, labels):
    """Row indices of the given labels; merged labels map to their representative."""
    rows = []
    for label in labels:
        row = matrix.row_index(label)
        if matrix.row_labels[row] != label:
            logger.warning("%s was merged into %s", label, matrix.row_labels[row])
        rows.append(row)
    alteration_set = AlterationSet(tuple(rows))
    if len(alteration_set) < len(rows):
        logger.warning("some labels refer to the same row; testing %d distinct rows", len(alteration_set))
    return alteration_set


def single_set_report(matrix, labels, k_max=DEFAULT_KMAX, alpha_w=DEFAULT_ALPHA_WEIGHTS, seed=DEFAULT_SEED):
    """
    Test one set given by row labels.

    Args:
        matrix: Prepared AlterationMatrix
        labels: Row labels of the set
        k_max: Largest set size of the weighting scheme
        alpha_w: Weight parameter
        seed: Master seed for the randomised combination

    Returns:
        SingleSetResult
    """
    alteration_set = resolve_labels(matrix, labels)
    if len(alteration_set) < 2:
        raise ConfigError("a tested set needs at least two distinct alterations")
    k_max = effective_k_max(k_max, matrix.m)
    if len(alteration_set) > k_max:
        raise ConfigError(f"set size {len(alteration_set)} exceeds k_max={k_max}")
    if not 0.0 < alpha_w < 1.0:
        raise ConfigError(f"alpha_w must lie in (0, 1), got {alpha_w}")

    evaluation = evaluate_set(matrix, alteration_set, seed, with_mid=True)
    scheme = WeightScheme(matrix.m, k_max, alpha_w)
    log_factor = scheme.log_correction(len(alteration_set))
    log_p_corrected = evaluation.log_p_randomized + log_factor
    return SingleSetResult(
        evaluation=evaluation,
        p_corrected=math.exp(min(log_p_corrected, 700.0)),
        correction=math.exp(log_factor),
        log_p_corrected=log_p_corrected,
    )
