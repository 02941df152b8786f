import math

import pytest

from conftest import make_matrix
from mutexsets.analysis.multiplicity import WeightScheme, correction_factor
from mutexsets.analysis.pipeline import (
    RunConfig,
    adjust,
    analyze,
    evaluate_candidates,
    evaluate_set,
    rank_results,
    resolve_labels,
    single_set_report,
)
from mutexsets.data.data_model import AlterationSet, merge_identical_rows, preprocess
from mutexsets.data.simulation import random_margins, simulate_null, simulate_planted
from mutexsets.export.data_export import export_report
from mutexsets.utils.errors import ConfigError

PLANTED = ("PL1", "PL2", "PL3")


@pytest.fixture
def planted_matrix():
    return preprocess(
        simulate_planted([120, 80], planted_size=3, planted_coverage=60, background_rows=12, seed=1)
    )


def _config(**kwargs):
    values = {"matrix_path": "matrix.tsv", "groups_path": "groups.tsv", "k_max": 4, "max_iter": 60}
    values.update(kwargs)
    return RunConfig(**values).validate()


@pytest.mark.parametrize(
    "field, value",
    [
        ("k_max", 1),
        ("max_iter", -1),
        ("alpha_w", 0.0),
        ("level", 1.0),
        ("correction", "holm"),
        ("seed", -1),
        ("workers", 0),
        ("closure_budget", 0),
    ],
)
def test_run_config_rejects(field, value):
    with pytest.raises(ConfigError):
        _config(**{field: value})


def test_metadata_leaves_out_workers():
    values = _config(workers=4).to_dict()
    assert "workers" not in values
    assert values["k_max"] == 4


def test_planted_set_is_ranked_first(planted_matrix):
    report = analyze(planted_matrix, _config())
    assert report.sets
    top = report.sets[0]
    assert top.rank == 1
    assert top.members == PLANTED
    assert top.p_adjusted <= 0.05
    assert top.coverage == 180
    assert report.graph.has_edge("PL1", "PL3")
    assert report.metadata["results"]["reported"] == len(report.sets)


def test_reported_sets_are_not_nested(planted_matrix):
    report = analyze(planted_matrix, _config())
    member_sets = [set(row.members) for row in report.sets]
    for i, a in enumerate(member_sets):
        for b in member_sets[i + 1:]:
            assert not (a <= b or b <= a)


def test_bh_reports_planted_set(planted_matrix):
    report = analyze(planted_matrix, _config(correction="bh"))
    assert report.sets[0].members == PLANTED


def test_analysis_is_deterministic(planted_matrix):
    first = analyze(planted_matrix, _config(seed=17))
    second = analyze(planted_matrix, _config(seed=17))
    assert first.sets == second.sets


def test_worker_count_does_not_change_results(planted_matrix):
    candidates = [AlterationSet((0, 1)), AlterationSet((0, 1, 2)), AlterationSet((3, 4)), AlterationSet((2, 5, 7))]
    serial = evaluate_candidates(planted_matrix, candidates, seed=5, workers=1)
    parallel = evaluate_candidates(planted_matrix, candidates, seed=5, workers=2)
    assert serial == parallel


def test_too_few_rows_gives_empty_report():
    report = analyze(make_matrix([[1, 0, 1, 0]]), _config(k_max=2))
    assert report.sets == []
    assert report.metadata["results"]["sets"] == 0
    assert report.graph.number_of_nodes() == 0


def test_k_max_above_row_count_is_capped():
    matrix = make_matrix([[1, 1, 0, 0, 0, 0], [0, 0, 1, 1, 0, 0], [0, 0, 0, 0, 1, 1]])
    report = analyze(matrix, _config(k_max=4))
    assert report.metadata["config"]["k_max"] == 4
    assert report.metadata["k_max_effective"] == 3
    assert sorted(report.metadata["correction_factors"]) == ["2", "3"]
    result = single_set_report(matrix, ["G1", "G2", "G3"], k_max=4)
    assert result.correction == pytest.approx(correction_factor(WeightScheme(3, 3, 0.05), 3))


def test_ranked_rows_keep_log_p_below_double_range():
    matrix = make_matrix([[1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 0, 0]])
    scheme = WeightScheme(3, 2)
    (adjusted,) = adjust([AlterationSet((0, 1))], [-2000.0], scheme, 0.05, "bonferroni")
    assert adjusted.p_raw == 0.0
    assert adjusted.log_p_raw == -2000.0
    (row,) = rank_results(matrix, [adjusted])
    assert row.log_p_raw == -2000.0
    assert row.log_p_adjusted == pytest.approx(-2000.0 + scheme.log_correction(2))
    (bh,) = adjust([AlterationSet((0, 1))], [-2000.0], scheme, 0.05, "bh")
    assert bh.log_p_raw == -2000.0
    assert bh.significant


def test_optional_outputs(planted_matrix):
    report = analyze(planted_matrix, _config(dump_pool=True, pairwise_baseline=True))
    assert report.pool_rows
    assert set(report.pool_rows[0]) == {"members", "score", "iteration", "epoch"}
    assert report.pairwise.n_tested == planted_matrix.m * (planted_matrix.m - 1) // 2
    assert "pairwise_baseline" in report.metadata


def test_correction_factors_in_metadata(planted_matrix):
    report = analyze(planted_matrix, _config())
    factors = report.metadata["correction_factors"]
    scheme = WeightScheme(planted_matrix.m, 4, 0.05)
    assert factors["3"] == pytest.approx(correction_factor(scheme, 3))


def test_evaluate_set_mid_and_randomized(planted_matrix):
    evaluation = evaluate_set(planted_matrix, AlterationSet((0, 1, 2)), seed=0, with_mid=True)
    assert evaluation.labels == PLANTED
    assert len(evaluation.evidence) == 2
    assert evaluation.log_p_randomized < math.log(1e-10)
    assert evaluation.log_p_mid < math.log(1e-10)


def test_single_set_report(planted_matrix):
    result = single_set_report(planted_matrix, ["PL3", "PL1", "PL2"], k_max=4)
    scheme = WeightScheme(planted_matrix.m, 4, 0.05)
    assert result.correction == pytest.approx(correction_factor(scheme, 3))
    assert result.p_corrected == pytest.approx(result.evaluation.p_randomized * result.correction)
    with pytest.raises(ConfigError):
        single_set_report(planted_matrix, ["PL1"], k_max=4)
    with pytest.raises(ConfigError):
        single_set_report(planted_matrix, ["PL1", "PL2", "PL3", "BG1", "BG2"], k_max=4)


def test_merged_labels_resolve_to_representative():
    matrix = merge_identical_rows(
        make_matrix([[1, 0, 1, 0], [1, 0, 1, 0], [0, 1, 0, 0]], labels=["A", "B", "C"])
    )
    assert resolve_labels(matrix, ["B", "C"]).members == (0, 1)
    assert resolve_labels(matrix, ["A", "B"]).members == (0,)




def _null_run_rejects(seed, max_iter):
    margins = random_margins([100, 100], 30, 0.05, 0.25, seed)
    matrix = simulate_null([100, 100], margins, seed=seed + 100_000)
    return bool(analyze(matrix, _config(k_max=5, max_iter=max_iter, seed=seed)).sets)


def test_familywise_error_under_null_small():
    hits = sum(_null_run_rejects(seed, max_iter=100) for seed in range(10))
    assert hits <= 2


@pytest.mark.slow
def test_familywise_error_under_null():
    runs = 1000
    hits = sum(_null_run_rejects(seed, max_iter=200) for seed in range(runs))
    assert hits / runs <= 0.05 + 3 * math.sqrt(0.05 * 0.95 / runs)


def _triple_beats_its_pairs(seed):
    matrix = simulate_planted([250, 250], planted_size=3, planted_coverage=100, background_rows=17, seed=seed)
    assert matrix.m == 20
    report = analyze(matrix, _config(k_max=5, max_iter=200, seed=seed))
    rows = {row.members: row for row in report.sets}
    if PLANTED not in rows:
        return False
    scheme = WeightScheme(matrix.m, 5, 0.05)
    for pair in ((0, 1), (0, 2), (1, 2)):
        evaluation = evaluate_set(matrix, AlterationSet(pair), seed)
        if evaluation.log_p_randomized + scheme.log_correction(2) <= rows[PLANTED].log_p_adjusted:
            return False
    return rows[PLANTED].p_adjusted <= 0.05


def test_planted_triple_beats_its_pairs():
    assert all(_triple_beats_its_pairs(seed) for seed in range(3))


@pytest.mark.slow
def test_planted_triple_beats_its_pairs_across_seeds():
    assert sum(_triple_beats_its_pairs(seed) for seed in range(100)) >= 95


def _exported_bytes(matrix, workers, out_dir):
    report = analyze(matrix, _config(seed=11, workers=workers))
    written = export_report(report, out_dir)
    return {kind: written[kind].read_bytes() for kind in ("sets", "graph", "metadata")}


def test_exported_files_identical_across_worker_counts(planted_matrix, tmp_path):
    serial = _exported_bytes(planted_matrix, 1, tmp_path / "w1")
    assert _exported_bytes(planted_matrix, 2, tmp_path / "w2") == serial


@pytest.mark.slow
def test_exported_files_identical_across_many_workers(tmp_path):
    matrix = preprocess(
        simulate_planted([300, 200], planted_size=4, planted_coverage=100, background_rows=40, seed=3)
    )
    serial = _exported_bytes(matrix, 1, tmp_path / "w1")
    for workers in (4, 16):
        assert _exported_bytes(matrix, workers, tmp_path / f"w{workers}") == serial
