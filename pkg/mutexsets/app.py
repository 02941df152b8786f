import logging
import sys
import time
from pathlib import Path

import pandas as pd

from mutexsets.analysis.pipeline import RunConfig, load_and_prepare, run, single_set_report
from mutexsets.data.simulation import random_margins, simulate_null, simulate_planted
from mutexsets.export.data_export import export_report, write_matrix
from mutexsets.utils.constants import APP_NAME, APP_VERSION, EXPORT_FILES
from mutexsets.utils.errors import ConfigError
from mutexsets.utils.helpers import format_log_pvalue, setup_logging

logger = logging.getLogger(__name__)


class MutexSetsApp:
    """Application class that wires the command line to the analysis layers."""

    def __init__(self, args):
        self.args = args
        self.progress = getattr(args, "verbosity", 0) >= 0
        setup_logging(getattr(args, "verbosity", 0))

    def run(self):
        """Dispatch the selected subcommand."""
        handlers = {
            "run": self.run_analysis,
            "simulate": self.simulate,
            "test-one": self.test_one,
        }
        logger.debug("%s %s: %s", APP_NAME, APP_VERSION, self.args.command)
        handlers[self.args.command]()

    def run_analysis(self):
        args = self.args
        config = RunConfig(
            matrix_path=args.matrix,
            groups_path=args.groups,
            out_dir=args.out,
            k_max=args.kmax,
            max_iter=args.max_iter,
            alpha_w=args.alpha_weights,
            level=args.level,
            correction=args.correction,
            seed=args.seed,
            workers=args.workers,
            closure_budget=args.closure_budget,
            pairwise_baseline=args.pairwise_baseline,
            pdf=args.pdf,
            dump_pool=args.dump_pool,
            skip_preprocessing=args.no_preprocess,
        ).validate()

        started = time.perf_counter()
        report = run(config, progress=self.progress)
        export_report(report, config.out_dir, pdf=config.pdf)
        logger.info(
            "%d significant sets reported in %.1fs", len(report.sets), time.perf_counter() - started
        )

    def simulate(self):
        args = self.args
        sizes = _parse_sizes(args.group_sizes)
        if args.planted:
            if args.planted > args.rows:
                raise ConfigError(f"--planted {args.planted} exceeds --rows {args.rows}")
            matrix = simulate_planted(
                sizes,
                planted_size=args.planted,
                planted_coverage=args.planted_coverage,
                background_rows=args.rows - args.planted,
                min_coverage=args.min_coverage,
                max_coverage=args.max_coverage,
                seed=args.seed,
            )
        else:
            margins = random_margins(sizes, args.rows, args.min_coverage, args.max_coverage, args.seed)
            matrix = simulate_null(sizes, margins, seed=args.seed + 1)

        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_matrix(matrix, out_dir / EXPORT_FILES["matrix"], out_dir / EXPORT_FILES["groups"])

    def test_one(self):
        args = self.args
        _, matrix = load_and_prepare(args.matrix, args.groups, args.no_preprocess)
        labels = [label.strip() for label in args.set.split(",") if label.strip()]
        result = single_set_report(matrix, labels, k_max=args.kmax, alpha_w=args.alpha_weights, seed=args.seed)
        evaluation = result.evaluation

        rows = []
        for g, item in enumerate(evaluation.evidence):
            rows.append({
                "group": item.group,
                "n_tau": int(matrix.group_sizes[g]),
                "coverages": ",".join(str(int(c)) for c in evaluation.pseudo_coverages[:, g]),
                "observed": int(evaluation.observed[g]),
                "p": format_log_pvalue(item.triple.log_p),
                "p_minus": format_log_pvalue(item.triple.log_p_minus),
                "mid_p": format_log_pvalue(item.triple.log_mid),
                "weight": f"{item.weight:.4g}",
            })
        out = sys.stdout
        out.write(f"set\t{', '.join(evaluation.labels)}\n")
        pd.DataFrame(rows).to_csv(out, sep="\t", index=False, lineterminator="\n")
        out.write(f"combined_mid\t{format_log_pvalue(evaluation.log_p_mid)}\n")
        out.write(f"combined_randomized\t{format_log_pvalue(evaluation.log_p_randomized)}\n")
        out.write(f"correction_factor\t{result.correction:.6e}\n")
        out.write(f"weighted_bonferroni\t{format_log_pvalue(result.log_p_corrected)}\n")


def _parse_sizes(text):
    try:
        sizes = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"group sizes must be comma-separated integers, got {text!r}") from None
    if not sizes or any(size < 1 for size in sizes):
        raise ConfigError("every group size must be a positive integer")
    return sizes
