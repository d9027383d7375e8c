"""
Main application entry point
Menjalankan fit, ci, diagnose dan simulate dari command line
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from loguru import logger
from pydantic import ValidationError as PydanticValidationError

from src.data.dataset import ColumnLayout, LongitudinalDataset, center_columns, load_csv, write_csv
from src.data.diagnostics import skewness_table
from src.estimation.baselines import fit_by_name
from src.estimation.covariance import eigen_bounds
from src.inference.intervals import coefficient_table
from src.simulation.runner import run_study
from src.simulation.scenarios import PRESET_ERRORS, Scenario, generate_dataset
from src.utils.config import RunConfig, read_key_values
from src.utils.errors import (
    ConvergenceError, CovarianceError, DataError, IdentifiabilityError,
    InsufficientSampleError, NumericalError, StudyError
)
from src.utils.logger import setup_logger
from src.utils.metrics import collector

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2


def build_parser() -> argparse.ArgumentParser:
    """Subcommands fit, ci, diagnose and simulate"""
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="Key-value or YAML file with run settings")
    common.add_argument("--out", help="Output path (stdout when omitted)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--log-level", dest="log_level")
    common.add_argument("--working-cov", dest="working_cov", choices=["independence", "exchangeable", "ar1"])
    common.add_argument("--inner-tol", dest="inner_tol", type=float)
    common.add_argument("--outer-tol", dest="outer_tol", type=float)
    common.add_argument("--rank-tol", dest="rank_tol", type=float)
    common.add_argument("--inner-max-iter", dest="inner_max_iter", type=int)
    common.add_argument("--outer-max-iter", dest="outer_max_iter", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--seed", type=int)

    data = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    data.add_argument("--input", help="Long-format CSV, one row per subject-visit")
    data.add_argument("--layout", help="Column layout file")
    data.add_argument("--center", help="Comma-separated columns to center before fitting")

    parser = argparse.ArgumentParser(
        description="Empirical likelihood for longitudinal regression with replicate measurement errors"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", parents=[common, data], help="Fit one estimator",
                         argument_default=argparse.SUPPRESS)
    fit.add_argument("--method", choices=["proposed", "lin", "gee-naive", "el-naive"])
    fit.add_argument("--level", type=float)

    ci = sub.add_parser("ci", parents=[common, data], help="Confidence intervals",
                        argument_default=argparse.SUPPRESS)
    ci.add_argument("--method", choices=["proposed", "lin", "gee-naive", "el-naive"])
    ci.add_argument("--level", type=float)
    ci.add_argument("--coords", help="Comma-separated coefficient names")
    ci.add_argument("--ci-method", dest="ci_method", choices=["profile", "wald"])

    sub.add_parser("diagnose", parents=[common, data], help="Replicate-difference skewness tests",
                   argument_default=argparse.SUPPRESS)

    simulate = sub.add_parser("simulate", parents=[common], help="Monte Carlo study",
                              argument_default=argparse.SUPPRESS)
    simulate.add_argument("--scenario", help=f"One of {sorted(PRESET_ERRORS)} or a scenario file")
    simulate.add_argument("--n", type=int)
    simulate.add_argument("--reps", type=int)
    simulate.add_argument("--methods", help="Comma-separated estimators")
    simulate.add_argument("--level", type=float)
    simulate.add_argument("--percent-units", dest="percent_units", action="store_true")
    simulate.add_argument("--dump-data", dest="dump_data", help="Write the first replication dataset as CSV")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults and environment, then the config file, then command-line flags"""
    flags = vars(args)
    values: Dict[str, Any] = {}
    config_path = flags.pop("config", None)
    if config_path:
        values.update(read_key_values(config_path))
    values.update(flags)
    return RunConfig(**values)


def _load_dataset(cfg: RunConfig) -> LongitudinalDataset:
    if cfg.input is None or cfg.layout is None:
        raise DataError(f"'{cfg.command}' needs both --input and --layout")
    ds = load_csv(cfg.input, ColumnLayout.from_file(cfg.layout))
    if cfg.center:
        ds = center_columns(ds, cfg.center)
    return ds


def _coordinates(names: Sequence[str], requested: Optional[List[str]]) -> Optional[List[int]]:
    if requested is None:
        return None
    unknown = [c for c in requested if c not in names]
    if unknown:
        raise DataError(f"unknown coefficients {unknown}, expected names from {list(names)}")
    return [list(names).index(c) for c in requested]


def _write(cfg: RunConfig, frame: pd.DataFrame, document: Dict[str, Any]):
    if cfg.format == "json":
        text = json.dumps(document, indent=2, default=str) + "\n"
    else:
        text = frame.to_csv(index=False)
    if cfg.out is None:
        sys.stdout.write(text)
        return
    path = Path(cfg.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info(f"Report written to {path}")


def _run_fit(cfg: RunConfig) -> int:
    ds = _load_dataset(cfg)
    fit = fit_by_name(cfg.method, ds, cfg.fit_config())
    c1, c2 = eigen_bounds(fit.working_cov, ds.visit_counts)
    logger.info(f"Working covariance eigenvalues in [{c1:.4g}, {c2:.4g}]")

    if cfg.command == "ci":
        coords = _coordinates(fit.coefficient_names, cfg.coords)
        table = coefficient_table(fit, cfg.level, cfg.ci_method, coords)
    else:
        table = coefficient_table(fit, cfg.level, "wald")
    document = {
        'config': cfg.model_dump(mode='json'),
        'fit': fit.to_dict(),
        'eigen_bounds': [c1, c2],
        'coefficients': table.to_dict(orient='records'),
    }
    _write(cfg, table, document)
    if not fit.converged:
        logger.warning(f"{cfg.method} fit did not converge; report flagged")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _run_diagnose(cfg: RunConfig) -> int:
    table = skewness_table(_load_dataset(cfg))
    document = {'config': cfg.model_dump(mode='json'), 'skewness': table.to_dict(orient='records')}
    _write(cfg, table, document)
    return EXIT_OK


def _scenario(cfg: RunConfig) -> Scenario:
    name = cfg.scenario or "C1"
    if name.upper() in PRESET_ERRORS:
        return Scenario.preset(name, cfg.n or 500)
    if Path(name).exists():
        return Scenario.from_file(name, cfg.n)
    raise DataError(f"scenario {name!r} is neither a preset {sorted(PRESET_ERRORS)} nor a file")


def _run_simulate(cfg: RunConfig) -> int:
    sc = _scenario(cfg)
    if cfg.dump_data:
        write_csv(generate_dataset(sc, cfg.seed), cfg.dump_data)
        logger.info(f"First replication dataset written to {cfg.dump_data}")
    report = run_study(sc, cfg.methods, cfg.reps, cfg.seed, cfg.fit_config(), cfg.level, cfg.threads)
    document = {'config': cfg.model_dump(mode='json', exclude={'threads'}),
                'scenario': sc.to_dict(), **report.to_dict(cfg.percent_units)}
    _write(cfg, report.to_frame(cfg.percent_units), document)
    return EXIT_OK


COMMANDS = {
    'fit': _run_fit,
    'ci': _run_fit,
    'diagnose': _run_diagnose,
    'simulate': _run_simulate,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID

    log_level = getattr(args, "log_level", None)
    setup_logger(f"elme-{args.command}", log_level)

    try:
        cfg = resolve_config(args)
        logger.info(f"Resolved config: {cfg.model_dump_json()}")
        code = COMMANDS[cfg.command](cfg)
    except (DataError, CovarianceError, IdentifiabilityError, InsufficientSampleError,
            PydanticValidationError, FileNotFoundError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_INVALID
    except (ConvergenceError, NumericalError, StudyError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_NOT_CONVERGED

    logger.debug(f"Metrics: {collector.get_summary()}")
    return code


if __name__ == "__main__":
    sys.exit(run())
