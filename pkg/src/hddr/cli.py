"""Batch command-line entry points.

``hddr test``     run one hypothesis test on a CSV dataset
``hddr simulate`` reproduce the Monte Carlo size table (or a single cell)

Exit codes: 0 success, 2 invalid input or usage, 3 solver failure.
All progress goes to standard error; results go to standard output or to
``--output-path``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .errors import (CsvParseError, MissingColumnError, SolverError,
                     ValidationError)
from .model_core import Dataset, LinkFunction
from .score_test import ALL_METHODS, TestResult, run_test
from .simulation import (DEFAULT_CELLS, TABLE_METHODS, build_dgp_params,
                         monte_carlo_type1, report_to_csv,
                         report_to_json_payload, report_to_text,
                         reproduce_table1, SimReport, MethodCell)

METHOD_FLAGS = tuple(m.replace("_", "-") for m in ALL_METHODS)


@dataclass(frozen=True)
class RunConfig:
    """Parsed command-line options for one invocation."""

    command: str
    input_path: str | None = None
    outcome_col: str = "y"
    exposure_col: str = "a"
    method: str = "pmle-dr"
    outcome_link: str = "identity"
    propensity_col: str | None = None
    propensity_value: float | None = None
    k_folds: int = 10
    seed: int = 1
    reps: int = 1000
    alpha: float = 0.05
    workers: int = 1
    output_path: str | None = None
    format: str = "text"
    n: int | None = None
    p: int | None = None
    misspecified: bool = False


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hddr",
        description="Doubly robust score tests for exposure effects in "
                    "high-dimensional GLMs.")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run one test on a CSV dataset")
    t.add_argument("--input-path", required=True)
    t.add_argument("--outcome-col", required=True)
    t.add_argument("--exposure-col", required=True)
    t.add_argument("--method", choices=METHOD_FLAGS, default="pmle-dr")
    t.add_argument("--outcome-link", choices=("identity", "logit"),
                   default="identity")
    t.add_argument("--propensity-col")
    t.add_argument("--propensity-value", type=float)
    t.add_argument("--k-folds", type=_positive_int, default=10)
    t.add_argument("--seed", type=int, default=1)
    t.add_argument("--output-path")
    t.add_argument("--format", choices=("csv", "text", "json"),
                   default="text")

    s = sub.add_parser("simulate", help="reproduce the size table")
    s.add_argument("--method", choices=METHOD_FLAGS)
    s.add_argument("--n", type=_positive_int)
    s.add_argument("--p", type=_positive_int)
    s.add_argument("--misspecified", action="store_true")
    s.add_argument("--reps", type=_positive_int, default=1000)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--k-folds", type=_positive_int, default=10)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--workers", type=_positive_int,
                   default=int(os.environ.get("HDDR_WORKERS", "1")))
    s.add_argument("--output-path")
    s.add_argument("--format", choices=("csv", "text", "json"),
                   default="text")
    return parser


def read_dataset_csv(path: str, outcome_col: str, exposure_col: str,
                     propensity_col: str | None = None):
    """Parse a strict numeric CSV: header required, comma-separated, no
    missing cells.  Returns (Dataset, propensity vector or None)."""
    if not os.path.exists(path):
        raise ValidationError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError("empty file: header row required", line=1)
        header = [h.strip() for h in header]
        for name in (outcome_col, exposure_col):
            if name not in header:
                raise MissingColumnError(name)
        if propensity_col is not None and propensity_col not in header:
            raise MissingColumnError(propensity_col)

        rows: list[list[float]] = []
        missing_rows = 0
        first_missing: tuple[int, int] | None = None
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise CsvParseError(
                    f"expected {len(header)} cells, found {len(row)}",
                    line=line_no)
            values = []
            row_missing = False
            for col_no, cell in enumerate(row, start=1):
                cell = cell.strip()
                if cell == "" or cell.upper() in ("NA", "NAN", "NULL"):
                    row_missing = True
                    if first_missing is None:
                        first_missing = (line_no, col_no)
                    values.append(float("nan"))
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise CsvParseError(f"non-numeric cell {cell!r}",
                                        line=line_no, col=col_no)
            if row_missing:
                missing_rows += 1
            rows.append(values)
    if missing_rows:
        line, col = first_missing
        raise CsvParseError(
            f"{missing_rows} row(s) contain missing values; remove or "
            "complete them before testing (first missing cell", line=line,
            col=col)
    if len(rows) < 2:
        raise ValidationError("need at least 2 data rows")

    data = np.asarray(rows, dtype=float)
    special = {outcome_col, exposure_col}
    if propensity_col is not None:
        special.add(propensity_col)
    cov_idx = [i for i, h in enumerate(header) if h not in special]
    if not cov_idx:
        raise ValidationError("no covariate columns remain")
    d = Dataset(
        y=data[:, header.index(outcome_col)],
        a=data[:, header.index(exposure_col)],
        L=data[:, cov_idx],
        column_names=tuple(header[i] for i in cov_idx),
    )
    pi = (data[:, header.index(propensity_col)]
          if propensity_col is not None else None)
    return d, pi


def dataset_to_csv(d: Dataset, path: str, outcome_col: str = "y",
                   exposure_col: str = "a") -> None:
    """Write a Dataset as a strict numeric CSV with full float round-trip
    precision."""
    names = (list(d.column_names) if d.column_names is not None
             else [f"x{j + 1}" for j in range(d.p)])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([outcome_col, exposure_col] + names)
        for i in range(d.n):
            writer.writerow([repr(float(d.y[i])), repr(float(d.a[i]))]
                            + [repr(float(v)) for v in d.L[i]])


def _result_payload(res: TestResult) -> dict:
    return {
        "schema_version": 1,
        "t_n": res.t_n,
        "p_value": res.p_value,
        "n": res.n,
        "score_mean": res.score_mean,
        "score_sd": res.score_sd,
        "method": res.method,
        "diagnostics": res.diagnostics,
    }


def _render_test_result(res: TestResult, fmt: str,
                        column_names=None) -> str:
    if fmt == "json":
        return json.dumps(_result_payload(res), indent=2,
                          default=float) + "\n"
    if fmt == "csv":
        import io

        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["t_n", "p_value", "n", "score_mean", "score_sd",
                         "method", "diagnostics"])
        writer.writerow([repr(res.t_n), repr(res.p_value), res.n,
                         repr(res.score_mean), repr(res.score_sd),
                         res.method,
                         json.dumps(res.diagnostics, default=float)])
        return buf.getvalue()

    def _names(idx):
        if column_names is None:
            return ", ".join(str(j + 1) for j in idx)
        return ", ".join(column_names[j] for j in idx)

    lines = [
        f"method:      {res.method}",
        f"n:           {res.n}",
        f"t_n:         {res.t_n:.6f}",
        f"p_value:     {res.p_value:.6g}",
        f"score_mean:  {res.score_mean:.6g}",
        f"score_sd:    {res.score_sd:.6g}",
    ]
    diag = res.diagnostics
    for key in ("lambda", "lambda_gamma", "lambda_beta"):
        if key in diag and diag[key] is not None:
            try:
                lines.append(f"{key}: {float(diag[key]):.6g}")
            except (TypeError, ValueError):
                pass
    for key, label in (("exposure_support", "exposure support"),
                       ("outcome_support", "outcome support"),
                       ("selected_covariates", "selected covariates"),
                       ("union_support", "union support")):
        if key in diag:
            idx = diag[key]
            lines.append(f"{label} ({len(idx)}): {_names(idx) or '(none)'}")
    return "\n".join(lines) + "\n"


def _write_output(text: str, output_path: str | None) -> None:
    if output_path is None:
        sys.stdout.write(text)
    else:
        with open(output_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_test(cfg: RunConfig) -> int:
    if (cfg.method == "known-propensity"
            and (cfg.propensity_col is None) == (cfg.propensity_value is None)):
        print("error: known-propensity requires exactly one of "
              "--propensity-col / --propensity-value", file=sys.stderr)
        return 2
    d, pi = read_dataset_csv(cfg.input_path, cfg.outcome_col,
                             cfg.exposure_col, cfg.propensity_col)
    method = cfg.method.replace("-", "_")
    link = LinkFunction(cfg.outcome_link)
    kwargs = {}
    if method == "known_propensity":
        kwargs["pi_star"] = pi if pi is not None else cfg.propensity_value
    res = run_test(d, method, outcome_link=link, k_folds=cfg.k_folds,
                   seed=cfg.seed, **kwargs)
    _write_output(_render_test_result(res, cfg.format, d.column_names),
                  cfg.output_path)
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    if (cfg.n is None) != (cfg.p is None):
        print("error: --n and --p must be given together", file=sys.stderr)
        return 2
    if cfg.n is not None:
        cells = [(cfg.n, cfg.p, cfg.misspecified)]
    else:
        cells = list(DEFAULT_CELLS)
    if cfg.method is not None:
        methods = (cfg.method.replace("-", "_"),)
    else:
        methods = TABLE_METHODS

    def progress(msg):
        print(msg, file=sys.stderr, flush=True)

    if cfg.method is not None and cfg.n is not None:
        params = build_dgp_params(cfg.n, cfg.p, misspecified=cfg.misspecified)
        cell = monte_carlo_type1(methods[0], params, cfg.reps,
                                 alpha=cfg.alpha, master_seed=cfg.seed,
                                 workers=cfg.workers, k_folds=cfg.k_folds)
        reports = (SimReport(n=cfg.n, p=cfg.p, alpha=cfg.alpha,
                             misspecified=cfg.misspecified,
                             master_seed=cfg.seed,
                             results={methods[0]: cell}),)
    else:
        reports = reproduce_table1(reps=cfg.reps, master_seed=cfg.seed,
                                   workers=cfg.workers, alpha=cfg.alpha,
                                   cells=cells, methods=methods,
                                   k_folds=cfg.k_folds, progress=progress)
    if cfg.format == "json":
        text = json.dumps(report_to_json_payload(reports), indent=2,
                          default=float) + "\n"
    elif cfg.format == "csv":
        text = report_to_csv(reports)
    else:
        text = report_to_text(reports)
    _write_output(text, cfg.output_path)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    cfg = RunConfig(**{k: v for k, v in vars(args).items()})
    try:
        if cfg.command == "test":
            return cmd_test(cfg)
        return cmd_simulate(cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
