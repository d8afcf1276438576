"""Command-line driver: ``lossrank {select,path,simulate,demo-prostate}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 computation error.
``simulate`` also exits with 3 when any replication failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass
from importlib import resources
from typing import List, Optional, Sequence, TextIO

import numpy as np

from .criteria import ALL_CRITERIA, Criterion, bic, loss_rank, refit_input
from .errors import ComputationError, DataError, MissingDataFile, ParseError
from .lasso_path import compute_lars_path
from .linreg_core import Dataset, ols_fit, standardize
from .selector import DEFAULT_GRID_COUNT, SelectionReport, select
from .simbench import example1, example2, run_study

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_COMPUTE = 0, 1, 2, 3
OUTPUT_FORMATS = ("table", "csv", "json")

PROSTATE_RESPONSE = "lpsa"
# 1-based subsets the demo must reproduce
PROSTATE_EXPECTED = {
    Criterion.LR: (1, 2, 5),
    Criterion.GCV: (1, 2, 3, 4, 5, 7, 8),
    Criterion.BIC_TILDE: (1, 2, 3, 4, 5, 8),
}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    input_path: Optional[str] = None
    response: Optional[str] = None
    criteria: tuple = ALL_CRITERIA
    seed: int = 1
    output_format: str = "table"
    lambda_grid: Optional[tuple] = None  # (min, max, count)

    def __post_init__(self):
        if self.command in ("select", "path") and not self.input_path:
            raise UsageError(f"{self.command} needs an input CSV")
        if self.output_format not in OUTPUT_FORMATS:
            raise UsageError(f"unknown output format {self.output_format!r}")
        if self.lambda_grid is not None:
            lo, hi, count = self.lambda_grid
            if int(count) < 2:
                raise UsageError("lambda grid count must be >= 2")
            if not 0 < lo < hi:
                raise UsageError("lambda grid needs 0 < min < max")

    def grid_values(self) -> Optional[np.ndarray]:
        if self.lambda_grid is None:
            return None
        lo, hi, count = self.lambda_grid
        return np.geomspace(hi, lo, int(count))


# ---------------------------------------------------------------- ingestion


def read_csv_dataset(stream: TextIO, response: Optional[str] = None) -> Dataset:
    """Parse a headed numeric CSV; the response defaults to the last column.

    Rows are numbered as in the file (the header is row 1).
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input") from None
    header = [h.strip() for h in header]
    if len(header) < 2:
        raise ParseError("need at least one covariate and a response column", row=1)
    if len(set(header)) != len(header):
        raise ParseError("duplicate column names in header", row=1)
    if response is None:
        response = header[-1]
    if response not in header:
        raise ParseError(f"response column {response!r} not in header", row=1)
    rows = []
    for rownum, rec in enumerate(reader, start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(rec)}", row=rownum)
        vals = []
        for name, cell in zip(header, rec):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric value {cell.strip()!r}", row=rownum, column=name) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {cell.strip()!r}", row=rownum, column=name)
            vals.append(v)
        rows.append(vals)
    if not rows:
        raise ParseError("no data rows")
    M = np.array(rows)
    k = header.index(response)
    cols = [j for j in range(len(header)) if j != k]
    return Dataset(M[:, cols], M[:, k], tuple(header[j] for j in cols))


def load_csv(path: str, response: Optional[str] = None) -> Dataset:
    try:
        with open(path, newline="") as fh:
            return read_csv_dataset(fh, response)
    except FileNotFoundError:
        raise MissingDataFile(f"no such file: {path}") from None


def load_prostate() -> Dataset:
    """The bundled 97-case prostate data with ``lpsa`` as response."""
    try:
        text = resources.files("lossrank").joinpath("data/prostate.csv").read_text()
    except (FileNotFoundError, ModuleNotFoundError):
        raise MissingDataFile("bundled prostate.csv is missing") from None
    return read_csv_dataset(io.StringIO(text), PROSTATE_RESPONSE)


# ---------------------------------------------------------------- rendering


def _one_based(subset) -> str:
    return " ".join(str(j + 1) for j in subset)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return "" if v is None else str(v)


def render(records: List[dict], fmt: str, meta: Optional[dict] = None) -> str:
    """Emit ``records`` as an aligned table, CSV (floats via repr) or JSON."""
    if fmt == "json":
        return json.dumps({**(meta or {}), "rows": records}, indent=2)
    cols = list(records[0].keys()) if records else []
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow({k: repr(v) if isinstance(v, float) else ("" if v is None else v) for k, v in r.items()})
        return buf.getvalue().rstrip("\n")
    cells = [cols] + [[_fmt(r[c]) for c in cols] for r in records]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells)


def choice_records(report: SelectionReport) -> List[dict]:
    names = report.data.names
    out = []
    for crit, ch in report.chosen.items():
        rec = {
            "criterion": str(crit),
            "subset": _one_based(ch.subset),
            "names": ";".join(ch.names),
            "score": float(ch.score),
            "lambda_lo": float(ch.lambda_interval[0]),
            "lambda_hi": float(ch.lambda_interval[1]),
            "lambda_opt": ch.lambda_opt,
            "intercept": float(ch.intercept),
        }
        for name, b in zip(names, ch.coef_raw):
            rec[f"coef_{name}"] = float(b)
        out.append(rec)
    return out


def candidate_records(report: SelectionReport) -> List[dict]:
    out = []
    for i, c in enumerate(report.candidates):
        rec = {
            "subset": _one_based(c.subset),
            "df": c.df,
            "lambda_lo": float(c.lambda_interval[0]),
            "lambda_hi": float(c.lambda_interval[1]),
        }
        for crit, sc in report.scores.items():
            rec[str(crit)] = float(sc[i].value)
        rec["chosen_by"] = ";".join(str(k) for k, ch in report.chosen.items() if ch.subset == c.subset)
        out.append(rec)
    return out


# ---------------------------------------------------------------- commands


def cmd_select(cfg: RunConfig, candidates: bool = False) -> str:
    data = load_csv(cfg.input_path, cfg.response)
    report = select(data, cfg.criteria, lambdas=cfg.grid_values(), skip_infeasible=True)
    for crit in report.unavailable:
        log.warning("no eligible candidate under %s", crit)
    if cfg.output_format == "json":
        return json.dumps({
            "n": data.n,
            "d": data.d,
            "names": list(data.names),
            "unavailable": [str(c) for c in report.unavailable],
            "choices": choice_records(report),
            "candidates": candidate_records(report),
        }, indent=2)
    return render(candidate_records(report) if candidates else choice_records(report), cfg.output_format)


def path_records(data) -> List[dict]:
    path = compute_lars_path(data)
    out = []
    for seg in path.segments:
        kind, j = seg.event
        out.append({
            "lambda": float(seg.lambda_hi),
            "event": kind,
            "index": j + 1,
            "name": data.names[j],
            "active_size": len(seg.active),
        })
    return out


def trace_records(report: SelectionReport) -> List[dict]:
    """Per-grid-point curves: LR of the active set's refit, BIC-tilde, GCV."""
    tr = report.grid
    lr = [loss_rank(refit_input(report.data.n, report.data.y_sq_norm, c.fit)).value for c in report.candidates]
    out = []
    for k, lam in enumerate(tr.lambdas):
        i = int(tr.candidate_index[k])
        out.append({
            "lambda": float(lam),
            "active_size": int(tr.active_size[k]),
            "LR": float(lr[i]) if i >= 0 else math.inf,
            "BIC_TILDE": float(tr.bic_tilde[k]),
            "GCV": float(tr.gcv[k]),
            "DF": float(tr.dof[k]),
        })
    return out


def cmd_path(cfg: RunConfig, trace: bool = False) -> str:
    data = standardize(load_csv(cfg.input_path, cfg.response))
    if trace:
        report = select(
            data, ALL_CRITERIA, lambdas=cfg.grid_values(), skip_infeasible=True,
        )
        return render(trace_records(report), cfg.output_format, {"names": list(data.names)})
    return render(path_records(data), cfg.output_format, {"names": list(data.names)})


def prostate_bic_table(report: SelectionReport) -> List[dict]:
    """BIC of the LR, BIC-tilde and GCV models, counting the intercept as a parameter."""
    data = report.data
    out = []
    for crit in (Criterion.LR, Criterion.BIC_TILDE, Criterion.GCV):
        S = report.chosen[crit].subset
        fit = ols_fit(data, S)
        out.append({
            "criterion": str(crit),
            "subset": _one_based(S),
            "names": ";".join(data.names[j] for j in S),
            "bic": bic(data.n, fit.sigma2_hat, fit.df + 1),
        })
    return out


def cmd_demo_prostate(cfg: RunConfig) -> str:
    report = select(load_prostate(), ALL_CRITERIA)
    for crit, want in PROSTATE_EXPECTED.items():
        got = tuple(j + 1 for j in report.chosen[crit].subset)
        if got != want:
            raise ComputationError(f"{crit} chose {got}, expected {want}")
    choices = choice_records(report)
    bics = prostate_bic_table(report)
    if cfg.output_format == "json":
        return json.dumps({"choices": choices, "bic": bics}, indent=2)
    return render(choices, cfg.output_format) + "\n\n" + render(bics, cfg.output_format)


def cmd_simulate(args, cfg: RunConfig):
    kw = dict(reps=args.reps, seed=cfg.seed, criteria=cfg.criteria, fixed_design=args.fixed_design, corr=args.corr)
    if cfg.lambda_grid is not None:
        raise UsageError("simulate uses the default relative lambda grid; use --grid-count instead")
    kw["grid_count"] = args.grid_count
    try:
        if args.example1:
            design = example1(args.n or 100, args.sigma, **kw)
        else:
            design = example2(args.n or 500, args.sigma, d=args.d or 300, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = run_study(design, workers=args.workers)
    if cfg.output_format == "json":
        text = result.to_json()
    elif cfg.output_format == "csv":
        text = result.to_csv().rstrip("\n")
    else:
        text = result.to_table()
    return text, len(result.failures)


# ---------------------------------------------------------------- argparse


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _criteria(text: str) -> tuple:
    try:
        return tuple(Criterion.parse(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lossrank", description="Loss-rank model selection along the lasso path.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, needs_input):
        if needs_input:
            sp.add_argument("input", help="CSV file with a header row")
            sp.add_argument("--response", help="response column (default: last column)")
        sp.add_argument("--criteria", type=_criteria, default=ALL_CRITERIA,
                        help="comma-separated subset of LR,BIC,GCV,BIC_TILDE")
        sp.add_argument("--output", choices=OUTPUT_FORMATS, default="table")
        sp.add_argument("--lambda-grid", nargs=3, type=float, metavar=("MIN", "MAX", "COUNT"),
                        help="explicit log-spaced grid for GCV/BIC-tilde")

    sp = sub.add_parser("select", help="choose a subset per criterion")
    common(sp, True)
    sp.add_argument("--candidates", action="store_true", help="list every candidate instead of the choices")

    sp = sub.add_parser("path", help="list the lasso path breakpoints")
    common(sp, True)
    sp.add_argument("--trace", action="store_true", help="emit criterion curves on the lambda grid")

    sp = sub.add_parser("simulate", help="Monte Carlo study on an AR(1) design")
    common(sp, False)
    preset = sp.add_mutually_exclusive_group(required=True)
    preset.add_argument("--example1", action="store_true", help="8 covariates, beta = (3,1.5,0,0,2,0,0,0)")
    preset.add_argument("--example2", action="store_true", help="d covariates, 10 on every 30th")
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--d", type=int, default=None, help="number of covariates for --example2")
    sp.add_argument("--corr", type=float, default=0.5)
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--grid-count", type=int, default=DEFAULT_GRID_COUNT)
    sp.add_argument("--fixed-design", action="store_true", help="reuse one design matrix for every replication")

    sp = sub.add_parser("demo-prostate", help="run the bundled prostate example")
    sp.add_argument("--output", choices=OUTPUT_FORMATS, default="table")
    return p


def _config(args) -> RunConfig:
    return RunConfig(
        command=args.command,
        input_path=getattr(args, "input", None),
        response=getattr(args, "response", None),
        criteria=getattr(args, "criteria", ALL_CRITERIA),
        seed=getattr(args, "seed", 1),
        output_format=args.output,
        lambda_grid=tuple(args.lambda_grid) if getattr(args, "lambda_grid", None) else None,
    )


def main(argv: Optional[Sequence[str]] = None, stdout: TextIO = None) -> int:
    out = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    code = EXIT_OK
    try:
        cfg = _config(args)
        if args.command == "select":
            text = cmd_select(cfg, args.candidates)
        elif args.command == "path":
            text = cmd_path(cfg, args.trace)
        elif args.command == "demo-prostate":
            text = cmd_demo_prostate(cfg)
        else:
            if args.workers < 1 or args.reps < 1:
                raise UsageError("--workers and --reps must be >= 1")
            text, failures = cmd_simulate(args, cfg)
            if failures:
                print(f"lossrank: {failures} replication(s) failed", file=sys.stderr)
                code = EXIT_COMPUTE
    except UsageError as exc:
        print(f"lossrank: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"lossrank: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ComputationError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"lossrank: computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    try:
        print(text, file=out)
        out.flush()
    except BrokenPipeError:
        sys.stderr.close()
    return code


if __name__ == "__main__":
    sys.exit(main())
