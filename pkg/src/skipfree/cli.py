"""Command-line front end.

Usage::

    skipfree <command> --model FILE [--kmax K] [--trunc N] [--tol T] [--n-max N]
             [--seed S] [--excursions E] [--workers W] [--format table|csv] [--out PATH]

Commands: classify, stationary, simulate, compare, validate.
Exit status: 0 success, 1 computational refusal, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .classify import POSITIVE_RECURRENT, classify
from .errors import (
    Diverged,
    ExcursionBudgetExceeded,
    ModelError,
    NoConvergence,
    NotPositiveRecurrent,
    ParseError,
    SchemaError,
    SingularSystem,
    TooSmall,
)
from .model import ProcessModel, RateProfile, TailRule, build_model
from .oracle import compare, fmt
from .simulate import SimConfig, estimate_return_times
from .stationary import psi_stationary

COMMANDS = ("classify", "stationary", "simulate", "compare", "validate")
REFUSALS = (NotPositiveRecurrent, Diverged, NoConvergence, ExcursionBudgetExceeded, SingularSystem)

_TOP_KEYS = {"R", "prefix", "tail", "tail.kind", "tail.block"}
_TAIL_KEYS = {"kind", "block"}


# ---------------------------------------------------------------------------
# model files


def _number(value, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(field, f"expected a number, got {value!r}")
    x = float(value)
    if not math.isfinite(x):
        raise SchemaError(field, "rate must be finite")
    if x < 0:
        raise SchemaError(field, "rate must be nonnegative")
    return x


def _rows(value, field: str, R: int) -> list[tuple]:
    if not isinstance(value, list) or not value:
        raise SchemaError(field, "expected a non-empty list of rows")
    rows = []
    for i, row in enumerate(value):
        where = f"{field}[{i}]"
        if not isinstance(row, list) or len(row) != R + 1:
            raise SchemaError(where, f"expected a list [mu, lambda1, ..., lambda{R}] of length {R + 1}")
        names = ["mu"] + [f"lambda{r}" for r in range(1, R + 1)]
        rows.append(tuple(_number(x, f"{where}.{name}") for x, name in zip(row, names)))
    return rows


def profile_from_mapping(doc) -> RateProfile:
    if not isinstance(doc, dict):
        raise SchemaError("<root>", "expected a mapping")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise SchemaError(sorted(map(str, unknown))[0], "unknown key")
    if "R" not in doc:
        raise SchemaError("R", "missing required key")
    R = doc["R"]
    if isinstance(R, bool) or not isinstance(R, int) or R < 1:
        raise SchemaError("R", "expected an integer >= 1")
    if "prefix" not in doc:
        raise SchemaError("prefix", "missing required key")
    prefix = _rows(doc["prefix"], "prefix", R)

    tail = dict(doc.get("tail") or {})
    if "tail" in doc and not isinstance(doc["tail"], (dict, type(None))):
        raise SchemaError("tail", "expected a mapping")
    for key in ("kind", "block"):
        if f"tail.{key}" in doc:
            tail[key] = doc[f"tail.{key}"]
    unknown = set(tail) - _TAIL_KEYS
    if unknown:
        raise SchemaError(f"tail.{sorted(map(str, unknown))[0]}", "unknown key")
    kind = tail.get("kind", "constant")
    if kind not in ("constant", "periodic"):
        raise SchemaError("tail.kind", "expected 'constant' or 'periodic'")
    block = _rows(tail["block"], "tail.block", R) if "block" in tail else []
    if kind == "constant" and len(block) > 1:
        raise SchemaError("tail.block", "a constant tail takes a single row")
    if kind == "periodic" and not block:
        raise SchemaError("tail.block", "a periodic tail needs at least one row")
    return RateProfile(R, tuple(prefix), TailRule(kind, tuple(block)))


def parse_model_text(text: str, source: str = "<string>") -> RateProfile:
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        loc = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ParseError(loc, exc.problem or str(exc)) from None
    except yaml.YAMLError as exc:
        raise ParseError(source, str(exc)) from None
    return profile_from_mapping(doc)


def parse_model_file(path) -> RateProfile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(str(path), exc.strerror or str(exc)) from None
    return parse_model_text(text, str(path))


def dump_model(profile: RateProfile) -> str:
    doc = {"R": profile.R, "prefix": [list(r) for r in profile.prefix], "tail": {"kind": profile.tail.kind}}
    if profile.tail.block:
        doc["tail"]["block"] = [list(r) for r in profile.tail.block]
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class RunSpec:
    command: str
    model: str
    kmax: int | None = None
    trunc: int = 200
    tol: float = 1e-10
    n_max: int | None = None
    seed: int = 0
    excursions: int = 10_000
    workers: int = 1
    format: str = "table"
    out: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise SchemaError("command", f"expected one of {', '.join(COMMANDS)}")
        if self.kmax is not None and self.kmax < 0:
            raise SchemaError("--kmax", "must be >= 0")
        if self.trunc < 2:
            raise SchemaError("--trunc", "must be >= 2")
        if not self.tol > 0:
            raise SchemaError("--tol", "must be positive")
        if self.n_max is not None and self.n_max < 1:
            raise SchemaError("--n-max", "must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise SchemaError("--seed", "must fit in 64 bits")
        if self.excursions < 2:
            raise SchemaError("--excursions", "must be >= 2")
        if self.workers < 1:
            raise SchemaError("--workers", "must be >= 1")
        if self.format not in ("table", "csv"):
            raise SchemaError("--format", "expected table or csv")


class Report:
    """Sections of (header, rows) rendered as CSV or as aligned text."""

    def __init__(self):
        self.sections: list[tuple[list, list]] = []

    def add(self, header: list, rows: list) -> None:
        self.sections.append((header, rows))

    @staticmethod
    def _cell(x) -> str:
        if isinstance(x, (float, np.floating)):
            return fmt(x)
        return str(x)

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for header, rows in self.sections:
            w.writerow(header)
            for row in rows:
                w.writerow([self._cell(x) for x in row])
        return buf.getvalue()

    def table(self) -> str:
        out = []
        for header, rows in self.sections:
            cells = [header] + [
                [format(x, ".10g") if isinstance(x, (float, np.floating)) else str(x) for x in row]
                for row in rows
            ]
            widths = [max(len(r[c]) for r in cells) for c in range(len(header))]
            for r in cells:
                out.append("  ".join(s.rjust(wd) for s, wd in zip(r, widths)).rstrip())
            out.append("")
        return "\n".join(out)


def report_classify(model: ProcessModel, spec: RunSpec) -> Report:
    res = classify(model, tol=spec.tol, n_max=spec.n_max)
    rep = Report()
    rows = [
        ["verdict", res.verdict],
        ["rho_tail", res.rho_tail],
        ["rho_step", res.rho_step],
        ["phi_last", res.phi_last],
        ["n_used", res.n_used],
        ["partial_sum", res.partial_sum],
        ["tail_bound", res.tail_bound],
        ["plain_partial_sum", res.plain_partial_sum],
        ["plain_tail_bound", res.plain_tail_bound],
        ["certified", res.certified],
        ["numerically_decided", res.numerically_decided],
    ]
    if res.note:
        rows.append(["note", res.note])
    rep.add(["quantity", "value"], rows)
    return rep


def report_stationary(model: ProcessModel, spec: RunSpec) -> Report:
    res = psi_stationary(model, kmax=spec.kmax)
    rep = Report()
    rep.add(["k", "psi", "pi"], [[k, res.psi[k], res.pi[k]] for k in range(res.kmax + 1)])
    rep.add(
        ["quantity", "value", "bound"],
        [
            ["ET", res.ET, res.ET_residual],
            ["Eeta", res.Eeta, res.Eeta_residual],
            ["psi_tail_mass", res.tail_mass_bound, res.tail_mass_bound],
            ["pi_tail_mass", res.pi_tail_mass_bound, res.pi_tail_mass_bound],
        ],
    )
    return rep


def report_simulate(model: ProcessModel, spec: RunSpec) -> Report:
    cfg = SimConfig(seed=spec.seed, excursions=spec.excursions, workers=spec.workers)
    est = estimate_return_times(model, cfg)
    up0 = model.up_rate(0)
    psi0 = 1.0 / up0 / est.mean_eta
    psi0_se = psi0 * est.se_eta / est.mean_eta
    pi0 = 1.0 / est.mean_T
    pi0_se = pi0 * est.se_T / est.mean_T
    rep = Report()
    rep.add(
        ["quantity", "estimate", "standard_error"],
        [
            ["mean_T", est.mean_T, est.se_T],
            ["mean_eta", est.mean_eta, est.se_eta],
            ["pi_0", pi0, pi0_se],
            ["psi_0", psi0, psi0_se],
        ],
    )
    rep.add(["seed", "excursions"], [[spec.seed, est.n]])
    return rep


def report_compare(model: ProcessModel, spec: RunSpec) -> Report:
    rep_ = compare(model, spec.trunc, spec.kmax)
    rep = Report()
    rep.add(
        ["k", "psi_formula", "psi_oracle", "abs_diff"],
        [[k, rep_.psi_formula[k], rep_.psi_oracle[k], rep_.psi_diff[k]] for k in range(rep_.kmax + 1)],
    )
    rep.add(["N", "sup_norm", "tv_distance"], [[rep_.N, rep_.sup_norm, rep_.tv_distance]])
    return rep


def validation_checks(model: ProcessModel, spec: RunSpec) -> list[tuple[str, bool, str]]:
    from .linalg import a_product_mass, phi, phi_window

    checks = []
    sites = range(model.prefix_length + model.period + model.R + 1)
    worst = max(abs(math.fsum(model.embedded_row(i).values()) - 1.0) for i in sites)
    checks.append(("embedded rows sum to 1", worst <= 2.3e-16 * (model.R + 1), f"max error {worst:.3g}"))
    worst = max(abs(model.generator_row(i).diagonal + math.fsum(model.generator_row(i).entries.values()))
                for i in sites)
    checks.append(("generator rows conservative", worst <= 1e-12 * model.rate_sup, f"max error {worst:.3g}"))

    rel = 0.0
    rtl = 0.0
    for n in range(1, 51):
        a = float(a_product_mass(model, n))
        m = float(phi(model, n - 1))
        if m > 0:
            rel = max(rel, abs(a - m) / m)
        r = float(phi_window(model, 1, n))
        if m > 0:
            rtl = max(rtl, abs(r - m) / m)
    checks.append(("A-product mass equals M-product (n<=50)", rel <= 1e-12, f"max rel error {rel:.3g}"))
    checks.append(("left/right product evaluation agree", rtl <= 1e-12, f"max rel error {rtl:.3g}"))

    res = classify(model, tol=spec.tol, n_max=spec.n_max)
    checks.append(("classification", True, res.verdict))
    if res.verdict != POSITIVE_RECURRENT:
        return checks

    st = psi_stationary(model, kmax=spec.kmax)
    target = 1.0 / model.up_rate(0)
    err = abs(st.psi[0] * st.Eeta - target) / target
    checks.append(("renewal identity psi_0 * Eeta", err <= 1e-12, f"rel error {err:.3g}"))
    total = np.array([model.total_rate(k) for k in range(st.kmax + 1)])
    nu = st.pi / total
    err = float(np.max(np.abs(nu / nu[0] * st.psi[0] - st.psi) / np.maximum(st.psi, 1e-300)))
    checks.append(("psi proportional to pi / total rate", err <= 1e-12, f"max rel error {err:.3g}"))
    mass = float(st.psi.sum() + st.tail_mass_bound)
    checks.append(("psi mass plus tail bound", abs(mass - 1) <= 1e-10, f"{mass:.17g}"))
    try:
        rep = compare(model, spec.trunc, spec.kmax if spec.kmax is not None else min(spec.trunc, st.kmax))
        checks.append((f"oracle sup-norm at N={spec.trunc}", rep.sup_norm <= 1e-8, f"{rep.sup_norm:.3g}"))
        checks.append((f"embedded oracle sup-norm at N={spec.trunc}", rep.pi_sup_norm <= 1e-8,
                       f"{rep.pi_sup_norm:.3g}"))
    except TooSmall as exc:
        checks.append(("oracle comparison", False, str(exc)))
    return checks


def report_validate(model: ProcessModel, spec: RunSpec) -> tuple[Report, bool]:
    checks = validation_checks(model, spec)
    rep = Report()
    rep.add(["check", "status", "detail"], [[n, "PASS" if ok else "FAIL", d] for n, ok, d in checks])
    return rep, all(ok for _, ok, _ in checks)


def run(spec: RunSpec, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        model = build_model(parse_model_file(spec.model))
    except (ParseError, SchemaError, ModelError) as exc:
        print(f"error: {exc}", file=stderr)
        return 2

    status = 0
    try:
        if spec.command == "validate":
            rep, ok = report_validate(model, spec)
            status = 0 if ok else 1
        else:
            rep = {
                "classify": report_classify,
                "stationary": report_stationary,
                "simulate": report_simulate,
                "compare": report_compare,
            }[spec.command](model, spec)
    except REFUSALS as exc:
        print(f"refused: {exc}", file=stderr)
        return 1
    except (TooSmall, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return 2

    text = rep.csv() if spec.format == "csv" else rep.table()
    if spec.out:
        Path(spec.out).write_text(text)
    else:
        stdout.write(text)
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="skipfree",
        description="Birth-death processes with bounded right jumps and unit left jumps.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--model", required=True, help="YAML model file")
    p.add_argument("--kmax", type=int, default=None, help="largest state reported")
    p.add_argument("--trunc", type=int, default=200, help="truncation level N for the oracle")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--n-max", dest="n_max", type=int, default=None, help="series length cap for classify")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--excursions", type=int, default=10_000)
    p.add_argument("--workers", type=int, default=1, help="threads for simulate")
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = RunSpec(**vars(args))
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
