"""End-to-end analysis: read micro-data, evaluate targets under each model, serialize."""

from __future__ import annotations

import ast
import csv
import io
import json
import logging
import math
import operator
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .bounds import (
    ExtendedInterval,
    BoundsCurve,
    MODEL_TAGS,
    sharp_late_bounds,
    uniform_bounds_curve,
    wte_bounds,
)
from .covariates import (
    DEFAULT_MIN_CELL_SIZE,
    CovariateCells,
    conditional_rank_inputs,
    conditional_rs_tests,
    covariate_tightened_bounds,
    split_cells,
)
from .dist import PiecewiseConstant, build_step_distribution, stochastic_order
from .errors import BoundsError, ConfigError, EmptyGroup, IdentificationError
from .identification import DataRecord, IdentifiedModel, check_complier_support, estimate_identified_model
from .linear import LinearMTEFit, fit_linear_mte, linear_curve
from .means import mean_support_bounds, mean_support_wte_bounds, means_curve
from .oracle import MAX_BLOCKS, majorization_membership_oracle, permutation_wte_oracle
from .rank import rs_uniform_bounds, rs_wte_bounds

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
DEFAULT_TARGETS = ("late:p0,p1", "ate", "att")
DEFAULT_GRID = 101
CONSTANT_LABEL = "all"


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------


@dataclass
class AnalysisConfig:
    input: str | None = None
    targets: list[str] = field(default_factory=lambda: list(DEFAULT_TARGETS))
    models: list[str] = field(default_factory=lambda: ["base"])
    outcome_support: tuple[float, float] | None = None
    min_cell_size: int = DEFAULT_MIN_CELL_SIZE
    grid: int = DEFAULT_GRID
    out: str | None = None
    format: str = "json"
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.targets, str):
            self.targets = split_list(self.targets)
        if isinstance(self.models, str):
            self.models = split_list(self.models)
        unknown = [m for m in self.models if m not in MODEL_TAGS]
        if unknown:
            raise ConfigError(f"unknown model tag(s): {', '.join(unknown)}")
        if isinstance(self.outcome_support, str):
            self.outcome_support = parse_support(self.outcome_support)
        if self.format not in ("json", "csv"):
            raise ConfigError(f"unknown output format {self.format!r}")
        if int(self.grid) < 2:
            raise ConfigError("grid needs at least two points")
        if int(self.min_cell_size) < 1:
            raise ConfigError("min-cell-size must be positive")

    @classmethod
    def from_mapping(cls, data: dict) -> AnalysisConfig:
        names = {f.name for f in fields(cls)}
        data = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown configuration key(s): {', '.join(sorted(unknown))}")
        if isinstance(data.get("outcome_support"), list):
            data["outcome_support"] = parse_support(",".join("" if v is None else str(v) for v in data["outcome_support"]))
        return cls(**data)


def split_list(text: str) -> list[str]:
    """Split on semicolons, or on commas that are not inside a ``late:`` target."""
    if ";" in text:
        return [t.strip() for t in text.split(";") if t.strip()]
    items, current = [], []
    for piece in text.split(","):
        piece = piece.strip()
        if current and current[0].startswith("late:") and len(current) < 2:
            current.append(piece)
            items.append(",".join(current))
            current = []
        elif piece.startswith("late:") and "," not in piece:
            current = [piece]
        elif piece:
            items.append(piece)
    if current:
        items.append(",".join(current))
    return items


def parse_support(text: str) -> tuple[float, float] | None:
    text = text.strip()
    if text.lower() in ("none", ""):
        return None
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"outcome support must be 'lo,hi' or 'none', got {text!r}")
    try:
        lo = -math.inf if parts[0] in ("", "-inf") else float(parts[0])
        hi = math.inf if parts[1] in ("", "inf") else float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"bad outcome support {text!r}") from exc
    if not lo <= hi:
        raise ConfigError(f"outcome support needs lo <= hi, got {text!r}")
    return lo, hi


# --------------------------------------------------------------------------
# Input
# --------------------------------------------------------------------------


def read_records(path: str | Path) -> tuple[list[DataRecord], bool]:
    """Read a CSV with columns ``z, d, y`` and optional ``weight, x``.

    Returns the records and whether a covariate column was present.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"input file {str(path)!r} does not exist")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = {"z", "d", "y"} - set(header)
        if missing:
            raise ConfigError(f"{path}: missing required column(s) {', '.join(sorted(missing))}")
        extra = set(header) - {"z", "d", "y", "weight", "x"}
        if extra:
            logger.warning("ignoring extra column(s): %s", ", ".join(sorted(extra)))
        has_x = "x" in header
        records = []
        for lineno, row in enumerate(reader, start=2):
            row = {k.strip(): (v.strip() if isinstance(v, str) else v) for k, v in row.items() if k is not None}
            try:
                z = _binary(row["z"])
                d = _binary(row["d"])
                y = float(row["y"])
                weight = float(row["weight"]) if row.get("weight") not in (None, "") else 1.0
                x = row.get("x") if has_x else CONSTANT_LABEL
                records.append(DataRecord(z, d, y, weight, x))
            except (ValueError, TypeError, KeyError, BoundsError) as exc:
                raise ConfigError(f"{path}: line {lineno}: {exc}") from exc
    if not records:
        raise ConfigError(f"{path}: no data rows")
    return records, has_x


def _binary(text: str) -> int:
    value = float(text)
    if value not in (0.0, 1.0):
        raise ValueError(f"expected 0 or 1, got {text!r}")
    return int(value)


# --------------------------------------------------------------------------
# Targets
# --------------------------------------------------------------------------

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}


def eval_expression(text: str, names: dict[str, float]) -> float:
    """Evaluate an arithmetic expression over numbers and the given names."""

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in names:
            return float(names[node.id])
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](walk(node.operand))
        raise ConfigError(f"unsupported expression {text!r}")

    try:
        return walk(ast.parse(text.strip(), mode="eval"))
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}") from exc
    except ZeroDivisionError as exc:
        raise ConfigError(f"division by zero in {text!r}") from exc


@dataclass(frozen=True, eq=False)
class Target:
    """A resolved target: a LATE interval or a general weight function."""

    name: str
    kind: str
    weight: PiecewiseConstant
    interval: tuple[float, float] | None = None

    def describe(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        if self.interval is not None:
            out["interval"] = [encode_float(v) for v in self.interval]
        return out


def read_weight_file(path: str | Path) -> PiecewiseConstant:
    """CSV with columns ``start, end, weight``; uncovered parts of [0, 1] get weight zero."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"weight file {str(path)!r} does not exist")
    rows = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"start", "end", "weight"} <= {h.strip() for h in reader.fieldnames}:
            raise ConfigError(f"{path}: weight file needs columns start, end, weight")
        for lineno, row in enumerate(reader, start=2):
            row = {k.strip(): v for k, v in row.items() if k is not None}
            try:
                a, b, v = float(row["start"]), float(row["end"]), float(row["weight"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}: line {lineno}: {exc}") from exc
            if not (0.0 <= a < b <= 1.0) or not math.isfinite(v):
                raise ConfigError(f"{path}: line {lineno}: need 0 <= start < end <= 1 and a finite weight")
            rows.append((a, b, v))
    rows.sort()
    for (a0, b0, _), (a1, _, _) in zip(rows, rows[1:]):
        if a1 < b0:
            raise ConfigError(f"{path}: weight cells overlap")
    bp = sorted({0.0, 1.0, *[r[0] for r in rows], *[r[1] for r in rows]})
    values = []
    for lo, hi in zip(bp, bp[1:]):
        mid = (lo + hi) / 2
        values.append(next((v for a, b, v in rows if a <= mid < b), 0.0))
    return PiecewiseConstant(bp, values)


def resolve_target(text: str, model: IdentifiedModel, base_dir: Path | None = None) -> Target:
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind == "late":
        parts = arg.split(",")
        if len(parts) != 2:
            raise ConfigError(f"late target needs two endpoints: {text!r}")
        names = {"p0": model.p0, "p1": model.p1}
        u, u_hi = (eval_expression(p, names) for p in parts)
        if not (0.0 <= u < u_hi <= 1.0):
            raise ConfigError(f"late target {text!r} resolves to [{u}, {u_hi}], not a subinterval of [0, 1]")
        return Target(text, "late", PiecewiseConstant.step(u, u_hi, 1.0 / (u_hi - u)), (u, u_hi))
    if kind == "ate":
        return Target(text, "ate", PiecewiseConstant.constant(1.0), (0.0, 1.0))
    if kind == "att":
        pi = model.prob_z1
        treated = (1 - pi) * model.p0 + pi * model.p1
        bp = np.unique([0.0, model.p0, model.p1, 1.0])
        mids = (bp[:-1] + bp[1:]) / 2
        values = ((1 - pi) * (mids <= model.p0) + pi * (mids <= model.p1)) / treated
        return Target(text, "att", PiecewiseConstant(bp, values))
    if kind == "wte":
        path = Path(arg.strip())
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return Target(text, "wte", read_weight_file(path))
    raise ConfigError(f"unknown target {text!r}")


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


@dataclass
class Pipeline:
    """Shared state for one dataset: the identified model and lazily built extras."""

    model: IdentifiedModel
    records: list[DataRecord]
    config: AnalysisConfig
    _cells: CovariateCells | None = None
    _fit: LinearMTEFit | None = None

    @property
    def cells(self) -> CovariateCells:
        if self._cells is None:
            self._cells = split_cells(self.records, self.config.min_cell_size)
        return self._cells

    @property
    def fit(self) -> LinearMTEFit:
        if self._fit is None:
            self._fit = fit_linear_mte(self.model)
        return self._fit

    def interval(self, tag: str, target: Target) -> ExtendedInterval:
        support = self.config.outcome_support
        if tag == "means":
            if target.interval is not None:
                return mean_support_bounds(self.model, target.interval, support)
            return mean_support_wte_bounds(self.model, target.weight, support)
        if tag == "base":
            if target.kind == "late":
                return sharp_late_bounds(self.model, *target.interval, support)
            return wte_bounds(self.model, target.weight, support)
        if tag == "covariate":
            if target.kind == "late":
                return covariate_tightened_bounds(self.cells, sharp_late_bounds, *target.interval, support)
            return covariate_tightened_bounds(self.cells, wte_bounds, target.weight, support)
        if tag == "rank_sim":
            return rs_wte_bounds(self.model, target.weight)
        if tag == "cond_rank_sim":
            return rs_wte_bounds(conditional_rank_inputs(self.cells), target.weight)
        if tag == "linear":
            return ExtendedInterval.point(linear_wte(self.fit, target.weight))
        raise ConfigError(f"unknown model tag {tag!r}")

    def curve(self, tag: str) -> BoundsCurve:
        support = self.config.outcome_support
        if tag == "means":
            return means_curve(self.model, support)
        if tag == "base":
            return uniform_bounds_curve(self.model, support)
        if tag == "covariate":
            return covariate_tightened_bounds(self.cells, uniform_bounds_curve, support)
        if tag == "rank_sim":
            return rs_uniform_bounds(self.model)
        if tag == "cond_rank_sim":
            return rs_uniform_bounds(conditional_rank_inputs(self.cells))
        if tag == "linear":
            return linear_curve(self.model, self.fit)
        raise ConfigError(f"unknown model tag {tag!r}")


def linear_wte(fit: LinearMTEFit, w: PiecewiseConstant) -> float:
    """Exact ``int (a + b u) w(u) du`` for the fitted line."""
    lo, hi = w.breakpoints[:-1], w.breakpoints[1:]
    return float(np.sum(w.values * (fit.intercept * (hi - lo) + fit.slope * (hi**2 - lo**2) / 2)))


def load_pipeline(config: AnalysisConfig) -> Pipeline:
    if not config.input:
        raise ConfigError("an input file is required")
    records, _ = read_records(config.input)
    return Pipeline(estimate_identified_model(records), records, config)


def _identified_summary(model: IdentifiedModel) -> dict:
    return {
        "p0": model.p0,
        "p1": model.p1,
        "group_probs": list(model.group_probs),
        "ybar_p0": model.ybar_p0,
        "ybar_p1": model.ybar_p1,
        "late_ia": model.late_ia,
    }


def run_analysis(config: AnalysisConfig, pipeline: Pipeline | None = None) -> dict:
    """Evaluate every target under every model and collect curves and diagnostics."""
    pipe = load_pipeline(config) if pipeline is None else pipeline
    base_dir = Path(config.input).parent if config.input else None
    targets = [resolve_target(t, pipe.model, base_dir) for t in config.targets]
    intervals, curves, errors = [], [], []
    for tag in config.models:
        for target in targets:
            try:
                iv = pipe.interval(tag, target)
                intervals.append({"target": target.name, "model": tag, "lower": encode_float(iv.lower), "upper": encode_float(iv.upper)})
            except BoundsError as exc:
                if isinstance(exc, IdentificationError) and not _recoverable(exc):
                    raise
                errors.append({"model": tag, "target": target.name, "error": type(exc).__name__, "message": str(exc)})
                intervals.append({"target": target.name, "model": tag, "lower": None, "upper": None})
        try:
            curves.append(curve_payload(pipe.curve(tag), config.grid))
        except BoundsError as exc:
            if isinstance(exc, IdentificationError) and not _recoverable(exc):
                raise
            errors.append({"model": tag, "target": None, "error": type(exc).__name__, "message": str(exc)})

    return {
        "schema_version": SCHEMA_VERSION,
        "model_tags": list(config.models),
        "targets": [t.describe() for t in targets],
        "identified": _identified_summary(pipe.model),
        "intervals": intervals,
        "curves": curves,
        "diagnostics": _diagnostics(pipe, config, errors),
    }


def _recoverable(exc: IdentificationError) -> bool:
    return isinstance(exc, EmptyGroup)


def _diagnostics(pipe: Pipeline, config: AnalysisConfig, errors: list) -> dict:
    iso = {"pooled": pipe.model.diagnostics.as_dict()}
    cond = None
    if any(tag in ("covariate", "cond_rank_sim") for tag in config.models):
        for x, (_, m) in pipe.cells.cells.items():
            iso[f"cell:{x}"] = m.diagnostics.as_dict()
        try:
            cond = conditional_rs_tests(pipe.cells).as_dict()
        except BoundsError as exc:
            cond = {"error": type(exc).__name__, "message": str(exc)}
    return {
        "isotonization": iso,
        "support_checks": check_complier_support(pipe.model).as_dict(),
        "cond_rs_tests": cond,
        "model_errors": errors,
    }


def curve_payload(curve: BoundsCurve, grid: int) -> dict:
    knots = curve.knots()
    pts = np.linspace(0.0, 1.0, grid)
    return {
        "model": curve.model_tag,
        "knots": _triples(curve, knots),
        "grid": _triples(curve, pts),
    }


def _triples(curve: BoundsCurve, pts: np.ndarray) -> list:
    lower = curve.lower_at(pts)
    upper = curve.upper_at(pts)
    return [[float(p), encode_float(lo), encode_float(hi)] for p, lo, hi in zip(pts, lower, upper)]


def emit_bounds_figure_data(config: AnalysisConfig, pipeline: Pipeline | None = None) -> dict:
    """Curve bundle for plotting: every requested model plus the linear candidate."""
    pipe = load_pipeline(config) if pipeline is None else pipeline
    tags = list(dict.fromkeys([*config.models, "linear"]))
    curves, errors = [], []
    for tag in tags:
        try:
            curves.append(curve_payload(pipe.curve(tag), config.grid))
        except BoundsError as exc:
            if isinstance(exc, IdentificationError) and not _recoverable(exc):
                raise
            errors.append({"model": tag, "error": type(exc).__name__, "message": str(exc)})
    return {
        "schema_version": SCHEMA_VERSION,
        "model_tags": tags,
        "identified": _identified_summary(pipe.model),
        "curves": curves,
        "diagnostics": {"model_errors": errors},
    }


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def encode_float(x: float) -> Any:
    """Finite floats pass through; infinities become ``"inf"`` / ``"-inf"``."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        raise ValueError("NaN cannot be serialized")
    return x


def decode_float(x: Any) -> float:
    """Inverse of :func:`encode_float`."""
    return float(x)


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False)


def to_csv(report: dict) -> str:
    """Flat projection: one row per interval and one row per curve point."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["section", "model", "target", "p", "lower", "upper"])
    for row in report.get("intervals", []):
        writer.writerow(["interval", row["model"], row["target"], "", _fmt(row["lower"]), _fmt(row["upper"])])
    for curve in report.get("curves", []):
        for section in ("knots", "grid"):
            for p, lo, hi in curve[section]:
                writer.writerow([f"curve_{section}", curve["model"], "", _fmt(p), _fmt(lo), _fmt(hi)])
    return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return format(x, ".17g")


def serialize(report: dict, fmt: str) -> str:
    return to_json(report) if fmt == "json" else to_csv(report)


# --------------------------------------------------------------------------
# Oracle suites
# --------------------------------------------------------------------------


def block_model(y0_blocks, y1_blocks) -> IdentifiedModel:
    """Population model where everyone complies and outcomes are equal-mass blocks."""
    return IdentifiedModel.from_groups(0.0, 1.0, None, None, build_step_distribution(y0_blocks), build_step_distribution(y1_blocks))


def block_weight(w_blocks) -> PiecewiseConstant:
    n = len(w_blocks)
    return PiecewiseConstant(np.linspace(0.0, 1.0, n + 1), w_blocks)


def run_oracle_suite(instances: int = 500, seed: int = 0, tol: float = 1e-12) -> dict:
    """Compare closed-form bounds and orders with brute force on random block instances."""
    rng = np.random.default_rng(seed)
    wte_mismatch = order_mismatch = 0
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(1, MAX_BLOCKS + 1))
        y0, y1 = rng.integers(-3, 4, size=n), rng.integers(-3, 4, size=n)
        w = rng.integers(0, 4, size=n)
        closed = wte_bounds(block_model(y0, y1), block_weight(w))
        brute = permutation_wte_oracle(y0, y1, w)
        gap = max(abs(closed.lower - brute.lower), abs(closed.upper - brute.upper))
        worst = max(worst, gap)
        wte_mismatch += gap > tol

        m = rng.integers(-3, 4, size=n)
        delta = rng.integers(-3, 4, size=n)
        if rng.random() < 0.5:
            m = m - m.mean() + delta.mean()
        convex = stochastic_order(build_step_distribution(m), build_step_distribution(delta), "convex")
        order_mismatch += convex != majorization_membership_oracle(m, delta)
    return {
        "instances": instances,
        "seed": seed,
        "wte_mismatches": int(wte_mismatch),
        "wte_max_gap": worst,
        "order_mismatches": int(order_mismatch),
    }
