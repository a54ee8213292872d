"""Tabular data, conditional-independence tests, and the cached answer source.

Two decision backends feed the structure learner through one interface:
statistical tests on a :class:`Dataset` (G-squared for categorical columns,
Fisher-z partial correlation for continuous ones) and an exact d-separation
oracle on a known DAG.  Every answer is cached, and independence findings
are recorded in a sepset registry for v-structure orientation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from . import _kernels
from .errors import DatasetError, DegenerateDataError, TestInputError
from .graphs import MixedGraph, SepsetRegistry, d_separated

MAX_CATEGORICAL_CARDINALITY = 20  # schema inference cutoff for integer columns
MAX_CONTINGENCY_CELLS = 1 << 26


@dataclass(frozen=True)
class Categorical:
    cardinality: int


@dataclass(frozen=True)
class Continuous:
    pass


Schema = Categorical | Continuous


@dataclass
class Column:
    name: str
    schema: Schema
    values: np.ndarray  # int32 codes or float64

    def __post_init__(self):
        if isinstance(self.schema, Categorical):
            if self.schema.cardinality < 1:
                raise DatasetError(f"column {self.name!r}: cardinality must be positive")
            self.values = np.asarray(self.values, dtype=np.int32)
            if self.values.size and (
                self.values.min() < 0 or self.values.max() >= self.schema.cardinality
            ):
                raise DatasetError(
                    f"column {self.name!r}: codes outside [0, {self.schema.cardinality})"
                )
        else:
            self.values = np.asarray(self.values, dtype=np.float64)


class Dataset:
    """Column-major table with per-column schema."""

    def __init__(self, columns: list[Column]):
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise DatasetError("duplicate column names")
        lengths = {len(c.values) for c in columns}
        if len(lengths) > 1:
            raise DatasetError("columns differ in length")
        self.columns = list(columns)
        self._by_name = {c.name: c for c in columns}
        self.row_count = lengths.pop() if lengths else 0

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        try:
            return self._by_name[name]
        except KeyError:
            raise DatasetError(f"unknown column {name!r}") from None

    def schema_of(self, name: str) -> Schema:
        return self.column(name).schema

    def __repr__(self) -> str:
        return f"Dataset({len(self.columns)} columns, {self.row_count} rows)"


def parse_schema_override(text: str) -> dict[str, Schema]:
    """Parse the `{"col": "categorical:K"|"continuous"}` override document."""
    doc = json.loads(text)
    out: dict[str, Schema] = {}
    for name, spec in doc.items():
        if spec == "continuous":
            out[name] = Continuous()
        elif isinstance(spec, str) and spec.startswith("categorical:"):
            out[name] = Categorical(int(spec.split(":", 1)[1]))
        else:
            raise DatasetError(f"bad schema override for {name!r}: {spec!r}")
    return out


def load_dataset(path: str | Path, schema_overrides: dict[str, Schema] | None = None) -> Dataset:
    """Read a headered CSV, inferring per-column schema.

    Columns whose cells all parse as integers with at most
    ``MAX_CATEGORICAL_CARDINALITY`` distinct values become categorical with
    codes remapped to 0..K-1 in ascending value order; everything else is
    continuous.  Overrides pin a column's schema instead (categorical
    overrides expect ready-made codes in [0, K)).  Ragged rows, empty or
    unparseable cells, and empty files are rejected.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        raw_rows = list(reader)
    if not raw_rows:
        raise DatasetError(f"{path}: no data rows")
    n_cols = len(header)
    for r, row in enumerate(raw_rows):
        if len(row) != n_cols:
            raise DatasetError(f"{path}: ragged row {r + 2} ({len(row)} cells, expected {n_cols})")

    overrides = schema_overrides or {}
    for name in overrides:
        if name not in header:
            raise DatasetError(f"schema override references unknown column {name!r}")

    columns = []
    for c, name in enumerate(header):
        cells = [row[c] for row in raw_rows]
        columns.append(_build_column(path, name, cells, overrides.get(name)))
    return Dataset(columns)


def _build_column(path: Path, name: str, cells: list[str], override: Schema | None) -> Column:
    def parse_all(conv):
        out = []
        for r, cell in enumerate(cells):
            try:
                out.append(conv(cell))
            except ValueError:
                raise DatasetError(
                    f"{path}: unparseable cell at row {r + 2}, column {name!r}: {cell!r}"
                ) from None
        return out

    if isinstance(override, Continuous):
        return Column(name, Continuous(), np.array(parse_all(float)))
    if isinstance(override, Categorical):
        return Column(name, override, np.array(parse_all(int)))

    try:
        ints = [int(cell) for cell in cells]
    except ValueError:
        ints = None
    if ints is not None:
        distinct = sorted(set(ints))
        if len(distinct) <= MAX_CATEGORICAL_CARDINALITY:
            remap = {v: i for i, v in enumerate(distinct)}
            codes = np.array([remap[v] for v in ints], dtype=np.int32)
            return Column(name, Categorical(len(distinct)), codes)
        return Column(name, Continuous(), np.array(ints, dtype=np.float64))
    return Column(name, Continuous(), np.array(parse_all(float)))


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.column_names)
        cols = [c.values for c in dataset.columns]
        for r in range(dataset.row_count):
            writer.writerow(
                [int(v[r]) if v.dtype == np.int32 else repr(float(v[r])) for v in cols]
            )


# ---------------------------------------------------------------------------
# test statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    statistic: float
    dof: int
    p_value: float


def _categorical_codes(d: Dataset, name: str) -> tuple[np.ndarray, int]:
    col = d.column(name)
    if not isinstance(col.schema, Categorical):
        raise TestInputError(f"column {name!r} is not categorical")
    return col.values, col.schema.cardinality


def _g2_raw(d: Dataset, i: str, j: str, s) -> tuple[float, int, int]:
    """(statistic, dof, min per-config sample count) for a G-squared query."""
    xi, ki = _categorical_codes(d, i)
    xj, kj = _categorical_codes(d, j)
    s_sorted = sorted(s)
    s_cols_list = []
    s_dims_list = []
    for name in s_sorted:
        codes, k = _categorical_codes(d, name)
        s_cols_list.append(codes)
        s_dims_list.append(k)
    dof = (ki - 1) * (kj - 1) * math.prod(s_dims_list)
    if dof <= 0:
        raise TestInputError(f"test ({i}, {j} | {s_sorted}) has dof {dof} <= 0")
    cells = ki * kj * math.prod(s_dims_list)
    if cells > MAX_CONTINGENCY_CELLS:
        raise TestInputError(f"contingency table too large ({cells} cells)")
    s_cols = (
        np.ascontiguousarray(np.vstack(s_cols_list))
        if s_cols_list
        else np.empty((0, len(xi)), dtype=np.int32)
    )
    stat, min_total = _kernels.g2_statistic(
        xi, xj, s_cols, ki, kj, np.array(s_dims_list, dtype=np.int64)
    )
    return stat, dof, min_total


def g2_test(d: Dataset, i: str, j: str, s: set[str] | frozenset[str] = frozenset()) -> TestResult:
    """Conditional G-squared test of i vs j within each configuration of s.

    statistic = 2 * sum O * ln(O / E) with E the independence expectation
    inside each conditioning configuration; dof = (|i|-1)(|j|-1) * prod |s_k|.
    """
    _validate_query(i, j, s)
    stat, dof, _ = _g2_raw(d, i, j, s)
    return TestResult(stat, dof, float(stats.chi2.sf(stat, dof)))


def fisher_z_test(
    d: Dataset, i: str, j: str, s: set[str] | frozenset[str] = frozenset()
) -> TestResult:
    """Partial-correlation independence test for continuous columns.

    The partial correlation of (i, j) given s comes from inverting the
    correlation matrix of the involved columns; the statistic is the
    absolute Fisher z-transform scaled by sqrt(n - |s| - 3), with a
    two-sided normal p-value.
    """
    _validate_query(i, j, s)
    names = [i, j, *sorted(s)]
    arrays = []
    for name in names:
        col = d.column(name)
        if not isinstance(col.schema, Continuous):
            raise TestInputError(f"column {name!r} is not continuous")
        arrays.append(col.values)
    n = d.row_count
    if n <= len(s) + 3:
        raise TestInputError(f"need more than |s|+3 = {len(s) + 3} rows, have {n}")

    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.corrcoef(np.vstack(arrays))
    if not np.all(np.isfinite(corr)):
        raise DegenerateDataError("zero-variance column in correlation matrix")
    if len(s) == 0:
        r = corr[0, 1]
    else:
        if np.linalg.cond(corr) > 1e12:
            raise DegenerateDataError("singular correlation submatrix")
        try:
            precision = np.linalg.inv(corr)
        except np.linalg.LinAlgError:
            raise DegenerateDataError("singular correlation submatrix") from None
        denom = precision[0, 0] * precision[1, 1]
        if denom <= 0 or not np.isfinite(denom):
            raise DegenerateDataError("singular correlation submatrix")
        r = -precision[0, 1] / math.sqrt(denom)
    r = float(np.clip(r, -1.0, 1.0))
    scale = math.sqrt(n - len(s) - 3)
    z = scale * math.atanh(r) if abs(r) < 1.0 else math.inf
    statistic = abs(z)
    p = float(2.0 * stats.norm.sf(statistic)) if math.isfinite(statistic) else 0.0
    return TestResult(statistic, 1, p)


def _validate_query(i: str, j: str, s) -> None:
    if i == j:
        raise TestInputError("test variables must be distinct")
    if i in s or j in s:
        raise TestInputError("test variables may not appear in the condition set")


# ---------------------------------------------------------------------------
# independence sources
# ---------------------------------------------------------------------------


class IndependenceSource:
    """Deterministic, cached answers to "is i independent of j given s?".

    Answers are symmetric in (i, j); repeated queries hit the cache and
    return bit-identical results.  The first independence finding for a
    pair records its condition set in the sepset registry.
    """

    def __init__(self, trace=None):
        self._cache: dict[tuple[str, str, tuple[str, ...]], bool] = {}
        self.sepsets = SepsetRegistry()
        self.trace = trace
        self.test_evaluations = 0

    def variables(self) -> list[str]:
        raise NotImplementedError

    def is_independent(self, i: str, j: str, s: set[str] | frozenset[str] = frozenset()) -> bool:
        _validate_query(i, j, s)
        a, b = (i, j) if i < j else (j, i)
        key = (a, b, tuple(sorted(s)))
        if key in self._cache:
            return self._cache[key]
        independent, info = self._decide(a, b, frozenset(s))
        self._cache[key] = independent
        self.test_evaluations += 1
        if independent:
            self.sepsets.record(a, b, frozenset(s))
        if self.trace is not None:
            self.trace.emit(
                {
                    "event": "ci_test",
                    "x": a,
                    "y": b,
                    "s": sorted(s),
                    "independent": independent,
                    **info,
                }
            )
        return independent

    def _decide(self, i: str, j: str, s: frozenset[str]) -> tuple[bool, dict]:
        raise NotImplementedError


class OracleIndependenceSource(IndependenceSource):
    """Faithful-limit answers read off a known DAG via d-separation."""

    def __init__(self, dag: MixedGraph, trace=None):
        super().__init__(trace)
        self.dag = dag

    def variables(self) -> list[str]:
        return self.dag.node_ids

    def _decide(self, i, j, s):
        return d_separated(self.dag, i, j, s), {"backend": "oracle"}


class DataIndependenceSource(IndependenceSource):
    """Statistical decisions on a dataset at significance level alpha.

    G-squared tests carry a reliability guard: when any conditioning
    configuration holds fewer than 5 * |i||j| samples the test is skipped
    and the pair is kept dependent, the conservative failure mode.
    """

    def __init__(self, dataset: Dataset, test: str = "g2", alpha: float = 0.01, trace=None):
        super().__init__(trace)
        if not 0.0 < alpha < 1.0:
            raise TestInputError(f"alpha must be in (0, 1), got {alpha}")
        if test not in ("g2", "fisher_z"):
            raise TestInputError(f"unknown test kind {test!r}")
        self.dataset = dataset
        self.test = test
        self.alpha = alpha

    def variables(self) -> list[str]:
        return list(self.dataset.column_names)

    def _decide(self, i, j, s):
        if self.test == "g2":
            return self._decide_g2(i, j, s)
        result = fisher_z_test(self.dataset, i, j, s)
        return result.p_value > self.alpha, {
            "backend": "fisher_z",
            "statistic": result.statistic,
            "dof": result.dof,
            "p_value": result.p_value,
        }

    def _decide_g2(self, i, j, s):
        _, ki = _categorical_codes(self.dataset, i)
        _, kj = _categorical_codes(self.dataset, j)
        cfg_size = 1
        for name in s:
            cfg_size *= _categorical_codes(self.dataset, name)[1]
        threshold = 5 * ki * kj
        # pigeonhole: mean per-config count already below the guard
        if self.dataset.row_count < threshold * cfg_size:
            return False, {"backend": "g2", "skipped": "insufficient samples per config"}
        stat, dof, min_total = _g2_raw(self.dataset, i, j, s)
        if min_total < threshold:
            return False, {"backend": "g2", "skipped": "insufficient samples per config"}
        p = float(stats.chi2.sf(stat, dof))
        return p > self.alpha, {
            "backend": "g2",
            "statistic": stat,
            "dof": dof,
            "p_value": p,
        }


def is_independent(src: IndependenceSource, i: str, j: str, s=frozenset()) -> bool:
    return src.is_independent(i, j, s)
