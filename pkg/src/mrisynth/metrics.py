"""Brain-age evaluation statistics.

Absolute-error summaries use the population std within a test set and
the sample std (n-1) across test sets; that split is deliberate and
matches how the aggregate columns were reverse-engineered.  The Pearson
p-value goes through our own regularized incomplete beta so the package
does not need a stats library at runtime.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataDomainError, FormatError, UsageError


@dataclass(frozen=True)
class PredictionRecord:
    subject_id: str
    y_true: float
    y_pred: float
    score: float | None = None

    def __post_init__(self):
        if not self.y_true > 0:
            raise DataDomainError(f"{self.subject_id}: y_true must be > 0, got {self.y_true}")
        if not math.isfinite(self.y_pred):
            raise DataDomainError(f"{self.subject_id}: y_pred is not finite")
        if self.score is not None and not math.isfinite(self.score):
            raise DataDomainError(f"{self.subject_id}: score is not finite")


@dataclass(frozen=True)
class TestSetResult:
    __test__ = False  # keep pytest from collecting this as a test class

    name: str
    mae: float
    mae_std: float
    n: int

    def __post_init__(self):
        if self.mae < 0 or self.mae_std < 0 or self.n < 1:
            raise UsageError(f"invalid test-set result {self}")


@dataclass(frozen=True)
class AggregateResult:
    avg_mae: float
    across_set_std: float
    n_sets: int
    degenerate: bool  # single set: the std is 0 by fiat, not evidence


# ---------------------------------------------------------------------------
# Core statistics
# ---------------------------------------------------------------------------

def brain_pad(record: PredictionRecord) -> float:
    """Signed predicted-age difference, y_pred - y_true."""
    return record.y_pred - record.y_true


def mae(records) -> tuple[float, float]:
    """Mean and population std of absolute errors."""
    records = list(records)
    if not records:
        raise UsageError("mae needs at least one record")
    errors = np.array([abs(r.y_pred - r.y_true) for r in records], dtype=np.float64)
    return float(errors.mean()), float(errors.std(ddof=0))


def pearson(records) -> tuple[float, float]:
    """Pearson r between brain PAD and score, with two-sided p.

    p comes from t = r*sqrt((n-2)/(1-r^2)) against Student-t with n-2
    degrees of freedom; |r| = 1 collapses to p = 0.
    """
    records = list(records)
    if len(records) < 3:
        raise UsageError(f"pearson needs >= 3 records, got {len(records)}")
    if any(r.score is None for r in records):
        raise UsageError("pearson needs a score on every record")
    x = np.array([brain_pad(r) for r in records], dtype=np.float64)
    y = np.array([r.score for r in records], dtype=np.float64)
    x = x - x.mean()
    y = y - y.mean()
    sxx = float(x @ x)
    syy = float(y @ y)
    if sxx == 0.0 or syy == 0.0:
        raise DataDomainError("correlation undefined: zero variance")
    r = float((x @ y) / math.sqrt(sxx * syy))
    r = max(-1.0, min(1.0, r))
    n = len(records)
    if 1.0 - r * r <= 0.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    df = n - 2
    p = betainc_reg(df / 2.0, 0.5, df / (df + t * t))
    return r, p


def aggregate(results, subset=None) -> AggregateResult:
    """Mean and sample std of per-set MAEs over the named subset."""
    results = list(results)
    if subset is None:
        chosen = results
    else:
        subset = list(subset)
        if not subset:
            raise UsageError("subset must be non-empty")
        by_name = {r.name: r for r in results}
        missing = [name for name in subset if name not in by_name]
        if missing:
            raise UsageError(f"unknown test set names {missing}")
        chosen = [by_name[name] for name in subset]
    if not chosen:
        raise UsageError("aggregate needs at least one test set")
    maes = np.array([r.mae for r in chosen], dtype=np.float64)
    if len(maes) == 1:
        return AggregateResult(float(maes[0]), 0.0, 1, degenerate=True)
    return AggregateResult(float(maes.mean()), float(maes.std(ddof=1)),
                           len(maes), degenerate=False)


def summarize(name: str, records) -> TestSetResult:
    records = list(records)
    m, s = mae(records)
    return TestSetResult(name, m, s, len(records))


# ---------------------------------------------------------------------------
# Regularized incomplete beta (for the Student-t tail)
# ---------------------------------------------------------------------------

def betainc_reg(a: float, b: float, x: float) -> float:
    """I_x(a, b) by continued fraction, accurate to ~1e-14 for a, b > 0."""
    if not (a > 0 and b > 0):
        raise UsageError(f"betainc_reg needs a, b > 0, got ({a}, {b})")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued-fraction kernel (modified Lentz iteration)."""
    max_iter = 300
    eps = 1e-15
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        numer = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + numer * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numer / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        numer = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + numer * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numer / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta failed to converge for ({a}, {b}, {x})")


# ---------------------------------------------------------------------------
# CSV input
# ---------------------------------------------------------------------------

REQUIRED_COLUMNS = ("subject_id", "y_true", "y_pred")


def read_predictions(path, score_col: str = "score",
                     set_col: str | None = None) -> dict[str, list[PredictionRecord]]:
    """Read a predictions CSV, grouped by `set_col` (one group "all" if None).

    Expected header: subject_id,y_true,y_pred with optional score and
    set-name columns.
    """
    path = Path(path)
    try:
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            fields = reader.fieldnames or []
            missing = [c for c in REQUIRED_COLUMNS if c not in fields]
            if missing:
                raise FormatError(f"{path}: missing columns {missing}")
            if set_col is not None and set_col not in fields:
                raise FormatError(f"{path}: missing set column {set_col!r}")
            groups: dict[str, list[PredictionRecord]] = {}
            for line_no, row in enumerate(reader, start=2):
                try:
                    score = None
                    if score_col in fields and row[score_col] not in (None, ""):
                        score = float(row[score_col])
                    record = PredictionRecord(
                        subject_id=row["subject_id"],
                        y_true=float(row["y_true"]),
                        y_pred=float(row["y_pred"]),
                        score=score)
                except (TypeError, ValueError) as exc:
                    raise FormatError(f"{path}:{line_no}: {exc}") from exc
                name = row[set_col] if set_col else "all"
                groups.setdefault(name, []).append(record)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if not groups:
        raise FormatError(f"{path}: no prediction rows")
    return groups
