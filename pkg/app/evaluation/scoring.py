"""Proportion-of-modelled-CQ scores and inter-rater agreement."""

import csv
from collections import Counter
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field

from app.core.errors import EmptyInput, LengthMismatch, MissingFile
from app.evaluation.coverage import CqVerdict, VerdictStatus
from app.models.common import CqCategory

DEFAULT_POSITIVE_LABEL = "yes"


class CategoryScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    strict: float
    relaxed: float


class Scores(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    modelled: int
    minor: int
    strict: float
    relaxed: float
    per_category: Dict[CqCategory, CategoryScore] = Field(default_factory=dict)


def _proportions(verdicts: Sequence[CqVerdict]) -> Tuple[int, int, float, float]:
    modelled = sum(v.status is VerdictStatus.MODELLED for v in verdicts)
    minor = sum(v.status is VerdictStatus.MINOR_ISSUE for v in verdicts)
    n = len(verdicts)
    return modelled, minor, modelled / n, (modelled + minor) / n


def score(verdicts: Sequence[CqVerdict], categories: Optional[Mapping[str, CqCategory]] = None) -> Scores:
    """Strict counts only Modelled CQs; relaxed also counts minor issues."""
    if not verdicts:
        raise EmptyInput("no verdicts to score")
    modelled, minor, strict, relaxed = _proportions(verdicts)

    per_category: Dict[CqCategory, CategoryScore] = {}
    categories = categories or {}
    for category in CqCategory:
        subset = [v for v in verdicts if categories.get(v.cq_id) is category]
        if subset:
            _, _, cat_strict, cat_relaxed = _proportions(subset)
            per_category[category] = CategoryScore(n=len(subset), strict=cat_strict, relaxed=cat_relaxed)
    return Scores(
        n=len(verdicts),
        modelled=modelled,
        minor=minor,
        strict=strict,
        relaxed=relaxed,
        per_category=per_category,
    )


def cohens_kappa(a: Sequence[str], b: Sequence[str]) -> float:
    """Cohen's kappa for two raters over the same items.

    Computed with exact fractions, so the value does not depend on label names
    or their order.
    """
    if len(a) != len(b):
        raise LengthMismatch(f"rater label lists differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise EmptyInput("no rated items")
    n = len(a)
    observed = Fraction(sum(x == y for x, y in zip(a, b)), n)
    count_a, count_b = Counter(a), Counter(b)
    expected = sum((Fraction(count_a[label], n) * Fraction(count_b[label], n) for label in count_a), Fraction(0))
    if expected == 1:
        return 1.0 if observed == 1 else 0.0
    return float((observed - expected) / (1 - expected))


def adequacy(labels: Sequence[str], positive: str = DEFAULT_POSITIVE_LABEL) -> float:
    """Share of items a rater judged adequate; any other label counts as not adequate."""
    if not labels:
        raise EmptyInput("no rated items")
    wanted = positive.strip().lower()
    return sum(label.strip().lower() == wanted for label in labels) / len(labels)


class Agreement(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    kappa: float
    adequacy_a: float
    adequacy_b: float

    @property
    def mean_adequacy(self) -> float:
        return (self.adequacy_a + self.adequacy_b) / 2


def read_ratings(path: Path) -> Tuple[List[str], List[str]]:
    """Two label columns from a CSV whose first row is a header."""
    if not path.is_file():
        raise MissingFile(path)
    with path.open(newline="", encoding="utf-8") as handle:
        rows = [row for row in csv.reader(handle) if any(cell.strip() for cell in row)]
    body = rows[1:]
    if not body:
        raise EmptyInput(f"{path} has no rated items")
    if any(len(row) != 2 for row in body):
        raise LengthMismatch(f"{path}: every row needs exactly two labels")
    return [row[0].strip() for row in body], [row[1].strip() for row in body]


def agreement(a: Sequence[str], b: Sequence[str], positive: str = DEFAULT_POSITIVE_LABEL) -> Agreement:
    return Agreement(
        n=len(a),
        kappa=cohens_kappa(a, b),
        adequacy_a=adequacy(a, positive),
        adequacy_b=adequacy(b, positive),
    )


__all__ = [
    "Agreement",
    "CategoryScore",
    "Scores",
    "adequacy",
    "agreement",
    "cohens_kappa",
    "read_ratings",
    "score",
]
