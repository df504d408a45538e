"""Ranked-retrieval evaluation: binary-relevance metrics and reports.

Covers the per-query metric suite (P@K, AP@K, NDCG@K, MRR), category
filtering, aggregation with zero-relevant exclusion, cumulative
coverage curves, relative-performance-reduction summaries, and a
cosine-distance silhouette score.

Conventions baked in here:

* AP@K normalizes by min(R, K) (truncated average precision).
* NDCG uses binary gains, DCG = sum rel_i / log2(i + 1), and an ideal
  list of min(R, K) ones.
* Queries with no relevant file in the evaluated universe (R = 0) are
  excluded from means and reported separately instead of contributing
  silent zeros.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .ingest import QUERY_CATEGORIES, QuerySpec, RelevanceLabels, normalize_name
from .retrieval import RankedList

DEFAULT_KS = (1, 3, 5, 10)
DEFAULT_CATEGORIES = frozenset({"AVP", "AoP"})


@dataclass(frozen=True)
class QueryMetrics:
    """Metric values for one evaluated query."""

    query_id: str
    person: str
    category: str
    r: int
    p: dict[int, float]
    ap: dict[int, float]
    ndcg: dict[int, float]
    mrr: float


@dataclass(frozen=True)
class MetricsReport:
    """Per-query metrics plus means over the R>0 subset."""

    ks: tuple[int, ...]
    categories: tuple[str, ...]
    per_query: tuple[QueryMetrics, ...]
    n_queries: int
    n_evaluated: int
    n_zero_relevant: int
    mean_p: dict[int, float]
    mean_ap: dict[int, float]
    mean_ndcg: dict[int, float]
    mean_mrr: float

    def to_json_obj(self) -> dict:
        def by_k(values: Mapping[int, float]) -> dict[str, float]:
            # zero-relevant queries carry empty metric dicts
            return {str(k): values[k] for k in self.ks if k in values}

        return {
            "ks": list(self.ks),
            "categories": list(self.categories),
            "n_queries": self.n_queries,
            "n_evaluated": self.n_evaluated,
            "n_zero_relevant": self.n_zero_relevant,
            "means": {
                "p": by_k(self.mean_p),
                "ap": by_k(self.mean_ap),
                "ndcg": by_k(self.mean_ndcg),
                "mrr": self.mean_mrr,
            },
            "per_query": [
                {
                    "query_id": q.query_id,
                    "person": q.person,
                    "category": q.category,
                    "r": q.r,
                    "p": by_k(q.p),
                    "ap": by_k(q.ap),
                    "ndcg": by_k(q.ndcg),
                    "mrr": q.mrr,
                }
                for q in self.per_query
            ],
        }

    def format_table(self) -> str:
        """Aligned plain-text summary, values scaled to percentages."""
        rows: list[tuple[str, float]] = []
        for k in self.ks:
            rows.append((f"P@{k}", self.mean_p[k]))
        for k in self.ks:
            rows.append((f"MAP@{k}", self.mean_ap[k]))
        for k in self.ks:
            rows.append((f"NDCG@{k}", self.mean_ndcg[k]))
        rows.append(("MRR", self.mean_mrr))
        width = max(len(name) for name, _ in rows)
        lines = [f"{name.ljust(width)}  {100.0 * value:6.1f}" for name, value in rows]
        lines.append(
            f"queries: {self.n_evaluated} evaluated"
            f" / {self.n_zero_relevant} without relevant files"
            f" / {self.n_queries} total"
        )
        return "\n".join(lines)


@dataclass(frozen=True)
class CurvePoint:
    """One prefix of the coverage curve: means over the top-n queries."""

    coverage_pct: float
    p: dict[int, float]
    avg: float


@dataclass(frozen=True)
class RprReport:
    """Per-K relative change in percent, and the mean over usable Ks."""

    per_k: dict[int, float | None]
    avg_rpr: float
    skipped_ks: tuple[int, ...]


def relevance_vector(
    person: str,
    ranked: RankedList,
    labels: RelevanceLabels,
    archive_file_ids: Iterable[str],
) -> tuple[list[int], int]:
    """Binary relevance of each ranked entry, and R over the archive.

    A file is relevant when the normalized query person appears in its
    label set. R counts relevant files over the whole archive minus the
    ranking's excluded files, so truncated lists still know how many
    hits were possible.
    """
    if not ranked.entries:
        raise ValidationError("ranked list is empty")
    norm = normalize_name(person)
    rel = [1 if labels.contains(file_id, norm) else 0 for file_id in ranked.file_ids()]
    r = sum(
        1
        for file_id in archive_file_ids
        if file_id not in ranked.excluded and labels.contains(file_id, norm)
    )
    return rel, r


def precision_at_k(rel: Sequence[int], k: int) -> float:
    """Fraction of the top K that is relevant; short lists pad with 0."""
    if k < 1:
        raise ValidationError(f"K must be >= 1, got {k}")
    return sum(rel[:k]) / k


def average_precision_at_k(rel: Sequence[int], r: int, k: int) -> float:
    """Truncated average precision with normalizer min(R, K)."""
    if k < 1:
        raise ValidationError(f"K must be >= 1, got {k}")
    if r < 1:
        raise ValidationError("AP@K is undefined for queries with no relevant file")
    hits = 0
    total = 0.0
    for i, flag in enumerate(rel[:k], start=1):
        if flag:
            hits += 1
            total += hits / i
    return total / min(r, k)


def ndcg_at_k(rel: Sequence[int], r: int, k: int) -> float:
    """Binary NDCG with log2(i+1) discounts and a min(R, K)-long ideal."""
    if k < 1:
        raise ValidationError(f"K must be >= 1, got {k}")
    if r < 1:
        raise ValidationError("NDCG@K is undefined for queries with no relevant file")
    dcg = sum(flag / math.log2(i + 1) for i, flag in enumerate(rel[:k], start=1))
    idcg = sum(1.0 / math.log2(i + 1) for i in range(1, min(r, k) + 1))
    return dcg / idcg


def mrr(rel: Sequence[int]) -> float:
    """Reciprocal rank of the first relevant entry; 0 when none appear."""
    for i, flag in enumerate(rel, start=1):
        if flag:
            return 1.0 / i
    return 0.0


def evaluate_query(
    query: QuerySpec,
    ranked: RankedList,
    labels: RelevanceLabels,
    archive_file_ids: Sequence[str],
    ks: Sequence[int] = DEFAULT_KS,
) -> QueryMetrics:
    """All metrics for one query. R = 0 yields empty metric dicts."""
    rel, r = relevance_vector(query.person, ranked, labels, archive_file_ids)
    if r == 0:
        return QueryMetrics(
            query_id=query.query_id,
            person=query.person,
            category=query.category,
            r=0,
            p={},
            ap={},
            ndcg={},
            mrr=0.0,
        )
    return QueryMetrics(
        query_id=query.query_id,
        person=query.person,
        category=query.category,
        r=r,
        p={k: precision_at_k(rel, k) for k in ks},
        ap={k: average_precision_at_k(rel, r, k) for k in ks},
        ndcg={k: ndcg_at_k(rel, r, k) for k in ks},
        mrr=mrr(rel),
    )


def aggregate(
    queries: Sequence[QuerySpec],
    ranked_lists: Mapping[str, RankedList],
    labels: RelevanceLabels,
    archive_file_ids: Sequence[str],
    categories: Iterable[str] = DEFAULT_CATEGORIES,
    ks: Sequence[int] = DEFAULT_KS,
) -> MetricsReport:
    """Mean metrics over a category-filtered query set."""
    ks = tuple(ks)
    if not ks or any(k < 1 for k in ks):
        raise ValidationError("K grid must be non-empty positive integers")
    category_set = set(categories)
    unknown = category_set.difference(QUERY_CATEGORIES)
    if unknown:
        raise ValidationError(f"unknown categories: {sorted(unknown)}")
    selected = [q for q in queries if q.category in category_set]
    if not selected:
        raise ValidationError("category filter selects no queries")
    per_query: list[QueryMetrics] = []
    for query in selected:
        if query.query_id not in ranked_lists:
            raise ValidationError(f"query {query.query_id!r} has no ranked list")
        per_query.append(
            evaluate_query(
                query, ranked_lists[query.query_id], labels, archive_file_ids, ks
            )
        )
    evaluated = [q for q in per_query if q.r > 0]
    if not evaluated:
        raise ValidationError("no filtered query has a relevant file in the archive")
    n = len(evaluated)
    return MetricsReport(
        ks=ks,
        categories=tuple(sorted(category_set)),
        per_query=tuple(per_query),
        n_queries=len(selected),
        n_evaluated=n,
        n_zero_relevant=len(selected) - n,
        mean_p={k: sum(q.p[k] for q in evaluated) / n for k in ks},
        mean_ap={k: sum(q.ap[k] for q in evaluated) / n for k in ks},
        mean_ndcg={k: sum(q.ndcg[k] for q in evaluated) / n for k in ks},
        mean_mrr=sum(q.mrr for q in evaluated) / n,
    )


def cumulative_curve(
    per_query_p: Mapping[str, Mapping[int, float]],
    ks: Sequence[int] = DEFAULT_KS,
) -> list[CurvePoint]:
    """Coverage curve: queries sorted by avg P@K descending, prefix means.

    Point n averages each P@K column over the best n queries; the avg
    column (prefix mean of a descending sequence) is non-increasing.
    Ties in per-query average break by query_id ascending so the curve
    is deterministic.
    """
    ks = tuple(ks)
    if not per_query_p:
        raise ValidationError("cumulative curve needs at least one query")
    rows = []
    for query_id, p_values in per_query_p.items():
        missing = [k for k in ks if k not in p_values]
        if missing:
            raise ValidationError(
                f"query {query_id!r} is missing P@K for K in {missing}"
            )
        avg = sum(p_values[k] for k in ks) / len(ks)
        rows.append((query_id, {k: float(p_values[k]) for k in ks}, avg))
    rows.sort(key=lambda row: (-row[2], row[0]))
    points: list[CurvePoint] = []
    sums = {k: 0.0 for k in ks}
    avg_sum = 0.0
    total = len(rows)
    for n, (_, p_values, avg) in enumerate(rows, start=1):
        for k in ks:
            sums[k] += p_values[k]
        avg_sum += avg
        points.append(
            CurvePoint(
                coverage_pct=100.0 * n / total,
                p={k: sums[k] / n for k in ks},
                avg=avg_sum / n,
            )
        )
    return points


def write_curve_csv(points: Sequence[CurvePoint], stream: IO[str]) -> None:
    """CSV rows `coverage_pct,p1,p3,p5,p10,avg` (one per prefix)."""
    if not points:
        raise ValidationError("empty curve")
    ks = sorted(points[0].p)
    header = "coverage_pct," + ",".join(f"p{k}" for k in ks) + ",avg"
    stream.write(header + "\n")
    for point in points:
        cells = [f"{point.coverage_pct:.6g}"]
        cells += [f"{point.p[k]:.6g}" for k in ks]
        cells.append(f"{point.avg:.6g}")
        stream.write(",".join(cells) + "\n")


def avg_rpr(
    baseline: Mapping[int, float],
    distorted: Mapping[int, float],
    ks: Sequence[int] = DEFAULT_KS,
) -> RprReport:
    """Mean relative change in percent over the K grid.

    Per K the change is 100 * (distorted - baseline) / baseline; Ks with
    a zero baseline are undefined, left out of the mean and flagged.
    """
    ks = tuple(ks)
    for name, values in (("baseline", baseline), ("distorted", distorted)):
        missing = [k for k in ks if k not in values]
        if missing:
            raise ValidationError(f"{name} is missing values for K in {missing}")
    per_k: dict[int, float | None] = {}
    usable: list[float] = []
    skipped: list[int] = []
    for k in ks:
        if baseline[k] == 0:
            per_k[k] = None
            skipped.append(k)
            continue
        change = 100.0 * (distorted[k] - baseline[k]) / baseline[k]
        per_k[k] = change
        usable.append(change)
    if not usable:
        raise ValidationError("all baseline values are zero; AvgRPR undefined")
    return RprReport(
        per_k=per_k,
        avg_rpr=sum(usable) / len(usable),
        skipped_ks=tuple(skipped),
    )


def rpr_to_json_obj(report: RprReport) -> dict:
    return {
        "per_k": {str(k): report.per_k[k] for k in sorted(report.per_k)},
        "avg_rpr": report.avg_rpr,
        "skipped_ks": list(report.skipped_ks),
    }


def silhouette_cosine(vectors: np.ndarray, class_labels: Sequence[str]) -> float:
    """Mean silhouette score under cosine distance (1 - cosine similarity).

    Per sample: a = mean distance to its own class (excluding itself),
    b = smallest mean distance to any other class, score = (b - a) /
    max(a, b). Samples in singleton classes score 0 by convention.

    >>> import numpy as np
    >>> x = np.array([[1.0, 0.0], [1.0, 0.01], [0.0, 1.0], [0.01, 1.0]])
    >>> silhouette_cosine(x, ["a", "a", "b", "b"]) > 0.9
    True
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise ValidationError("vectors must be a 2-D array")
    n = vectors.shape[0]
    if n != len(class_labels):
        raise ValidationError("one class label per vector required")
    class_names = sorted(set(class_labels))
    if len(class_names) < 2:
        raise ValidationError("silhouette needs at least 2 classes")
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0.0):
        raise ValidationError("cosine similarity of a zero vector is undefined")
    unit = vectors / norms[:, None]
    distances = 1.0 - np.clip(unit @ unit.T, -1.0, 1.0)
    col = {name: i for i, name in enumerate(class_names)}
    onehot = np.zeros((n, len(class_names)), dtype=np.float64)
    for i, label in enumerate(class_labels):
        onehot[i, col[label]] = 1.0
    counts = onehot.sum(axis=0)
    class_sums = distances @ onehot
    scores = np.zeros(n, dtype=np.float64)
    for i, label in enumerate(class_labels):
        own = col[label]
        if counts[own] == 1:
            continue
        a = class_sums[i, own] / (counts[own] - 1)
        other_means = [
            class_sums[i, j] / counts[j] for j in range(len(class_names)) if j != own
        ]
        b = min(other_means)
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())
