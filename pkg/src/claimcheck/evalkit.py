"""Dataset ingestion, confusion tallies, and P/R/F1 reporting.

Loader input formats (JSON array or JSONL, one object per record):

* ``factool_kbqa``: ``{"claim": str, "label": bool | "True" | "False"}``.
  All records are kept with labels unchanged.
* ``bingcheck``: ``{"claim": str, "label": "supported" | "refuted" |
  "partially supported" | "not supported"}``.  supported maps to True,
  refuted to False, everything else is dropped; the supported class is
  subsampled to a configured count with a seeded deterministic sampler.
* ``factcheck_bench``: ``{"claim": str, "label": "True" | "False" |
  "Unknown"}``.  Unknown records are dropped; each class is subsampled to
  a configured count with a seeded sampler.

Records may carry an optional ``"id"`` field; otherwise ids are assigned
from the record position.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .model import Claim, Verdict


class DatasetKind(Enum):
    FACTOOL_KBQA = "factool_kbqa"
    BINGCHECK = "bingcheck"
    FACTCHECK_BENCH = "factcheck_bench"


# per-class (True, False) target sizes after preprocessing
DATASET_TARGETS: dict[DatasetKind, tuple[int | None, int | None]] = {
    DatasetKind.FACTOOL_KBQA: (None, None),       # keep everything
    DatasetKind.BINGCHECK: (160, None),           # subsample supported only
    DatasetKind.FACTCHECK_BENCH: (472, 159),      # sample 631 in total
}


class SchemaError(Exception):
    """A record is missing a required field or has an unusable value."""


class EmptyDataset(Exception):
    """The file parsed but produced no usable claims."""


class LengthMismatch(Exception):
    """Prediction and gold vectors differ in length."""


@dataclass(frozen=True)
class LabeledClaim:
    claim: Claim
    gold: Verdict
    dataset: DatasetKind


def _read_records(path: str | Path) -> list[dict]:
    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        raise EmptyDataset(f"{path} is empty")
    if text.startswith("["):
        data = json.loads(text)
        if not isinstance(data, list):
            raise SchemaError(f"{path}: top-level JSON must be an array")
        records = data
    else:
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
    for i, rec in enumerate(records):
        if not isinstance(rec, dict):
            raise SchemaError(f"{path}: record {i} is not an object")
    return records


def _require(rec: dict, field: str, index: int) -> object:
    if field not in rec:
        raise SchemaError(f"record {index} missing field {field!r}")
    return rec[field]


def _subsample(indices: list[int], target: int | None, rng: random.Random) -> list[int]:
    """Seeded subsample preserving original file order."""
    if target is None or len(indices) <= target:
        return indices
    return sorted(rng.sample(indices, target))


def load_dataset(kind: DatasetKind, path: str | Path, seed: int = 0) -> list[LabeledClaim]:
    records = _read_records(path)
    rng = random.Random(seed)
    labeled: list[tuple[int, str, Verdict]] = []  # (index, text, gold)

    for i, rec in enumerate(records):
        text = str(_require(rec, "claim", i)).strip()
        if not text:
            raise SchemaError(f"record {i} has an empty claim")
        raw_label = _require(rec, "label", i)
        gold = _map_label(kind, raw_label, i)
        if gold is None:
            continue
        labeled.append((i, text, gold))

    true_target, false_target = DATASET_TARGETS[kind]
    true_idx = [j for j, (_, _, g) in enumerate(labeled) if g is Verdict.TRUE]
    false_idx = [j for j, (_, _, g) in enumerate(labeled) if g is Verdict.FALSE]
    keep = set(_subsample(true_idx, true_target, rng))
    keep |= set(_subsample(false_idx, false_target, rng))

    out: list[LabeledClaim] = []
    for j, (i, text, gold) in enumerate(labeled):
        if j not in keep:
            continue
        claim_id = str(records[i].get("id", f"{kind.value}-{i:04d}"))
        out.append(LabeledClaim(Claim(text=text, id=claim_id), gold, kind))
    if not out:
        raise EmptyDataset(f"{path} yielded no claims after preprocessing")
    return out


def _map_label(kind: DatasetKind, raw: object, index: int) -> Verdict | None:
    if kind is DatasetKind.FACTOOL_KBQA:
        if isinstance(raw, bool):
            return Verdict.TRUE if raw else Verdict.FALSE
        if str(raw).strip().lower() in ("true", "false"):
            return Verdict.TRUE if str(raw).strip().lower() == "true" else Verdict.FALSE
        raise SchemaError(f"record {index}: bad FacTool-KBQA label {raw!r}")
    if kind is DatasetKind.BINGCHECK:
        label = str(raw).strip().lower()
        if label == "supported":
            return Verdict.TRUE
        if label == "refuted":
            return Verdict.FALSE
        if label in ("partially supported", "not supported"):
            return None
        raise SchemaError(f"record {index}: bad BingCheck label {raw!r}")
    label = str(raw).strip().lower()
    if label == "unknown":
        return None
    if label in ("true", "false"):
        return Verdict.TRUE if label == "true" else Verdict.FALSE
    raise SchemaError(f"record {index}: bad Factcheck-Bench label {raw!r}")


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class ConfusionCounts:
    tp: dict[Verdict, int]
    fp: dict[Verdict, int]
    fn: dict[Verdict, int]

    def support(self, cls: Verdict) -> int:
        return self.tp[cls] + self.fn[cls]


def confusion(preds: Sequence[Verdict], golds: Sequence[Verdict]) -> ConfusionCounts:
    if len(preds) != len(golds):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(golds)} golds")
    if not preds:
        raise LengthMismatch("empty prediction vector")
    tp = {v: 0 for v in Verdict}
    fp = {v: 0 for v in Verdict}
    fn = {v: 0 for v in Verdict}
    for p, g in zip(preds, golds):
        if p is g:
            tp[p] += 1
        else:
            fp[p] += 1
            fn[g] += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn)


def prf1(counts: ConfusionCounts, cls: Verdict) -> tuple[float, float, float]:
    """Precision, recall, F1 for one class; zero denominators yield 0."""
    tp, fp, fn = counts.tp[cls], counts.fp[cls], counts.fn[cls]
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class MetricReport:
    precision: dict[Verdict, float]
    recall: dict[Verdict, float]
    f1: dict[Verdict, float]
    support: dict[Verdict, int]
    macro_f1: float
    weighted_f1: float

    def to_dict(self) -> dict:
        return {
            "per_class": {
                v.value: {
                    "precision": self.precision[v],
                    "recall": self.recall[v],
                    "f1": self.f1[v],
                    "support": self.support[v],
                }
                for v in Verdict
            },
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
        }


def report(counts: ConfusionCounts) -> MetricReport:
    precision, recall, f1 = {}, {}, {}
    for v in Verdict:
        precision[v], recall[v], f1[v] = prf1(counts, v)
    support = {v: counts.support(v) for v in Verdict}
    macro = (f1[Verdict.TRUE] + f1[Verdict.FALSE]) / 2
    total = support[Verdict.TRUE] + support[Verdict.FALSE]
    weighted = (
        (support[Verdict.TRUE] * f1[Verdict.TRUE]
         + support[Verdict.FALSE] * f1[Verdict.FALSE]) / total
        if total
        else 0.0
    )
    return MetricReport(precision=precision, recall=recall, f1=f1,
                        support=support, macro_f1=macro, weighted_f1=weighted)


def round_display(value: float) -> str:
    """Half-up to two decimals, trailing zeros trimmed ('0.80' -> '0.8')."""
    quantized = Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    text = str(quantized.normalize())
    return "0" if text in ("0", "-0") else text


def render_table(rows: dict[str, MetricReport]) -> str:
    """Aligned plain-text table: per-class P/R/F1, then macro and weighted F1."""
    header = ["run", "P(True)", "R(True)", "F1(True)",
              "P(False)", "R(False)", "F1(False)", "M-F1", "W-F1"]
    lines = [header]
    for name, rep in rows.items():
        lines.append([
            name,
            round_display(rep.precision[Verdict.TRUE]),
            round_display(rep.recall[Verdict.TRUE]),
            round_display(rep.f1[Verdict.TRUE]),
            round_display(rep.precision[Verdict.FALSE]),
            round_display(rep.recall[Verdict.FALSE]),
            round_display(rep.f1[Verdict.FALSE]),
            round_display(rep.macro_f1),
            round_display(rep.weighted_f1),
        ])
    widths = [max(len(row[i]) for row in lines) for i in range(len(header))]
    rendered = []
    for row in lines:
        rendered.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(rendered)
