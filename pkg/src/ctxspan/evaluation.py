"""Character-level IoU scoring, per-language aggregation, and threshold sweeps.

IoU is computed on character-index sets; when both prediction and gold are
empty the score is defined as 1.0 (perfect agreement). The headline average
is the unweighted mean over per-language means; a per-record micro average
is also reported.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import AnnotatedResponse
from .detector import (
    CsrSeries,
    DetectorConfig,
    assemble_spans,
    classify_tokens,
    compute_csr,
)
from .errors import DataError, ValidationError
from .retrieval import EvidenceSet
from .scoring import ScoringRequest, load_reference_logprobs, render_prompt, score_continuation
from .spans import CharSpanSet
from .util import FORMAT_VERSIONS, read_jsonl


def char_set(spans: CharSpanSet) -> set[int]:
    """The set of character indices covered by a span set."""
    return spans.char_indices()


def iou(pred: CharSpanSet, gold: CharSpanSet) -> float:
    """Intersection-over-union of predicted and gold character sets."""
    if pred.text_len != gold.text_len:
        raise ValidationError(
            f"text_len mismatch: pred {pred.text_len} vs gold {gold.text_len}"
        )
    pred_chars, gold_chars = char_set(pred), char_set(gold)
    if not pred_chars and not gold_chars:
        return 1.0
    union = pred_chars | gold_chars
    return len(pred_chars & gold_chars) / len(union)


@dataclass(frozen=True)
class EvalReport:
    per_language: dict[str, float]
    average: float
    n_records: dict[str, int]
    micro_average: float
    config: dict = field(default_factory=dict)
    label: str = "csr"

    def to_dict(self) -> dict:
        return {
            "format": f"report/{FORMAT_VERSIONS['report']}",
            "label": self.label,
            "per_language": dict(sorted(self.per_language.items())),
            "average": self.average,
            "micro_average": self.micro_average,
            "n_records": dict(sorted(self.n_records.items())),
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        """Lossless: stored values are trusted, nothing is recomputed."""
        return cls(
            per_language=dict(data["per_language"]),
            average=data["average"],
            n_records={k: int(v) for k, v in data.get("n_records", {}).items()},
            micro_average=data.get("micro_average", data["average"]),
            config=dict(data.get("config", {})),
            label=data.get("label", "csr"),
        )

    def to_table(self) -> str:
        width = max([len("lang"), len("average")] + [len(lang) for lang in self.per_language])
        lines = [f"{'lang':<{width}}  {'n':>5}  mean_iou"]
        for lang in sorted(self.per_language):
            lines.append(
                f"{lang:<{width}}  {self.n_records.get(lang, 0):>5}  "
                f"{self.per_language[lang]:.4f}"
            )
        total = sum(self.n_records.values())
        lines.append(f"{'average':<{width}}  {total:>5}  {self.average:.4f}")
        return "\n".join(lines)


def evaluate_dataset(
    predictions: dict[str, CharSpanSet],
    gold: list[AnnotatedResponse],
    config: dict | None = None,
    label: str = "csr",
) -> EvalReport:
    """Score predictions against gold records and aggregate per language.

    Every gold record must have a prediction; a missing id is an error, not
    an implicit empty span set, since empties score 1.0 against empty gold.
    """
    gold_ids = [rec.id for rec in gold]
    if len(set(gold_ids)) != len(gold_ids):
        raise DataError("duplicate record ids in gold dataset")
    missing = [rec.id for rec in gold if rec.id not in predictions]
    if missing:
        raise DataError(f"missing predictions for record ids: {missing}")

    by_lang: dict[str, list[float]] = {}
    for rec in gold:
        score = iou(predictions[rec.id], rec.gold_spans)
        by_lang.setdefault(rec.lang, []).append(score)

    per_language = {lang: sum(vals) / len(vals) for lang, vals in by_lang.items()}
    average = sum(per_language.values()) / len(per_language) if per_language else 0.0
    all_scores = [s for vals in by_lang.values() for s in vals]
    micro = sum(all_scores) / len(all_scores) if all_scores else 0.0
    return EvalReport(
        per_language=per_language,
        average=average,
        n_records={lang: len(vals) for lang, vals in by_lang.items()},
        micro_average=micro,
        config=dict(config or {}),
        label=label,
    )


def load_predictions(path: str | Path) -> tuple[dict[str, CharSpanSet], dict]:
    """Read a prediction file; returns spans by id plus file-level metadata.

    Gold text lengths are unknown here, so span sets are sized to their own
    maximum end; `iou` re-checks lengths against gold.
    """
    spans_by_id: dict[str, CharSpanSet] = {}
    meta: dict = {"delta": set(), "config_hash": set()}
    for rec in read_jsonl(path):
        rec_id = str(rec["id"])
        if rec_id in spans_by_id:
            raise DataError(f"duplicate prediction id {rec_id!r}", record_id=rec_id)
        text_len = rec.get("text_len")
        if text_len is None:
            text_len = max((int(pair[1]) for pair in rec.get("spans", [])), default=0)
        spans_by_id[rec_id] = CharSpanSet.from_intervals(rec.get("spans", []), int(text_len))
        if "delta" in rec:
            meta["delta"].add(rec["delta"])
        if "config_hash" in rec:
            meta["config_hash"].add(rec["config_hash"])
    return spans_by_id, {
        key: (sorted(values)[0] if len(values) == 1 else sorted(values))
        for key, values in meta.items()
        if values
    }


def predictions_against_gold(
    predictions: dict[str, CharSpanSet], gold: list[AnnotatedResponse]
) -> dict[str, CharSpanSet]:
    """Resize loaded prediction span sets to each gold record's text length."""
    resized: dict[str, CharSpanSet] = {}
    by_id = {rec.id: rec for rec in gold}
    for rec_id, spans in predictions.items():
        rec = by_id.get(rec_id)
        if rec is None:
            resized[rec_id] = spans
            continue
        if spans.spans and spans.spans[-1][1] > len(rec.output_text):
            raise DataError(
                f"prediction spans exceed output length {len(rec.output_text)}",
                record_id=rec_id,
            )
        resized[rec_id] = CharSpanSet(spans.spans, len(rec.output_text))
    return resized


@dataclass(frozen=True)
class SweepCell:
    lang: str
    delta: float
    mean_iou: float


def compute_csr_for_record(
    record: AnnotatedResponse, evidence: EvidenceSet, backend, epsilon: float
) -> CsrSeries:
    """One scoring pass per record; reused across thresholds in a sweep."""
    prompt = render_prompt(evidence, record.question)
    with_ctx = score_continuation(
        backend,
        ScoringRequest(
            prompt=prompt,
            continuation_tokens=tuple(record.token_texts()),
            record_id=record.id,
        ),
    )
    return compute_csr(with_ctx, load_reference_logprobs(record), epsilon)


def threshold_sweep(
    records: list[AnnotatedResponse],
    evidence_by_id: dict[str, EvidenceSet],
    backend,
    deltas: list[float],
    base_cfg: DetectorConfig = DetectorConfig(),
) -> list[SweepCell]:
    """Mean IoU per (language, delta); the CSR series is computed once per record."""
    if not deltas:
        raise ValidationError("deltas must be non-empty")
    for delta in deltas:
        if delta < 0:
            raise ValidationError(f"delta must be >= 0, got {delta}")

    cached: list[tuple[AnnotatedResponse, CsrSeries]] = []
    for rec in records:
        csr = compute_csr_for_record(rec, evidence_by_id[rec.id], backend, base_cfg.epsilon)
        cached.append((rec, csr))

    cells: list[SweepCell] = []
    langs = sorted({rec.lang for rec in records})
    for delta in deltas:
        cfg = DetectorConfig(
            delta=delta,
            epsilon=base_cfg.epsilon,
            merge_across_whitespace=base_cfg.merge_across_whitespace,
        )
        predictions: dict[str, CharSpanSet] = {}
        for rec, csr in cached:
            flags = classify_tokens(csr, delta)
            spans = assemble_spans(flags, rec.tokens, cfg)
            predictions[rec.id] = CharSpanSet(spans.spans, len(rec.output_text))
        report = evaluate_dataset(predictions, records)
        for lang in langs:
            cells.append(SweepCell(lang=lang, delta=delta, mean_iou=report.per_language[lang]))
        cells.append(SweepCell(lang="average", delta=delta, mean_iou=report.average))
    return cells


def sweep_to_csv(cells: list[SweepCell], config_hash_value: str) -> str:
    lines = [f"# format=sweep/{FORMAT_VERSIONS['sweep']} config_hash={config_hash_value}"]
    lines.append("lang,delta,mean_iou")
    for cell in cells:
        lines.append(f"{cell.lang},{cell.delta!r},{cell.mean_iou!r}")
    return "\n".join(lines) + "\n"


def report_to_json(report: EvalReport) -> str:
    return json.dumps(report.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> EvalReport:
    return EvalReport.from_dict(json.loads(text))
