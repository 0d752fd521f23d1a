"""Evaluation: Macro-F1 over the two verdict classes, batched runs with a
thread pool, and the ablation matrix.

A claim whose pipeline run fails is scored as predicted False and counted in
``error_count``; evaluation never dies on one bad claim. Per-claim traces are
written as claims finish, so an interrupted run keeps what it has done.
"""
from __future__ import annotations

import json
import logging
import re
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path

from .llm import CompletionClient, ResponseCache
from .pipeline import (
    Ablation,
    ClaimInstance,
    ClaimVerifier,
    PipelineConfig,
    PipelineError,
    Verdict,
    VerificationReport,
)
from .prompts import PromptLibrary

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass
class ConfusionCounts:
    tp_true: int = 0
    fp_true: int = 0
    fn_true: int = 0
    tp_false: int = 0
    fp_false: int = 0
    fn_false: int = 0
    error_count: int = 0
    abstain_count: int = 0


def _prf(tp: int, fp: int, fn: int) -> ClassMetrics:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassMetrics(precision=precision, recall=recall, f1=f1)


def confusion(
    predictions: list[Verdict], golds: list[Verdict]
) -> ConfusionCounts:
    if len(predictions) != len(golds):
        raise ValueError("predictions and golds must have equal length")
    counts = ConfusionCounts()
    for predicted, gold in zip(predictions, golds):
        if predicted is Verdict.TRUE and gold is Verdict.TRUE:
            counts.tp_true += 1
        if predicted is Verdict.TRUE and gold is Verdict.FALSE:
            counts.fp_true += 1
            counts.fn_false += 1
        if predicted is Verdict.FALSE and gold is Verdict.FALSE:
            counts.tp_false += 1
        if predicted is Verdict.FALSE and gold is Verdict.TRUE:
            counts.fp_false += 1
            counts.fn_true += 1
    return counts


def class_metrics(counts: ConfusionCounts) -> dict[str, ClassMetrics]:
    return {
        "true": _prf(counts.tp_true, counts.fp_true, counts.fn_true),
        "false": _prf(counts.tp_false, counts.fp_false, counts.fn_false),
    }


def macro_f1(predictions: list[Verdict], golds: list[Verdict]) -> float:
    """Mean of the True-class and False-class F1 scores, scaled to [0, 100].

    Degenerate precision/recall ratios (0/0) count as 0.
    """
    if not predictions or len(predictions) != len(golds):
        raise ValueError("need equal-length, nonempty prediction and gold lists")
    metrics = class_metrics(confusion(predictions, golds))
    return 100.0 * (metrics["true"].f1 + metrics["false"].f1) / 2.0


@dataclass
class ClaimRow:
    claim_id: str
    gold: Verdict
    predicted: Verdict
    abstained_subclaims: int = 0
    error: bool = False
    error_message: str | None = None

    def to_dict(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "gold": self.gold.value,
            "predicted": self.predicted.value,
            "abstained_subclaims": self.abstained_subclaims,
            "error": self.error,
            "error_message": self.error_message,
        }


@dataclass
class EvalReport:
    config: dict
    metrics: dict[str, ClassMetrics]
    macro_f1: float
    counts: ConfusionCounts
    rows: list[ClaimRow]
    prompt_tokens: int = 0
    completion_tokens: int = 0
    wall_clock_seconds: float = 0.0
    variant: Ablation = Ablation.NONE

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "variant": self.variant.value,
            "config": self.config,
            "metrics": {
                "macro_f1": self.macro_f1,
                "per_class": {
                    name: {
                        "precision": m.precision,
                        "recall": m.recall,
                        "f1": m.f1,
                    }
                    for name, m in self.metrics.items()
                },
            },
            "counts": {
                "claims": len(self.rows),
                "errors": self.counts.error_count,
                "abstained_subclaims": self.counts.abstain_count,
                "per_class": {
                    "true": {
                        "tp": self.counts.tp_true,
                        "fp": self.counts.fp_true,
                        "fn": self.counts.fn_true,
                    },
                    "false": {
                        "tp": self.counts.tp_false,
                        "fp": self.counts.fp_false,
                        "fn": self.counts.fn_false,
                    },
                },
            },
            "tokens": {
                "prompt": self.prompt_tokens,
                "completion": self.completion_tokens,
            },
            "claims": [row.to_dict() for row in self.rows],
        }
        if include_timing:
            out["timing"] = {"wall_clock_seconds": self.wall_clock_seconds}
        return out

    def to_table(self) -> str:
        lines = [
            f"{'class':<10} {'precision':>9} {'recall':>9} {'f1':>9}",
        ]
        for name in ("true", "false"):
            m = self.metrics[name]
            lines.append(
                f"{name:<10} {100 * m.precision:>9.2f} "
                f"{100 * m.recall:>9.2f} {100 * m.f1:>9.2f}"
            )
        lines.append(f"{'macro_f1':<10} {self.macro_f1:>29.2f}")
        lines.append(
            f"claims {len(self.rows)}  errors {self.counts.error_count}  "
            f"abstained_subclaims {self.counts.abstain_count}"
        )
        return "\n".join(lines)


_UNSAFE_ID_RE = re.compile(r"[^A-Za-z0-9._-]+")


def _trace_path(out_dir: Path, claim_id: str) -> Path:
    safe = _UNSAFE_ID_RE.sub("_", claim_id) or "claim"
    return out_dir / f"{safe}.json"


def _evaluate_one(
    verifier: ClaimVerifier, instance: ClaimInstance
) -> tuple[ClaimRow, VerificationReport | None]:
    try:
        report = verifier.verify_claim(instance)
    except PipelineError as exc:
        log.warning("claim %s failed: %s", instance.id, exc)
        row = ClaimRow(
            claim_id=instance.id,
            gold=instance.gold_label,
            predicted=Verdict.FALSE,
            error=True,
            error_message=str(exc),
        )
        return row, None
    row = ClaimRow(
        claim_id=instance.id,
        gold=instance.gold_label,
        predicted=report.final,
        abstained_subclaims=report.abstained_count(),
    )
    return row, report


def run_eval(
    instances: list[ClaimInstance],
    config: PipelineConfig,
    prompts: PromptLibrary,
    cache: ResponseCache | None = None,
    workers: int = 1,
    trace_dir: str | Path | None = None,
) -> EvalReport:
    """Verify every instance and score predictions against gold labels.

    Claims are dispatched to a bounded thread pool; report rows keep the
    input order regardless of completion order.
    """
    if not instances:
        raise ValueError("no instances to evaluate")
    for instance in instances:
        if instance.gold_label is None:
            raise ValueError(f"instance {instance.id} has no gold label")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if config.abstraction_backend is None or config.verification_backend is None:
        raise ValueError("config must carry both backends")

    abstraction_client = CompletionClient(config.abstraction_backend, cache=cache)
    verification_client = CompletionClient(config.verification_backend, cache=cache)
    verifier = ClaimVerifier(config, prompts, abstraction_client, verification_client)

    out_dir: Path | None = None
    if trace_dir is not None:
        out_dir = Path(trace_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    started = time.monotonic()
    rows: list[ClaimRow | None] = [None] * len(instances)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending = {
            pool.submit(_evaluate_one, verifier, instance): position
            for position, instance in enumerate(instances)
        }
        while pending:
            done, _ = wait(pending, return_when=FIRST_COMPLETED)
            for future in done:
                position = pending.pop(future)
                row, report = future.result()
                rows[position] = row
                # Traces land on disk as soon as each claim finishes.
                if out_dir is not None and report is not None:
                    path = _trace_path(out_dir, row.claim_id)
                    path.write_text(
                        json.dumps(report.to_dict(), ensure_ascii=False, indent=2),
                        encoding="utf-8",
                    )
    elapsed = time.monotonic() - started

    final_rows = [row for row in rows if row is not None]
    counts = confusion(
        [row.predicted for row in final_rows], [row.gold for row in final_rows]
    )
    counts.error_count = sum(1 for row in final_rows if row.error)
    counts.abstain_count = sum(row.abstained_subclaims for row in final_rows)
    metrics = class_metrics(counts)
    score = 100.0 * (metrics["true"].f1 + metrics["false"].f1) / 2.0
    return EvalReport(
        config=config.to_dict(),
        metrics=metrics,
        macro_f1=score,
        counts=counts,
        rows=final_rows,
        prompt_tokens=abstraction_client.prompt_tokens_total
        + verification_client.prompt_tokens_total,
        completion_tokens=abstraction_client.completion_tokens_total
        + verification_client.completion_tokens_total,
        wall_clock_seconds=elapsed,
        variant=config.ablation,
    )


def run_ablation_matrix(
    instances: list[ClaimInstance],
    base_config: PipelineConfig,
    prompts: PromptLibrary,
    variants: list[Ablation],
    cache: ResponseCache | None = None,
    workers: int = 1,
    out_dir: str | Path | None = None,
) -> list[EvalReport]:
    """Run one evaluation per variant, sharing the response cache so prompts
    that coincide across variants are completed once."""
    if not variants:
        raise ValueError("need at least one variant")
    if len(set(variants)) != len(variants):
        raise ValueError("duplicate variants requested")
    reports = []
    for variant in variants:
        config = PipelineConfig(
            t1=base_config.t1,
            t2=base_config.t2,
            min_keywords_for_summary=base_config.min_keywords_for_summary,
            with_claim_context=base_config.with_claim_context,
            ablation=variant,
            short_circuit=base_config.short_circuit,
            abstraction_backend=base_config.abstraction_backend,
            verification_backend=base_config.verification_backend,
        )
        trace_dir = None
        if out_dir is not None:
            trace_dir = Path(out_dir) / variant.value / "traces"
        reports.append(
            run_eval(
                instances,
                config,
                prompts,
                cache=cache,
                workers=workers,
                trace_dir=trace_dir,
            )
        )
    return reports


def comparison_table(reports: list[EvalReport]) -> str:
    lines = [f"{'variant':<14} {'macro_f1':>9} {'errors':>7} {'abstained':>10}"]
    for report in reports:
        lines.append(
            f"{report.variant.value:<14} {report.macro_f1:>9.2f} "
            f"{report.counts.error_count:>7} {report.counts.abstain_count:>10}"
        )
    return "\n".join(lines)
