"""Performance feedback on an evaluated candidate, fed back to the strategist"""

from dataclasses import dataclass, field
from typing import List

from ..models.architecture import HistoryRecord, Requirements
from ..prompts import render_text

OVERFIT_GAP = 0.05
RECALL_GAP = 0.15
SUGGESTED_DROPOUT = 0.3
SUGGESTED_WEIGHT_DECAY = 1e-4
SUGGESTED_FOCAL = (0.25, 2.0)


@dataclass
class PerformanceFeedback:
    candidate: str
    analysis: List[str] = field(default_factory=list)
    recommendations: List[str] = field(default_factory=list)

    def to_text(self) -> str:
        recommendations = '\n'.join(f"{i}. {text}" for i, text in enumerate(self.recommendations, 1))
        return render_text('perf_feedback', {
            'candidate': self.candidate,
            'analysis': ' '.join(self.analysis) or "nothing notable.",
            'recommendations': recommendations or "none.",
        })


def feedback_report(record: HistoryRecord, requirements: Requirements) -> PerformanceFeedback:
    """
    Diagnose one candidate: overfitting, class imbalance in the errors,
    constraint violations, underfitting

    Recommendations are ordered by how much they are expected to matter.
    """
    desc = record.descriptor
    fb = PerformanceFeedback(candidate=f"{record.digest} ({desc.summary()})")

    if record.status == 'aborted':
        reason = record.report.abort_reason if record.report else 'unknown'
        fb.analysis.append(f"Training was aborted ({reason}).")
        fb.recommendations.append(f"Lower the learning rate below {desc.lr:g} or enable batch normalization.")
        return fb

    if record.param_count > requirements.lambda_params:
        fb.analysis.append(f"The model has {record.param_count:,} parameters, above the limit of "
                           f"{requirements.lambda_params:,}.")
        fb.recommendations.append("Use narrower or fewer hidden layers.")
    if record.latency_ms > requirements.max_latency_ms:
        fb.analysis.append(f"Inference takes {record.latency_ms:.3f} ms per sample, above the limit of "
                           f"{requirements.max_latency_ms:g} ms.")
        fb.recommendations.append("Reduce depth or drop the attention layer to cut latency.")
    if record.status == 'rejected':
        return fb

    gap = record.train_accuracy - record.accuracy
    if gap > OVERFIT_GAP:
        fb.analysis.append(f"Training accuracy {record.train_accuracy:.3f} exceeds validation accuracy "
                           f"{record.accuracy:.3f} by {gap:.3f}, a sign of overfitting.")
        if desc.dropout < SUGGESTED_DROPOUT:
            fb.recommendations.append(f"Raise dropout to {SUGGESTED_DROPOUT:g}.")
        if desc.weight_decay < SUGGESTED_WEIGHT_DECAY:
            fb.recommendations.append(f"Add L2 regularization (weight decay {SUGGESTED_WEIGHT_DECAY:g}).")
        if desc.dropout >= SUGGESTED_DROPOUT and desc.weight_decay >= SUGGESTED_WEIGHT_DECAY:
            fb.recommendations.append("Use a smaller model.")

    metrics = record.metrics
    if metrics is not None and metrics.n_classes > 1:
        recalls = [r for r, s in zip(metrics.recall, metrics.support) if s > 0]
        if len(recalls) > 1 and max(recalls) - min(recalls) > RECALL_GAP:
            worst = min(range(len(metrics.recall)),
                        key=lambda i: metrics.recall[i] if metrics.support[i] > 0 else 1.0)
            fb.analysis.append(f"Recall is uneven across classes (class {worst} at "
                               f"{metrics.recall[worst]:.3f}); the minority class is under-served.")
            if desc.loss != 'focal':
                alpha, gamma = SUGGESTED_FOCAL
                fb.recommendations.append(f"Switch to focal loss (alpha={alpha:g}, gamma={gamma:g}).")
            else:
                fb.recommendations.append("Try weighted cross-entropy.")

    if record.accuracy < requirements.p_target and gap <= OVERFIT_GAP:
        fb.analysis.append(f"Validation accuracy {record.accuracy:.3f} is below the target "
                           f"{requirements.p_target:.3f} without overfitting, so capacity or training "
                           f"time is short.")
        fb.recommendations.append("Increase width or depth, or train for more epochs.")
        if desc.family == 'mlp':
            fb.recommendations.append("Try a multi-branch network with attention.")

    if not fb.analysis:
        fb.analysis.append(f"Validation accuracy {record.accuracy:.3f} meets the target and all "
                           f"requirements are satisfied.")
    return fb
