"""System-level selection quality and productivity.

The whole pipeline is scored as one binary classifier: a relevant message
that reaches storage is a system true positive, one rejected anywhere along
the way is a false negative, and the negatives aggregate over every
classifying stage.  Productivity ties the selection quality back to the
power bill: output message rate per watt, discounted by the f1 score, so a
system that archives garbage fast scores no better than one that starves.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ModelError
from .graph import FlowAssignment, PipelineGraph

__all__ = ["SystemScore", "system_confusion", "score_system"]


@dataclass(frozen=True)
class SystemScore:
    tp: float
    fp: float
    tn: float
    fn: float
    precision: float
    recall: float
    f1: float
    output_rate_hz: float
    total_power_w: float
    productivity_per_j: float  # (messages/s per W) * f1
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {
            "tp_hz": self.tp,
            "fp_hz": self.fp,
            "tn_hz": self.tn,
            "fn_hz": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "output_rate_hz": self.output_rate_hz,
            "total_power_w": self.total_power_w,
            "productivity_per_j": self.productivity_per_j,
            "degenerate": self.degenerate,
        }


def system_confusion(assignment: FlowAssignment) -> tuple[float, float, float, float]:
    """(tp, fp, tn, fn) rates for the pipeline as a whole, in messages/s."""
    tp = assignment.output_true_rate
    fp = assignment.output_false_rate
    tn = sum(cm.tn for cm in assignment.confusions.values())
    fn = sum(cm.fn for cm in assignment.confusions.values())
    return tp, fp, tn, fn


def score_system(graph: PipelineGraph, assignment: FlowAssignment) -> SystemScore:
    tp, fp, tn, fn = system_confusion(assignment)
    power = assignment.total_power
    if power <= 0.0:
        raise ModelError("system draws no power, nothing to score")
    output_rate = tp + fp

    if tp <= 0.0:
        # no relevant messages survive: every quality metric collapses
        return SystemScore(
            tp=tp, fp=fp, tn=tn, fn=fn,
            precision=0.0, recall=0.0, f1=0.0,
            output_rate_hz=output_rate, total_power_w=power,
            productivity_per_j=0.0, degenerate=True,
        )

    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    f1 = 2.0 * precision * recall / (precision + recall)
    productivity = (output_rate / power) * f1
    return SystemScore(
        tp=tp, fp=fp, tn=tn, fn=fn,
        precision=precision, recall=recall, f1=f1,
        output_rate_hz=output_rate, total_power_w=power,
        productivity_per_j=productivity,
    )
