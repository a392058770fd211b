"""Question-answering metrics: token-level answer F1, paragraph-level
evidence F1, max over annotators, and line-delimited prediction records.

Tokenization follows the usual SQuAD-style normalization: lowercase, drop
punctuation and the articles a/an/the, split on whitespace.  Token overlap
is counted on multisets.  An unanswerable gold answer is the empty token
list, and two empty sides score 1.
"""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from kgweave.errors import MissingPrediction, UnknownQuestion
from kgweave.jsonio import read_jsonl, write_jsonl

FORMAT_VERSION = 1
UNANSWERABLE = "UNANSWERABLE"

_PUNCT = set(string.punctuation)
_ARTICLES = re.compile(r"\b(a|an|the)\b")


def normalize_answer(s: str) -> str:
    s = s.lower()
    s = "".join(ch for ch in s if ch not in _PUNCT)
    s = _ARTICLES.sub(" ", s)
    return " ".join(s.split())


def answer_tokens(s: Optional[str]) -> list[str]:
    if s is None or s.strip() == UNANSWERABLE:
        return []
    return normalize_answer(s).split()


def _f1(overlap: int, n_pred: int, n_gold: int) -> float:
    if n_pred == 0 and n_gold == 0:
        return 1.0
    if overlap == 0:
        return 0.0
    p, r = overlap / n_pred, overlap / n_gold
    return 2 * p * r / (p + r)


def answer_f1(pred: Optional[str], gold: Optional[str]) -> float:
    tp, tg = answer_tokens(pred), answer_tokens(gold)
    overlap = sum((Counter(tp) & Counter(tg)).values())
    return _f1(overlap, len(tp), len(tg))


def evidence_f1(pred_ids: Iterable[str], gold_ids: Iterable[str]) -> float:
    p, g = set(pred_ids), set(gold_ids)
    return _f1(len(p & g), len(p), len(g))


@dataclass(frozen=True)
class Annotation:
    answer: str
    evidence: frozenset[str] = frozenset()

    def to_dict(self) -> dict:
        return {"answer": self.answer, "evidence": sorted(self.evidence)}


@dataclass(frozen=True)
class QAInstance:
    question_id: str
    question: str
    doc_id: str
    annotators: tuple[Annotation, ...]

    def __post_init__(self):
        if not self.annotators:
            raise ValueError(f"{self.question_id}: at least one annotator is required")

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "question": self.question,
            "doc_id": self.doc_id,
            "annotators": [a.to_dict() for a in self.annotators],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QAInstance":
        anns = tuple(Annotation(a["answer"], frozenset(a.get("evidence", ()))) for a in d["annotators"])
        return cls(d["question_id"], d.get("question", ""), d.get("doc_id", ""), anns)


@dataclass
class PredictionRecord:
    question_id: str
    predicted_answer: str
    retrieved_paragraph_ids: list[str] = field(default_factory=list)
    evidence_paragraph_ids: list[str] = field(default_factory=list)
    doc_id: str = ""
    scores: dict[str, list[float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PredictionRecord":
        return cls(**{k: v for k, v in d.items() if k != "format_version"})


def annotator_scores(pred: PredictionRecord, inst: QAInstance) -> dict[str, list[float]]:
    return {
        "answer_f1": [answer_f1(pred.predicted_answer, a.answer) for a in inst.annotators],
        "evidence_f1": [evidence_f1(pred.evidence_paragraph_ids, a.evidence) for a in inst.annotators],
        "retrieved_evidence_f1": [evidence_f1(pred.retrieved_paragraph_ids, a.evidence) for a in inst.annotators],
    }


def score_question(pred: PredictionRecord, inst: QAInstance) -> dict[str, float]:
    """Best score over annotators, per metric."""
    return {k: max(v) for k, v in annotator_scores(pred, inst).items()}


def score_dataset(predictions: Sequence[PredictionRecord], instances: Sequence[QAInstance]) -> dict:
    by_id = {p.question_id: p for p in predictions}
    known = {i.question_id for i in instances}
    extra = sorted(set(by_id) - known)
    if extra:
        raise UnknownQuestion(f"predictions for unknown questions: {extra}")
    missing = sorted(known - set(by_id))
    if missing:
        raise MissingPrediction(f"no prediction for {missing}")
    per_q = [score_question(by_id[i.question_id], i) for i in instances]
    n = len(per_q)

    def mean(key: str) -> float:
        return sum(q[key] for q in per_q) / n if n else 0.0

    return {
        "answer_f1_mean": mean("answer_f1"),
        "evidence_f1_mean": mean("evidence_f1"),
        "retrieved_evidence_f1_mean": mean("retrieved_evidence_f1"),
        "questions": n,
    }


def attach_scores(pred: PredictionRecord, inst: QAInstance) -> PredictionRecord:
    pred.scores = annotator_scores(pred, inst)
    return pred


def unresolved_evidence(instances: Iterable[QAInstance], chunk_ids: set[str]) -> list[tuple[str, str]]:
    """(question_id, paragraph id) pairs whose paragraph is not a known chunk."""
    return [
        (i.question_id, pid)
        for i in instances
        for a in i.annotators
        for pid in sorted(a.evidence)
        if pid not in chunk_ids
    ]


def _sentences(text: str) -> list[str]:
    parts = re.split(r"(?<=[.!?])\s+|\n+", text)
    return [p.strip() for p in parts if p.strip() and not p.lstrip().startswith("#")]


def extract_answer(question: str, passages: Sequence[str]) -> str:
    """Pick the passage sentence sharing the most tokens with the question.

    A retrieval-only baseline; returns UNANSWERABLE when nothing overlaps.
    """
    q = Counter(answer_tokens(question))
    best, best_score = UNANSWERABLE, 0
    for text in passages:
        for sent in _sentences(text):
            score = sum((q & Counter(answer_tokens(sent))).values())
            if score > best_score:
                best, best_score = sent, score
    return best


def load_instances(path: str | Path) -> list[QAInstance]:
    return [QAInstance.from_dict(d) for d in read_jsonl(path) if "question_id" in d]


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    return [PredictionRecord.from_dict(d) for d in read_jsonl(path) if "question_id" in d]


def write_predictions(path: str | Path, records: Iterable[PredictionRecord]) -> None:
    write_jsonl(path, [{"format_version": FORMAT_VERSION}, *(r.to_dict() for r in records)])
