"""Entity-name quality gate.

Eight rules, cheapest first; the first rule a name violates is reported.
Pattern sets live in ``data/gate_rules.json`` so they can be tuned without
code changes.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

RULES = (
    "LENGTH",
    "PRINTABLE_RATIO",
    "SENTENCE_FRAGMENT",
    "CODE_KEYWORD",
    "MATH_FORMULA",
    "PUNCTUATION_FLOOD",
    "PDF_GARBLED",
    "GENERIC_HEADING",
)


@dataclass(frozen=True)
class GateResult:
    passed: bool
    rule: Optional[str] = None

    def __bool__(self) -> bool:
        return self.passed


def load_rules(path: Optional[str | Path] = None) -> dict:
    if path is None:
        text = resources.files("kgweave").joinpath("data/gate_rules.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return json.loads(text)


class QualityGate:
    def __init__(self, rules: Optional[dict] = None):
        r = rules if rules is not None else load_rules()
        self.max_length = int(r["max_length"])
        self.min_printable = float(r["min_printable_ratio"])
        sf = r["sentence_fragment"]
        self.max_words = int(sf["max_words"])
        self.leading = {w.casefold() for w in sf["leading_words"]}
        self.verbs = {w.casefold() for w in sf["verbs"]}
        self.min_words_verb = int(sf["min_words_for_verb"])
        self.terminal = sf["terminal_punctuation"]
        self.min_words_terminal = int(sf["min_words_for_terminal"])
        self.code = [re.compile(p) for p in r["code_patterns"]]
        self.math = [re.compile(p) for p in r["math_patterns"]]
        self.punct_ratio = float(r["punctuation"]["max_ratio"])
        self.punct_min = int(r["punctuation"]["min_count"])
        self.garbled = [re.compile(p) for p in r["garbled_patterns"]]
        self.headings = {h.casefold() for h in r["generic_headings"]}
        self.number_prefix = re.compile(r["heading_number_prefix"])
        self.numbered_label = re.compile(r["numbered_label"], re.IGNORECASE)

    def check(self, name: str) -> GateResult:
        for rule in RULES:
            if getattr(self, "_" + rule.lower())(name):
                return GateResult(False, rule)
        return GateResult(True)

    __call__ = check

    # each predicate returns True when the name violates the rule

    def _length(self, name: str) -> bool:
        n = len(name.strip())
        return n == 0 or n > self.max_length

    def _printable_ratio(self, name: str) -> bool:
        ok = sum(1 for ch in name if ch.isprintable())
        return ok / len(name) < self.min_printable

    def _sentence_fragment(self, name: str) -> bool:
        words = name.split()
        if len(words) > self.max_words:
            return True
        if len(words) > 1 and words[0].casefold() in self.leading:
            return True
        if len(words) >= self.min_words_verb and any(w.casefold() in self.verbs for w in words[1:]):
            return True
        return len(words) >= self.min_words_terminal and name.rstrip()[-1] in self.terminal

    def _code_keyword(self, name: str) -> bool:
        return any(p.search(name) for p in self.code)

    def _math_formula(self, name: str) -> bool:
        return any(p.search(name) for p in self.math)

    def _punctuation_flood(self, name: str) -> bool:
        chars = [ch for ch in name if not ch.isspace()]
        punct = sum(1 for ch in chars if unicodedata.category(ch).startswith("P"))
        return punct >= self.punct_min and punct / len(chars) > self.punct_ratio

    def _pdf_garbled(self, name: str) -> bool:
        return any(p.search(name) for p in self.garbled)

    def _generic_heading(self, name: str) -> bool:
        s = " ".join(name.split())
        if self.numbered_label.match(s):
            return True
        s = self.number_prefix.sub("", s).strip().rstrip(":").strip()
        return s.casefold() in self.headings
