"""Annotated-utterance data model, JSONL on-disk format and label utilities."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import Pcg32

_SLOT_RE = re.compile(r"^(O|[BI]-.+)$")

PAD_ID = 0
UNK_ID = 1


class CorpusError(ValueError):
    """Malformed corpus record or violated record invariant."""


@dataclass(frozen=True)
class Example:
    """One utterance: tokens, BIO slots, intent, domain and dependency heads.

    heads are 1-indexed positions; 0 marks the (single) root token.
    """

    tokens: tuple[str, ...]
    slots: tuple[str, ...]
    intent: str
    domain: str
    heads: tuple[int, ...]

    def __post_init__(self):
        n = len(self.tokens)
        if n < 1:
            raise CorpusError("tokens: utterance must contain at least one token")
        if len(self.slots) != n:
            raise CorpusError(f"slots: length {len(self.slots)} != tokens length {n}")
        if len(self.heads) != n:
            raise CorpusError(f"heads: length {len(self.heads)} != tokens length {n}")
        roots = [i for i, h in enumerate(self.heads) if h == 0]
        if len(roots) != 1:
            raise CorpusError(f"heads: expected exactly one root, found {len(roots)}")
        for i, h in enumerate(self.heads):
            if not 0 <= h <= n:
                raise CorpusError(f"heads: position {i} points to {h}, outside [0, {n}]")
            if h == i + 1:
                raise CorpusError(f"heads: token {i} is its own head")
        for s in self.slots:
            if not _SLOT_RE.match(s):
                raise CorpusError(f"slots: label {s!r} is not 'O' or 'B-'/'I-' prefixed")
        if not self.intent:
            raise CorpusError("intent: empty label")
        if not self.domain:
            raise CorpusError("domain: empty label")

    def to_dict(self) -> dict:
        return {"tokens": list(self.tokens), "slots": list(self.slots),
                "intent": self.intent, "domain": self.domain, "heads": list(self.heads)}

    @classmethod
    def from_dict(cls, rec: dict) -> "Example":
        for key in ("tokens", "slots", "intent", "domain", "heads"):
            if key not in rec:
                raise CorpusError(f"{key}: field missing")
        try:
            heads = tuple(int(h) for h in rec["heads"])
        except (TypeError, ValueError):
            raise CorpusError("heads: values must be integers")
        return cls(tokens=tuple(str(t) for t in rec["tokens"]),
                   slots=tuple(str(s) for s in rec["slots"]),
                   intent=str(rec["intent"]), domain=str(rec["domain"]), heads=heads)


@dataclass
class CorpusSplit:
    train: list[Example]
    dev: list[Example]
    test: list[Example]


def load_jsonl(path) -> list[Example]:
    """Parse one Example per line, validating every record invariant."""
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for ln, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"{path}: line {ln}: invalid JSON ({e.msg})")
            try:
                out.append(Example.from_dict(rec))
            except CorpusError as e:
                raise CorpusError(f"{path}: line {ln}: {e}")
    return out


def save_jsonl(path, examples: list[Example]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(json.dumps(ex.to_dict()) + "\n")


def load_split(directory) -> CorpusSplit:
    d = Path(directory)
    return CorpusSplit(train=load_jsonl(d / "train.jsonl"),
                       dev=load_jsonl(d / "dev.jsonl"),
                       test=load_jsonl(d / "test.jsonl"))


@dataclass
class Vocab:
    """Token ids (0=PAD, 1=UNK) plus sorted intent / slot / domain label lists."""

    token_ids: dict[str, int]
    intents: list[str]
    slot_labels: list[str]
    domains: list[str]

    @classmethod
    def build(cls, train: list[Example]) -> "Vocab":
        tokens = sorted({t for ex in train for t in ex.tokens})
        token_ids = {t: i + 2 for i, t in enumerate(tokens)}
        return cls(token_ids=token_ids,
                   intents=sorted({ex.intent for ex in train}),
                   slot_labels=sorted({s for ex in train for s in ex.slots}),
                   domains=sorted({ex.domain for ex in train}))

    def token_id(self, tok: str) -> int:
        return self.token_ids.get(tok, UNK_ID)

    def encode_tokens(self, tokens) -> list[int]:
        return [self.token_id(t) for t in tokens]

    @property
    def n_tokens(self) -> int:
        return len(self.token_ids) + 2

    def intent_id(self, label: str) -> int:
        return self.intents.index(label)

    def slot_id(self, label: str) -> int:
        return self.slot_labels.index(label)

    def domain_id(self, label: str) -> int:
        return self.domains.index(label)

    def to_dict(self) -> dict:
        return {"tokens": sorted(self.token_ids, key=self.token_ids.get),
                "intents": self.intents, "slot_labels": self.slot_labels,
                "domains": self.domains}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocab":
        return cls(token_ids={t: i + 2 for i, t in enumerate(d["tokens"])},
                   intents=list(d["intents"]), slot_labels=list(d["slot_labels"]),
                   domains=list(d["domains"]))


def derive_filter_labels(train: list[Example], domains: list[str]) -> frozenset[str]:
    """Slot labels that occur in the training data of every listed domain."""
    per_domain: dict[str, set[str]] = {d: set() for d in domains}
    counts = {d: 0 for d in domains}
    for ex in train:
        if ex.domain in per_domain:
            per_domain[ex.domain].update(ex.slots)
            counts[ex.domain] += 1
    for d in domains:
        if counts[d] == 0:
            raise CorpusError(f"domain {d!r} has no training examples")
    result = set(per_domain[domains[0]])
    for d in domains[1:]:
        result &= per_domain[d]
    return frozenset(result)


def gold_filter_vector(ex: Example, filter_labels: frozenset[str]) -> list[int]:
    """1 where the token carries a domain-general slot label, else 0."""
    return [1 if s in filter_labels else 0 for s in ex.slots]


def adjacency_from_heads(heads, normalize: bool = False) -> np.ndarray:
    """Symmetrized dependency adjacency with self-loops added.

    With normalize=True each row is divided by its degree (mean aggregation),
    which keeps long-sentence message sums bounded.
    """
    n = len(heads)
    a = np.eye(n)
    for i, h in enumerate(heads):
        if h != 0:
            a[i, h - 1] = 1.0
            a[h - 1, i] = 1.0
    if normalize:
        a = a / a.sum(axis=1, keepdims=True)
    return a


def bio_spans(slots) -> set[tuple[str, int, int]]:
    """Spans as (label, start, end) with conlleval's relaxed start rule:
    I-X after O or after a different type opens a new span."""
    spans = set()
    cur_label = None
    cur_start = 0
    for i, tag in enumerate(slots):
        if tag == "O":
            if cur_label is not None:
                spans.add((cur_label, cur_start, i - 1))
                cur_label = None
        elif tag.startswith("B-"):
            if cur_label is not None:
                spans.add((cur_label, cur_start, i - 1))
            cur_label = tag[2:]
            cur_start = i
        else:  # I-X
            label = tag[2:]
            if cur_label != label:
                if cur_label is not None:
                    spans.add((cur_label, cur_start, i - 1))
                cur_label = label
                cur_start = i
    if cur_label is not None:
        spans.add((cur_label, cur_start, len(slots) - 1))
    return spans


def spans_to_bio(spans, n: int) -> list[str]:
    """Inverse of bio_spans for non-overlapping spans."""
    out = ["O"] * n
    for label, start, end in sorted(spans, key=lambda s: s[1]):
        out[start] = f"B-{label}"
        for i in range(start + 1, end + 1):
            out[i] = f"I-{label}"
    return out


def subsample_ratio(train: list[Example], target_domain: str, ratio: float,
                    seed: int) -> list[Example]:
    """Keep ceil(ratio * count) target-domain examples; other domains untouched."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    target_idx = [i for i, ex in enumerate(train) if ex.domain == target_domain]
    if not target_idx:
        raise ValueError(f"target domain {target_domain!r} not present in train")
    if ratio == 1.0:
        return list(train)
    keep_n = math.ceil(ratio * len(target_idx))
    rng = Pcg32(seed)
    pool = list(target_idx)
    rng.shuffle(pool)
    kept = set(pool[:keep_n])
    return [ex for i, ex in enumerate(train)
            if ex.domain != target_domain or i in kept]
