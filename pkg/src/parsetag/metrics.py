"""Evaluation: labeled bracketing P/R/F1 (evalb-style), UAS/LAS, and the
breakdowns by span length, span label, dependency displacement and
dependency relation."""
from __future__ import annotations

import bisect
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, TextIO, Union

from .const_codec import CHAIN_SEP
from .treebank_io import AlignmentError, DependencySentence, Tree, _as_text

PUNCT_TAGS = (",", ":", "``", "''", ".")


@dataclass
class EvalParams:
    """Scoring options, in the spirit of evalb's COLLINS.prm.

    ``length_buckets`` lists the lower edges of span-length buckets; spans
    at least as long as the last edge share the tail bucket.
    """
    delete_labels: set[str] = field(
        default_factory=lambda: {"TOP", "ROOT", "S1", "-NONE-", *PUNCT_TAGS})
    equivalent_labels: dict[str, str] = field(
        default_factory=lambda: {"ADVP": "PRT"})
    length_buckets: list[int] = field(
        default_factory=lambda: list(range(1, 11)) + [15, 20, 30])
    uppermost_only: bool = True

    def __post_init__(self):
        # one application must be enough: map every key to its final target
        eq = dict(self.equivalent_labels)
        for k in list(eq):
            seen = {k}
            v = eq[k]
            while v in eq and v not in seen:
                seen.add(v)
                v = eq[v]
            eq[k] = v
        self.equivalent_labels = eq

    def normalize(self, label: str) -> str:
        return self.equivalent_labels.get(label, label)

    def bucket(self, length: int) -> int:
        """Lower edge of the bucket holding ``length``."""
        edges = self.length_buckets
        i = bisect.bisect_right(edges, length) - 1
        return edges[max(i, 0)]

    @classmethod
    def empty(cls) -> "EvalParams":
        """No deletions, no equivalences."""
        return cls(delete_labels=set(), equivalent_labels={})


def read_params(source: Union[str, TextIO, Iterable[str]]) -> EvalParams:
    """Parse a parameter file.

    Lines are ``KEY=VALUE`` (evalb's ``KEY VALUE`` also works). Keys:
    ``DELETE_LABEL`` (one label), ``EQ_LABEL`` (two labels),
    ``LENGTH_BUCKETS`` (comma-separated edges), ``UPPERMOST_ONLY`` (0/1).
    Other keys are ignored. As with evalb, the file is complete on its own:
    labels are deleted or mapped only if listed.
    """
    deletes: set[str] = set()
    eqs: dict[str, str] = {}
    params = EvalParams()
    for line in _as_text(source):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, value = line.split("=", 1)
        else:
            key, _, value = line.partition(" ")
        key, value = key.strip().upper(), value.strip()
        if key == "DELETE_LABEL":
            deletes.add(value)
        elif key == "EQ_LABEL":
            try:
                a, b = value.split()
            except ValueError:
                raise ValueError(f"EQ_LABEL needs two labels: {line!r}") from None
            eqs[a] = b
        elif key == "LENGTH_BUCKETS":
            params.length_buckets = sorted(int(x) for x in value.split(","))
        elif key == "UPPERMOST_ONLY":
            params.uppermost_only = value not in ("0", "false", "False", "no")
    params.delete_labels = deletes
    params.equivalent_labels = eqs
    params.__post_init__()
    return params


# ----------------------------------------------------------------------
# Constituents
# ----------------------------------------------------------------------

def _prf(matched: int, gold: int, pred: int) -> tuple[float, float, float]:
    if gold == 0 and pred == 0:
        return 100.0, 100.0, 100.0
    p = 100.0 * matched / pred if pred else 0.0
    r = 100.0 * matched / gold if gold else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


@dataclass
class Span:
    label: str
    start: int  # 1-based, inclusive
    end: int
    uppermost: bool  # top element of its unary chain

    @property
    def key(self):
        return (self.label, self.start, self.end)

    def __len__(self):
        return self.end - self.start + 1


def _deleted_words(tree: Tree, params: EvalParams) -> set[int]:
    return {i for i, (_, tag) in enumerate(tree.pos()) if tag in params.delete_labels}


def _spans(tree: Tree, params: EvalParams, deleted: Optional[set[int]] = None
           ) -> tuple[list[Span], int]:
    """All scored spans and the number of kept words.

    ``deleted`` holds 0-based word positions to drop; by default, words
    whose tag is a deleted label.
    """
    if deleted is None:
        deleted = _deleted_words(tree, params)
    spans = []
    word = -1
    position = 0
    last_span: dict[tuple[int, int], Span] = {}

    def walk(node: Tree) -> Optional[tuple[int, int]]:
        nonlocal position, word
        if node.is_preterminal:
            word += 1
            if word in deleted:
                return None
            position += 1
            return position, position
        covered = [walk(c) for c in node.children]
        covered = [c for c in covered if c is not None]
        if not covered:
            return None
        start, end = covered[0][0], covered[-1][1]
        kept = [params.normalize(x) for x in node.label.split(CHAIN_SEP)
                if x and x not in params.delete_labels]
        # the lowest chain element is emitted first so that, bottom-up,
        # the last span seen for (start, end) is the uppermost one
        for label in reversed(kept):
            span = Span(label, start, end, uppermost=False)
            spans.append(span)
            last_span[(start, end)] = span
        return start, end

    walk(tree)
    for span in last_span.values():
        span.uppermost = True
    return spans, position


def extract_spans(tree: Tree, params: Optional[EvalParams] = None) -> Counter:
    """Multiset of (label, start, end) for every scored internal node."""
    if params is None:
        params = EvalParams()
    spans, _ = _spans(tree, params)
    return Counter(s.key for s in spans)


@dataclass
class BracketScore:
    precision: float
    recall: float
    f1: float
    matched: int
    gold: int
    pred: int
    per_length: dict[int, float] = field(default_factory=dict)
    per_label: dict[str, float] = field(default_factory=dict)
    # raw (matched, gold, pred) behind each breakdown entry
    length_counts: dict[int, tuple[int, int, int]] = field(default_factory=dict)
    label_counts: dict[str, tuple[int, int, int]] = field(default_factory=dict)
    sentence_span_matched: int = 0


def _add(table: dict, key, m: int, g: int, p: int) -> None:
    om, og, op = table.get(key, (0, 0, 0))
    table[key] = (om + m, og + g, op + p)


def bracketing_score(gold: Sequence[Tree], pred: Sequence[Tree],
                     params: Optional[EvalParams] = None) -> BracketScore:
    """Micro-averaged labeled bracketing scores over a corpus."""
    if params is None:
        params = EvalParams()
    if len(gold) != len(pred):
        raise AlignmentError(f"{len(gold)} gold trees vs {len(pred)} predicted")
    matched = total_gold = total_pred = whole = 0
    by_length: dict = {}
    by_label: dict = {}
    for k, (g, p) in enumerate(zip(gold, pred)):
        if len(g.leaves()) != len(p.leaves()):
            raise AlignmentError(
                f"sentence {k}: {len(g.leaves())} gold words vs "
                f"{len(p.leaves())} predicted")
        # as in evalb, the gold tags decide which words are dropped
        deleted = _deleted_words(g, params)
        gspans, gn = _spans(g, params, deleted)
        pspans, _ = _spans(p, params, deleted)
        gc = Counter(s.key for s in gspans)
        pc = Counter(s.key for s in pspans)
        common = gc & pc
        matched += sum(common.values())
        total_gold += sum(gc.values())
        total_pred += sum(pc.values())
        whole += sum(v for (_, a, b), v in common.items() if a == 1 and b == gn)

        def breakdown(spans):
            return Counter(s.key for s in spans
                           if not (s.start == 1 and s.end == gn)
                           and (s.uppermost or not params.uppermost_only))

        gb, pb = breakdown(gspans), breakdown(pspans)
        mb = gb & pb
        for counter, slot in ((mb, 0), (gb, 1), (pb, 2)):
            for (label, a, b), v in counter.items():
                vals = [0, 0, 0]
                vals[slot] = v
                _add(by_length, params.bucket(b - a + 1), *vals)
                _add(by_label, label, *vals)
    prec, rec, f1 = _prf(matched, total_gold, total_pred)
    return BracketScore(
        prec, rec, f1, matched, total_gold, total_pred,
        per_length={k: _prf(*v)[2] for k, v in sorted(by_length.items())},
        per_label={k: _prf(*v)[2] for k, v in sorted(by_label.items())},
        length_counts=dict(sorted(by_length.items())),
        label_counts=dict(sorted(by_label.items())),
        sentence_span_matched=whole,
    )


# ----------------------------------------------------------------------
# Dependencies
# ----------------------------------------------------------------------

@dataclass
class AttachmentScore:
    uas: float
    las: float
    total: int
    head_correct: int
    labeled_correct: int
    per_displacement: dict[int, float] = field(default_factory=dict)
    per_relation: dict[str, float] = field(default_factory=dict)
    displacement_counts: dict[int, tuple[int, int, int]] = field(default_factory=dict)
    relation_counts: dict[str, tuple[int, int, int]] = field(default_factory=dict)


def _check_aligned(gold: Sequence[DependencySentence],
                   pred: Sequence[DependencySentence]) -> None:
    if len(gold) != len(pred):
        raise AlignmentError(f"{len(gold)} gold sentences vs {len(pred)} predicted")
    for k, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise AlignmentError(
                f"sentence {k}: {len(g)} gold tokens vs {len(p)} predicted")


def _scored(sentence: DependencySentence, i: int, ignore_punct: bool,
            punct: frozenset) -> bool:
    if not ignore_punct:
        return True
    return (sentence.deprels[i] not in punct
            and sentence.tokens[i].pos not in punct)


_PUNCT = frozenset({"punct", "PUNCT", *PUNCT_TAGS})


def displacement_counts(gold, pred) -> dict[int, tuple[int, int, int]]:
    """(matched, gold, pred) per signed head - dependent distance.

    A root attachment has head 0, so its displacement is ``-index``.
    """
    _check_aligned(gold, pred)
    table: dict = {}
    for g, p in zip(gold, pred):
        for i in range(len(g)):
            dep = i + 1
            _add(table, g.heads[i] - dep, 0, 1, 0)
            _add(table, p.heads[i] - dep, 0, 0, 1)
            if g.heads[i] == p.heads[i] and g.deprels[i] == p.deprels[i]:
                _add(table, g.heads[i] - dep, 1, 0, 0)
    return dict(sorted(table.items()))


def displacement_f1(gold, pred) -> dict[int, float]:
    return {k: _prf(*v)[2] for k, v in displacement_counts(gold, pred).items()}


def relation_counts(gold, pred, labels_only: bool = False
                    ) -> dict[str, tuple[int, int, int]]:
    """(matched, gold, pred) per relation. A match needs the correct head
    too unless ``labels_only``."""
    _check_aligned(gold, pred)
    table: dict = {}
    for g, p in zip(gold, pred):
        for i in range(len(g)):
            _add(table, g.deprels[i], 0, 1, 0)
            _add(table, p.deprels[i], 0, 0, 1)
            if g.deprels[i] == p.deprels[i] and (labels_only or g.heads[i] == p.heads[i]):
                _add(table, g.deprels[i], 1, 0, 0)
    return dict(sorted(table.items()))


def relation_f1(gold, pred, labels_only: bool = False) -> dict[str, float]:
    return {k: _prf(*v)[2]
            for k, v in relation_counts(gold, pred, labels_only).items()}


def attachment_score(gold: Sequence[DependencySentence],
                     pred: Sequence[DependencySentence],
                     ignore_punct: bool = False) -> AttachmentScore:
    _check_aligned(gold, pred)
    total = heads_ok = both_ok = 0
    for g, p in zip(gold, pred):
        for i in range(len(g)):
            if not _scored(g, i, ignore_punct, _PUNCT):
                continue
            total += 1
            if g.heads[i] == p.heads[i]:
                heads_ok += 1
                if g.deprels[i] == p.deprels[i]:
                    both_ok += 1
    if total == 0:
        uas = las = 100.0
    else:
        uas, las = 100.0 * heads_ok / total, 100.0 * both_ok / total
    disp = displacement_counts(gold, pred)
    rels = relation_counts(gold, pred)
    return AttachmentScore(
        uas, las, total, heads_ok, both_ok,
        per_displacement={k: _prf(*v)[2] for k, v in disp.items()},
        per_relation={k: _prf(*v)[2] for k, v in rels.items()},
        displacement_counts=disp,
        relation_counts=rels,
    )


def _merge_counts(tables: Iterable[dict]) -> dict:
    out: dict = {}
    for table in tables:
        for k, v in table.items():
            _add(out, k, *v)
    return dict(sorted(out.items()))


def merge_bracket_scores(parts: Sequence[BracketScore]) -> BracketScore:
    """Combine scores of disjoint corpus chunks (counts are summed)."""
    m = sum(p.matched for p in parts)
    g = sum(p.gold for p in parts)
    pr = sum(p.pred for p in parts)
    by_length = _merge_counts(p.length_counts for p in parts)
    by_label = _merge_counts(p.label_counts for p in parts)
    return BracketScore(
        *_prf(m, g, pr), m, g, pr,
        per_length={k: _prf(*v)[2] for k, v in by_length.items()},
        per_label={k: _prf(*v)[2] for k, v in by_label.items()},
        length_counts=by_length, label_counts=by_label,
        sentence_span_matched=sum(p.sentence_span_matched for p in parts))


def merge_attachment_scores(parts: Sequence[AttachmentScore]) -> AttachmentScore:
    total = sum(p.total for p in parts)
    heads_ok = sum(p.head_correct for p in parts)
    both_ok = sum(p.labeled_correct for p in parts)
    if total == 0:
        uas = las = 100.0
    else:
        uas, las = 100.0 * heads_ok / total, 100.0 * both_ok / total
    disp = _merge_counts(p.displacement_counts for p in parts)
    rels = _merge_counts(p.relation_counts for p in parts)
    return AttachmentScore(
        uas, las, total, heads_ok, both_ok,
        per_displacement={k: _prf(*v)[2] for k, v in disp.items()},
        per_relation={k: _prf(*v)[2] for k, v in rels.items()},
        displacement_counts=disp, relation_counts=rels)


# ----------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------

def format_bracket_report(score: BracketScore) -> str:
    lines = [
        f"{'brackets gold':<16}{score.gold:>10d}",
        f"{'brackets pred':<16}{score.pred:>10d}",
        f"{'matched':<16}{score.matched:>10d}",
        f"{'precision':<16}{score.precision:>10.2f}",
        f"{'recall':<16}{score.recall:>10.2f}",
        f"{'F1':<16}{score.f1:>10.2f}",
    ]
    return "\n".join(lines) + "\n"


def format_attachment_report(score: AttachmentScore) -> str:
    lines = [
        f"{'tokens':<16}{score.total:>10d}",
        f"{'UAS':<16}{score.uas:>10.2f}",
        f"{'LAS':<16}{score.las:>10.2f}",
    ]
    return "\n".join(lines) + "\n"


def breakdown_table(name: str, counts: dict) -> str:
    """Tab-separated rows: key, matched, gold, pred, P, R, F1."""
    rows = [f"{name}\tmatched\tgold\tpred\tprecision\trecall\tf1"]
    for key, (m, g, p) in counts.items():
        prec, rec, f1 = _prf(m, g, p)
        rows.append(f"{key}\t{m}\t{g}\t{p}\t{prec:.2f}\t{rec:.2f}\t{f1:.2f}")
    return "\n".join(rows) + "\n"
