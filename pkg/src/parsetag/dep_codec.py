"""Dependency trees as one label per word, using PoS-relative head offsets.

The head of word ``i`` is written as ``(o, p)``: the ``o``-th word tagged
``p`` to the right of ``i`` when ``o > 0``, or the ``-o``-th such word to the
left when ``o < 0``. The virtual root at position 0 carries the reserved
tag :data:`ROOT_TAG`, so the root word's label is ``(-1, ROOT_TAG, rel)``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

from .treebank_io import DependencySentence

ROOT_TAG = "-ROOT-"
FIELD_SEP = "@"


@dataclass(frozen=True)
class DepLabel:
    o: int
    p: str
    d: str

    def __post_init__(self):
        if self.o == 0:
            raise ValueError("offset must be non-zero")
        if not self.p or not self.d:
            raise ValueError("PoS and relation must be non-empty")

    def serialize(self, sep: str = FIELD_SEP) -> str:
        return sep.join([str(self.o), self.p, self.d])

    @classmethod
    def parse(cls, text: str, sep: str = FIELD_SEP) -> "DepLabel":
        # the relation is last and may itself contain the separator
        parts = text.split(sep, 2)
        if len(parts) != 3:
            raise ValueError(f"malformed dependency label {text!r}")
        try:
            o = int(parts[0])
        except ValueError:
            raise ValueError(f"malformed dependency label {text!r}") from None
        return cls(o, parts[1], parts[2])

    def __str__(self):
        return self.serialize()


@dataclass
class RepairStats:
    added_root: int = 0
    extra_roots: int = 0
    invalid_heads: int = 0
    broken_cycles: int = 0

    def __iadd__(self, other: "RepairStats"):
        self.added_root += other.added_root
        self.extra_roots += other.extra_roots
        self.invalid_heads += other.invalid_heads
        self.broken_cycles += other.broken_cycles
        return self


def _tags_with_root(postags: Sequence[str]) -> list[str]:
    return [ROOT_TAG] + list(postags)


def head_to_offset(i: int, head: int, tags: Sequence[str]) -> tuple[int, str]:
    """Offset for dependent ``i`` and head ``head``; ``tags[0]`` is the root."""
    p = tags[head]
    if head > i:
        return sum(1 for j in range(i + 1, head + 1) if tags[j] == p), p
    return -sum(1 for j in range(head, i) if tags[j] == p), p


def offset_to_head(i: int, o: int, p: str, tags: Sequence[str]) -> Optional[int]:
    """Resolve ``(o, p)`` from position ``i``; None when there is no such word."""
    step = 1 if o > 0 else -1
    remaining = abs(o)
    j = i + step
    while 0 <= j < len(tags):
        if tags[j] == p:
            remaining -= 1
            if remaining == 0:
                return j
        j += step
    return None


def is_valid_tree(heads: Sequence[int]) -> bool:
    """Exactly one root, every head in range, no cycles."""
    n = len(heads)
    if sum(1 for h in heads if h == 0) != 1:
        return False
    if any(h is None or not 0 <= h <= n for h in heads):
        return False
    return not detect_cycles(heads)


def encode_dep(sentence: DependencySentence) -> list[DepLabel]:
    if not is_valid_tree(sentence.heads):
        raise ValueError("sentence is not a single-rooted acyclic tree")
    tags = _tags_with_root(sentence.postags)
    if ROOT_TAG in sentence.postags:
        raise ValueError(f"PoS tag {ROOT_TAG!r} is reserved for the virtual root")
    labels = []
    for i, (head, rel) in enumerate(zip(sentence.heads, sentence.deprels), 1):
        o, p = head_to_offset(i, head, tags)
        labels.append(DepLabel(o, p, rel))
    return labels


def decode_dep(labels: Sequence[DepLabel], words: Sequence[str],
               postags: Sequence[str], stats: Optional[RepairStats] = None
               ) -> DependencySentence:
    """Resolve every label against the PoS sequence, then repair."""
    if not (len(labels) == len(words) == len(postags)):
        raise ValueError("labels, words and postags differ in length")
    if not labels:
        raise ValueError("cannot decode an empty sequence")
    tags = _tags_with_root(postags)
    heads = [offset_to_head(i, lab.o, lab.p, tags) for i, lab in enumerate(labels, 1)]
    deprels = [lab.d for lab in labels]
    heads = repair_tree(heads, deprels, stats)
    return DependencySentence.build(words, postags, heads, deprels)


def detect_cycles(heads: Sequence[Optional[int]]) -> list[set[int]]:
    """All directed cycles of the head graph (1-based token sets).

    A walk stops at the root (0) or at a missing / out-of-range head.
    """
    n = len(heads)
    state = [0] * (n + 1)  # 0 unvisited, 1 on current walk, 2 done
    cycles = []
    for start in range(1, n + 1):
        if state[start]:
            continue
        walk = []
        node = start
        while 1 <= node <= n and state[node] == 0:
            state[node] = 1
            walk.append(node)
            node = heads[node - 1]
            if node is None:
                break
        if node is not None and 1 <= node <= n and state[node] == 1:
            cycles.append(set(walk[walk.index(node):]))
        for v in walk:
            state[v] = 2
    return cycles


def repair_tree(heads: Sequence[Optional[int]], deprels: Sequence[str],
                stats: Optional[RepairStats] = None) -> list[int]:
    """Turn any head assignment into a single-rooted, acyclic tree.

    1. No root: the first token with relation ``root`` (else the first
       token) becomes root. Several roots: the first stays, the others
       attach to it.
    2. Missing or out-of-range heads attach to that root.
    3. While cycles remain, the lowest-indexed token on any cycle attaches
       to the root.
    """
    if stats is None:
        stats = RepairStats()
    n = len(heads)
    heads = [h if h is not None and 0 <= h <= n and h != i else None
             for i, h in enumerate(heads, 1)]
    roots = [i for i, h in enumerate(heads, 1) if h == 0]
    if not roots:
        root = next((i for i, d in enumerate(deprels, 1) if d == "root"), 1)
        heads[root - 1] = 0
        stats.added_root += 1
    else:
        root = roots[0]
        for i in roots[1:]:
            heads[i - 1] = root
            stats.extra_roots += 1
    for i, h in enumerate(heads):
        if h is None:
            heads[i] = root
            stats.invalid_heads += 1
    while True:
        cycles = detect_cycles(heads)
        if not cycles:
            break
        first = min(min(c) for c in cycles)
        heads[first - 1] = root
        stats.broken_cycles += 1
    return heads


def relation_counts(sequences: Sequence[Sequence[DepLabel]]) -> Counter:
    counts = Counter()
    for seq in sequences:
        counts.update(lab.d for lab in seq)
    return counts


def fallback_label(counts: Counter) -> DepLabel:
    """Stand-in for an unseen or unreadable label: attach to the root with
    the most frequent relation."""
    d = counts.most_common(1)[0][0] if counts else "dep"
    return DepLabel(-1, ROOT_TAG, d)
