"""Constituent trees as one label per word.

Each word ``w_i`` (except the last) gets a triple ``(n, c, u)``:

* ``n``: number of ancestors shared by ``w_i`` and ``w_{i+1}``; absolute for
  the first word, the change with respect to the previous word's value
  afterwards;
* ``c``: label of the lowest common ancestor of the pair;
* ``u``: unary chain sitting directly above ``w_i``'s preterminal, if any.

The last word has no right neighbour and gets an end-of-sentence label
that only carries ``u``.

Unary chains are collapsed into single nodes whose labels are joined with
``+`` (top to bottom), which makes the mapping invertible.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

from .treebank_io import Tree

CHAIN_SEP = "+"
FIELD_SEP = "@"
EOS_TAG = "EOS"


@dataclass(frozen=True)
class ConstLabel:
    n: Optional[int]  # None marks the end-of-sentence label
    c: Optional[str]
    u: Optional[str] = None

    @property
    def is_eos(self) -> bool:
        return self.n is None

    @classmethod
    def eos(cls, u: Optional[str] = None) -> "ConstLabel":
        return cls(None, None, u)

    def serialize(self, sep: str = FIELD_SEP) -> str:
        n = EOS_TAG if self.n is None else str(self.n)
        return sep.join([n, self.c or "", self.u or ""])

    @classmethod
    def parse(cls, text: str, sep: str = FIELD_SEP) -> "ConstLabel":
        parts = text.split(sep)
        if len(parts) != 3:
            raise ValueError(f"malformed constituent label {text!r}")
        n, c, u = parts
        if n == EOS_TAG:
            return cls(None, None, u or None)
        try:
            n = int(n)
        except ValueError:
            raise ValueError(f"malformed constituent label {text!r}") from None
        return cls(n, c or None, u or None)

    def __str__(self):
        return self.serialize()


@dataclass
class DecodeStats:
    """How often each repair fired while decoding."""
    conflicting_labels: int = 0
    empty_levels: int = 0
    clamped_depths: int = 0

    def __iadd__(self, other: "DecodeStats"):
        self.conflicting_labels += other.conflicting_labels
        self.empty_levels += other.empty_levels
        self.clamped_depths += other.clamped_depths
        return self


def collapse_unaries(tree: Tree) -> Tree:
    """Merge every chain of single-child internal nodes into one node.

    Preterminals are left alone, so a chain ending right above a
    preterminal becomes the word's leaf unary.
    """
    if tree.is_preterminal:
        return Tree(tree.label, [tree.children[0]])
    labels = [tree.label]
    node = tree
    while len(node.children) == 1 and not node.children[0].is_preterminal:
        node = node.children[0]
        labels.append(node.label)
    return Tree(CHAIN_SEP.join(labels), [collapse_unaries(c) for c in node.children])


def _is_leaf_unary(node: Tree) -> bool:
    return (not node.is_preterminal and len(node.children) == 1
            and node.children[0].is_preterminal)


def _leaf_paths(tree: Tree) -> list[tuple[list[Tree], Optional[str]]]:
    """Per word: ancestors from the root down (leaf unary excluded), and the
    leaf unary label."""
    out = []

    def walk(node: Tree, path: list[Tree]):
        if node.is_preterminal:
            out.append((path, None))
        elif _is_leaf_unary(node):
            out.append((path, node.label))
        else:
            for child in node.children:
                walk(child, path + [node])

    walk(tree, [])
    return out


def encode_const(tree: Tree) -> list[ConstLabel]:
    """Encode a tree as a sequence of one label per word."""
    if not tree.leaves():
        raise ValueError("cannot encode an empty tree")
    paths = _leaf_paths(collapse_unaries(tree))
    labels = []
    prev = 0
    for i, (path, u) in enumerate(paths):
        if i == len(paths) - 1:
            labels.append(ConstLabel.eos(u))
            break
        nxt = paths[i + 1][0]
        common = 0
        while (common < len(path) and common < len(nxt)
               and path[common] is nxt[common]):
            common += 1
        labels.append(ConstLabel(common if i == 0 else common - prev,
                                 path[common - 1].label, u))
        prev = common
    return labels


def absolute_depths(labels: Sequence[ConstLabel]) -> list[int]:
    """Prefix sums of ``n`` over the gaps between words (len(labels) - 1
    values). EOS labels in non-final position contribute no change."""
    depths = []
    total = 0
    for lab in labels[:-1]:
        total += lab.n or 0
        depths.append(total)
    return depths


def decode_const(labels: Sequence[ConstLabel], words: Sequence[str],
                 postags: Sequence[str], fallback_label: str = "S",
                 stats: Optional[DecodeStats] = None) -> Tree:
    """Rebuild a tree from one label per word.

    Always returns a well-formed tree. Repairs:

    * reconstructed depths below 1 are clamped to 1;
    * a node predicted with several different labels keeps the leftmost;
    * a level that receives no label is removed and its children hang from
      the level above. If that level is the root, the root is labeled
      ``fallback_label``.
    """
    if not (len(labels) == len(words) == len(postags)):
        raise ValueError("labels, words and postags differ in length")
    if not labels:
        raise ValueError("cannot decode an empty sequence")
    if stats is None:
        stats = DecodeStats()

    leaves = []
    for lab, w, p in zip(labels, words, postags):
        pre = Tree(p, [w])
        leaves.append(Tree(lab.u, [pre]) if lab.u else pre)
    if len(leaves) == 1:
        return leaves[0]

    depths = []
    for d in absolute_depths(labels):
        if d < 1:
            stats.clamped_depths += 1
            d = 1
        depths.append(d)
    gap_labels = [lab.c for lab in labels[:-1]]

    def build(lo: int, hi: int, parent_depth: int) -> list[Tree]:
        """Children (possibly several, after level deletion) covering
        words lo..hi, for a node at ``parent_depth``."""
        if lo == hi:
            return [leaves[lo]]
        gaps = range(lo, hi)  # gap g sits between word g and g+1
        depth = min(depths[g] for g in gaps)
        stats.empty_levels += depth - parent_depth - 1
        splits = [g for g in gaps if depths[g] == depth]
        predicted = [gap_labels[g] for g in splits if gap_labels[g]]
        if len(set(predicted)) > 1:
            stats.conflicting_labels += 1
        children = []
        start = lo
        for g in splits:
            children.extend(build(start, g, depth))
            start = g + 1
        children.extend(build(start, hi, depth))
        if not predicted:
            # nothing labels this level either: drop it
            stats.empty_levels += 1
            return children
        return [Tree(predicted[0], children)]

    top = build(0, len(leaves) - 1, 0)
    if len(top) == 1:
        return top[0]
    return Tree(fallback_label, top)


def is_valid_tree(tree: Tree, words: Optional[Sequence[str]] = None) -> bool:
    """Single labeled root, every internal node labeled with >= 1 child,
    words only under preterminals, and (optionally) leaves equal ``words``."""

    def ok(node) -> bool:
        if not isinstance(node, Tree) or not node.label or not node.children:
            return False
        if node.is_preterminal:
            return True
        return all(isinstance(c, Tree) and ok(c) for c in node.children)

    if not ok(tree):
        return False
    return words is None or tree.leaves() == list(words)


def label_counts(sequences: Sequence[Sequence[ConstLabel]]) -> Counter:
    """Frequency of non-EOS ``c`` values, used to build a fallback label."""
    counts = Counter()
    for seq in sequences:
        counts.update(lab.c for lab in seq if lab.c)
    return counts


def fallback_label(counts: Counter) -> ConstLabel:
    """Stand-in for an unseen or unreadable label: open one level with the
    most frequent nonterminal."""
    c = counts.most_common(1)[0][0] if counts else "S"
    return ConstLabel(1, c, None)
