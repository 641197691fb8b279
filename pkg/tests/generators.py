"""Random trees, label fuzzers and independent validity checkers for tests."""
import numpy as np

from parsetag.dep_codec import ROOT_TAG, DepLabel
from parsetag.const_codec import ConstLabel
from parsetag.treebank_io import DependencySentence, Tree

NONTERMINALS = ["S", "NP", "VP", "PP", "ADJP", "ADVP", "SBAR", "QP", "WHNP", "PRN"]
POSTAGS = ["DT", "NN", "VB", "IN", "JJ", "RB"]
UPOS = ["NOUN", "VERB", "DET", "ADP", "ADJ"]
DEPRELS = ["nsubj", "obj", "det", "case", "amod", "obl", "root", "punct"]


def _chain(rng, max_len=3):
    k = int(rng.integers(1, max_len + 1))
    return [str(rng.choice(NONTERMINALS)) for _ in range(k)]


def _wrap(labels, child):
    for lab in reversed(labels):
        child = Tree(lab, [child])
    return child


def random_const_tree(rng, max_words=12, max_chain=3):
    """Random tree with unary chains up to ``max_chain`` long, both between
    internal nodes and right above preterminals."""
    n = int(rng.integers(1, max_words + 1))
    counter = iter(range(n))

    def leaf():
        i = next(counter)
        pre = Tree(str(rng.choice(POSTAGS)), [f"w{i}"])
        if rng.random() < 0.3:
            pre = _wrap(_chain(rng, max_chain), pre)
        return pre

    def build(size):
        if size == 1:
            return leaf()
        k = int(rng.integers(2, size + 1))
        cuts = np.sort(rng.choice(np.arange(1, size), size=k - 1, replace=False))
        sizes = np.diff(np.concatenate([[0], cuts, [size]]))
        children = [build(int(s)) for s in sizes]
        labels = _chain(rng, max_chain) if rng.random() < 0.3 else [str(rng.choice(NONTERMINALS))]
        return _wrap(labels[:-1], Tree(labels[-1], children))

    tree = build(n)
    if n == 1 and tree.is_preterminal and rng.random() < 0.5:
        tree = Tree(str(rng.choice(NONTERMINALS)), [tree])
    return tree


def random_dep_sentence(rng, max_tokens=15, tags=UPOS, rels=DEPRELS):
    """Random tree by head sampling with cycle rejection (non-projective
    trees included)."""
    n = int(rng.integers(1, max_tokens + 1))
    while True:
        root = int(rng.integers(1, n + 1))
        heads = []
        for i in range(1, n + 1):
            if i == root:
                heads.append(0)
            else:
                h = int(rng.integers(1, n))
                heads.append(h if h < i else h + 1)
        if not brute_force_cyclic_nodes(heads):
            break
    postags = [str(rng.choice(tags)) for _ in range(n)]
    deprels = ["root" if h == 0 else str(rng.choice(rels)) for h in heads]
    return DependencySentence.build([f"w{i}" for i in range(1, n + 1)],
                                    postags, heads, deprels)


def random_const_labels(rng, n, vocab=None):
    """Arbitrary label sequence of length ``n``; from ``vocab`` when given."""
    if vocab is not None:
        return [vocab[int(rng.integers(len(vocab)))] for _ in range(n)]
    out = []
    for _ in range(n):
        if rng.random() < 0.05:
            out.append(ConstLabel.eos(str(rng.choice(NONTERMINALS)) if rng.random() < 0.5 else None))
            continue
        c = "+".join(_chain(rng, 2)) if rng.random() < 0.9 else None
        u = "+".join(_chain(rng, 2)) if rng.random() < 0.2 else None
        out.append(ConstLabel(int(rng.integers(-4, 5)), c, u))
    return out


def random_dep_labels(rng, n, tags=UPOS, rels=DEPRELS):
    out = []
    for _ in range(n):
        o = int(rng.integers(1, 6)) * (1 if rng.random() < 0.5 else -1)
        p = ROOT_TAG if rng.random() < 0.15 else str(rng.choice(tags))
        out.append(DepLabel(o, p, str(rng.choice(rels))))
    return out


# ----------------------------------------------------------------------
# independent checkers
# ----------------------------------------------------------------------

def brute_force_cyclic_nodes(heads):
    """Tokens that lie on a cycle: following heads from i comes back to i."""
    n = len(heads)
    on_cycle = set()
    for i in range(1, n + 1):
        j = heads[i - 1]
        for _ in range(n):
            if j is None or not 1 <= j <= n:
                break
            if j == i:
                on_cycle.add(i)
                break
            j = heads[j - 1]
    return on_cycle


def brute_force_cycles(heads):
    """Group cyclic tokens into cycles by mutual reachability."""
    nodes = brute_force_cyclic_nodes(heads)
    groups = []
    for i in sorted(nodes):
        if any(i in g for g in groups):
            continue
        group = {i}
        j = heads[i - 1]
        while j != i:
            group.add(j)
            j = heads[j - 1]
        groups.append(group)
    return groups


def dep_tree_ok(heads):
    n = len(heads)
    if [h for h in heads].count(0) != 1:
        return False
    if any(not isinstance(h, int) or not 0 <= h <= n or h == i
           for i, h in enumerate(heads, 1)):
        return False
    # every token reaches 0 within n steps
    for i in range(1, n + 1):
        j, steps = i, 0
        while j != 0 and steps <= n:
            j = heads[j - 1]
            steps += 1
        if j != 0:
            return False
    return True


def const_tree_ok(tree, words):
    """Independent structural check on a decoded constituent tree."""
    if not isinstance(tree, Tree) or not tree.label:
        return False
    leaves = []

    def walk(node):
        if not isinstance(node, Tree) or not node.label or not node.children:
            return False
        if len(node.children) == 1 and isinstance(node.children[0], str):
            leaves.append(node.children[0])
            return True
        return all(isinstance(c, Tree) and walk(c) for c in node.children)

    return walk(tree) and leaves == list(words)
