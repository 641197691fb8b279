"""Hand-built 10-sentence gold/predicted corpora and naive scoring oracles."""
from collections import Counter

from parsetag.treebank_io import DependencySentence, read_bracketed

CONST_GOLD = """\
(TOP (S (NP (DT The) (NN future)) (VP (VBZ is) (ADVP (RB now))) (. .)))
(TOP (S (NP (PRP I)) (VP (VBD saw) (NP (DT the) (NN man)) (PP (IN with) (NP (DT a) (NN hat)))) (. .)))
(TOP (S+VP (VB Go) (PRT (RP away)) (. !)))
(TOP (NP (NP (DT the) (NN cat)) (, ,) (NP (DT the) (NN dog))))
(TOP (S (NP (NNP John)) (VP (VBD ran))))
(TOP (FRAG (NP (NN Yes)) (. .)))
(TOP (S (SBAR (IN if) (S (NP (PRP it)) (VP (VBZ rains)))) (, ,) (NP (PRP we)) (VP (MD stay) (ADVP (RB home))) (. .)))
(TOP (NP (QP (RB about) (CD five)) (NNS dollars)))
(TOP (S (NP (DT All) (NNS bets)) (VP (VBP are) (ADJP (JJ off))) (: ;) (S (NP (PRP we)) (VP (VBP wait)))))
(TOP (INTJ (UH Wow)))
"""

CONST_PRED = """\
(TOP (S (NP (DT The) (NN future)) (VP (VBZ is) (PRT (RB now))) (. .)))
(TOP (S (NP (PRP I)) (VP (VBD saw) (NP (NP (DT the) (NN man)) (PP (IN with) (NP (DT a) (NN hat))))) (. .)))
(TOP (S (VB Go) (ADVP (RP away)) (. !)))
(TOP (NP (NP (DT the) (NN cat) (, ,)) (NP (DT the) (NN dog))))
(TOP (S (NP (NNP John)) (VP (VBD ran))))
(TOP (NP (NN Yes) (. .)))
(TOP (S (SBAR (IN if) (NP (PRP it)) (VP (VBZ rains))) (, ,) (NP (PRP we)) (VP (MD stay) (NP (RB home))) (. .)))
(TOP (NP (QP (RB about) (CD five) (NNS dollars))))
(TOP (S (NP (DT All) (NNS bets)) (VP (VBP are) (ADJP (JJ off)) (: ;) (S (NP (PRP we)) (VP (VBP wait))))))
(TOP (S+INTJ (UH Wow)))
"""


def const_fixture():
    return read_bracketed(CONST_GOLD), read_bracketed(CONST_PRED)


def _dep(words, tags, heads, rels):
    return DependencySentence.build(words.split(), tags.split(), heads, rels.split())


DEP_GOLD = [
    _dep("The future is now .", "DET NOUN AUX ADV PUNCT", [2, 4, 4, 0, 4],
         "det nsubj cop root punct"),
    _dep("I saw the man", "PRON VERB DET NOUN", [2, 0, 4, 2], "nsubj root det obj"),
    _dep("Go away !", "VERB ADV PUNCT", [0, 1, 1], "root advmod punct"),
    _dep("Wow", "INTJ", [0], "root"),
    _dep("the cat sat on the mat", "DET NOUN VERB ADP DET NOUN", [2, 3, 0, 6, 6, 3],
         "det nsubj root case det obl"),
    _dep("John ran fast", "PROPN VERB ADV", [2, 0, 2], "nsubj root advmod"),
    _dep("a big red ball", "DET ADJ ADJ NOUN", [4, 4, 4, 0], "det amod amod root"),
    _dep("we stay home if it rains", "PRON VERB ADV SCONJ PRON VERB", [2, 0, 2, 6, 6, 2],
         "nsubj root advmod mark nsubj advcl"),
    _dep("dogs bark", "NOUN VERB", [2, 0], "nsubj root"),
    _dep("she gave him a book", "PRON VERB PRON DET NOUN", [2, 0, 2, 5, 2],
         "nsubj root iobj det obj"),
]

DEP_PRED = [
    _dep("The future is now .", "DET NOUN AUX ADV PUNCT", [2, 4, 4, 0, 4],
         "det nsubj cop root punct"),
    _dep("I saw the man", "PRON VERB DET NOUN", [2, 0, 4, 2], "nsubj root det nsubj"),
    _dep("Go away !", "VERB ADV PUNCT", [0, 1, 2], "root advmod punct"),
    _dep("Wow", "INTJ", [0], "discourse"),
    _dep("the cat sat on the mat", "DET NOUN VERB ADP DET NOUN", [2, 3, 0, 3, 6, 3],
         "det nsubj root case det obj"),
    _dep("John ran fast", "PROPN VERB ADV", [3, 0, 2], "nsubj root advmod"),
    _dep("a big red ball", "DET ADJ ADJ NOUN", [4, 3, 4, 0], "det amod amod root"),
    _dep("we stay home if it rains", "PRON VERB ADV SCONJ PRON VERB", [2, 0, 2, 5, 6, 2],
         "nsubj root obj mark nsubj advcl"),
    _dep("dogs bark", "NOUN VERB", [0, 1], "root nsubj"),
    _dep("she gave him a book", "PRON VERB PRON DET NOUN", [2, 0, 2, 5, 2],
         "nsubj root obj det iobj"),
]


# ----------------------------------------------------------------------
# oracles
# ----------------------------------------------------------------------

def _subtrees(tree):
    yield tree
    if not tree.is_preterminal:
        for child in tree.children:
            yield from _subtrees(child)


def naive_spans(tree, delete, equiv, gold_tags=None):
    """Every kept (label, start, end), found by brute force: for each node,
    look up the positions of its leaves among the surviving words."""
    tags = gold_tags if gold_tags is not None else [t for _, t in tree.pos()]
    leaves = list(range(len(tags)))
    survivors = [i for i in leaves if tags[i] not in delete]
    rank = {w: k + 1 for k, w in enumerate(survivors)}
    # node -> leaf indices, by identity of preterminal objects
    pre_index = {id(p): i for i, p in enumerate(tree.preterminals())}
    out = Counter()
    for node in _subtrees(tree):
        if node.is_preterminal:
            continue
        covered = sorted(rank[pre_index[id(p)]] for p in node.preterminals()
                         if pre_index[id(p)] in rank)
        if not covered:
            continue
        for label in node.label.split("+"):
            if label in delete:
                continue
            out[(equiv.get(label, label), covered[0], covered[-1])] += 1
    return out


def naive_bracket_prf(gold, pred, delete, equiv):
    m = g = p = 0
    for gt, pt in zip(gold, pred):
        tags = [t for _, t in gt.pos()]
        gs = naive_spans(gt, delete, equiv, tags)
        ps = naive_spans(pt, delete, equiv, tags)
        for key in set(gs) | set(ps):
            m += min(gs[key], ps[key])
        g += sum(gs.values())
        p += sum(ps.values())
    prec = 100.0 * m / p
    rec = 100.0 * m / g
    return m, g, p, prec, rec, 2 * prec * rec / (prec + rec)


def naive_attachment(gold, pred):
    arcs = [(gs.heads[i] == ps.heads[i], gs.deprels[i] == ps.deprels[i])
            for gs, ps in zip(gold, pred) for i in range(len(gs))]
    uas = 100.0 * sum(h for h, _ in arcs) / len(arcs)
    las = 100.0 * sum(h and r for h, r in arcs) / len(arcs)
    return uas, las


def naive_f1(m, g, p):
    prec = 100.0 * m / p if p else 0.0
    rec = 100.0 * m / g if g else 0.0
    return 2 * prec * rec / (prec + rec) if prec + rec else 0.0


def naive_bucket_counts(gold, pred, key_fn, need_head=True):
    """Per-key (matched, gold, pred) where key_fn(sentence, i) gives the
    bucket of token i."""
    keys = set()
    for gs, ps in zip(gold, pred):
        for i in range(len(gs)):
            keys.add(key_fn(gs, i))
            keys.add(key_fn(ps, i))
    out = {}
    for k in keys:
        m = g = p = 0
        for gs, ps in zip(gold, pred):
            for i in range(len(gs)):
                gk, pk = key_fn(gs, i) == k, key_fn(ps, i) == k
                g += gk
                p += pk
                same = gs.deprels[i] == ps.deprels[i] and (
                    not need_head or gs.heads[i] == ps.heads[i])
                m += gk and pk and same
        out[k] = (m, g, p)
    return out


def displacement_key(s, i):
    return s.heads[i] - (i + 1)


def relation_key(s, i):
    return s.deprels[i]
