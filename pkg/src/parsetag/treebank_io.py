"""Read and write treebanks, embedding tables and per-token vector files.

Supported formats:

* bracketed (PTB-style) constituent trees, one or more S-expressions;
* CoNLL-U dependency treebanks (basic syntactic words only);
* whitespace-separated embedding text files (GloVe / word2vec text), with
  an optional ``<count> <dim>`` header;
* per-token vector files: one row of floats per token, blank line between
  sentences.
"""
from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence, TextIO, Union

import numpy as np

UNK = "<unk>"
BOS = "<bos>"
EOS = "<eos>"


class FormatError(ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class AlignmentError(ValueError):
    """Two inputs that should describe the same sentences do not line up."""


def _as_text(source: Union[str, TextIO, Iterable[str]]) -> Iterator[str]:
    """Iterate lines of a string, open file, or iterable of lines."""
    if isinstance(source, str):
        return iter(io.StringIO(source))
    return iter(source)


# ----------------------------------------------------------------------
# Constituent trees
# ----------------------------------------------------------------------

class Tree:
    """An ordered tree node.

    Internal nodes hold :class:`Tree` children. A preterminal holds exactly
    one ``str`` child, the word form.
    """

    __slots__ = ("label", "children")

    def __init__(self, label: str, children: Sequence[Union["Tree", str]]):
        self.label = label
        self.children = list(children)

    @property
    def is_preterminal(self) -> bool:
        return len(self.children) == 1 and isinstance(self.children[0], str)

    def leaves(self) -> list[str]:
        if self.is_preterminal:
            return [self.children[0]]
        out = []
        for child in self.children:
            out.extend(child.leaves())
        return out

    def preterminals(self) -> list["Tree"]:
        if self.is_preterminal:
            return [self]
        out = []
        for child in self.children:
            out.extend(child.preterminals())
        return out

    def pos(self) -> list[tuple[str, str]]:
        """(word, tag) pairs in sentence order."""
        return [(p.children[0], p.label) for p in self.preterminals()]

    def copy(self) -> "Tree":
        if self.is_preterminal:
            return Tree(self.label, [self.children[0]])
        return Tree(self.label, [c.copy() for c in self.children])

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return self.label == other.label and self.children == other.children

    def __hash__(self):
        return hash(write_bracketed(self))

    def __repr__(self):
        return f"Tree({write_bracketed(self)!r})"

    def __str__(self):
        return write_bracketed(self)


_BRACKET_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def _tokenize_brackets(lines: Iterable[str]) -> Iterator[tuple[str, int]]:
    for lineno, line in enumerate(lines, 1):
        for m in _BRACKET_TOKEN.finditer(line):
            yield m.group(), lineno


def read_bracketed(source: Union[str, TextIO, Iterable[str]],
                   root_label: str = "TOP") -> list[Tree]:
    """Parse every top-level S-expression in ``source``.

    An unlabeled top-level wrapper, as in ``( (S ...) )``, is given
    ``root_label``. Raises :class:`FormatError` on unbalanced brackets or on
    nodes without children.
    """
    trees = []
    # each stack entry: [label, children, lineno]
    stack: list[list] = []
    expect_label = False
    for tok, lineno in _tokenize_brackets(_as_text(source)):
        if tok == "(":
            if expect_label:
                # "( (" : unlabeled node
                stack[-1][0] = root_label if len(stack) == 1 else ""
            stack.append([None, [], lineno])
            expect_label = True
        elif tok == ")":
            if not stack:
                raise FormatError("unexpected ')'", lineno)
            label, children, start = stack.pop()
            if expect_label or not children:
                raise FormatError("node without children", lineno)
            if label == "":
                raise FormatError("unlabeled internal node", lineno)
            if any(isinstance(c, str) for c in children) and len(children) > 1:
                raise FormatError(f"node {label!r} mixes words and subtrees",
                                  lineno)
            node = Tree(label, children)
            expect_label = False
            if stack:
                stack[-1][1].append(node)
            else:
                trees.append(node)
        else:
            if not stack:
                raise FormatError(f"atom {tok!r} outside brackets", lineno)
            if expect_label:
                stack[-1][0] = tok
                expect_label = False
            else:
                stack[-1][1].append(tok)
    if stack:
        raise FormatError("unbalanced brackets: missing ')'", stack[-1][2])
    return trees


def write_bracketed(tree: Tree) -> str:
    if tree.is_preterminal:
        return f"({tree.label} {tree.children[0]})"
    return f"({tree.label} {' '.join(write_bracketed(c) for c in tree.children)})"


# ----------------------------------------------------------------------
# Dependency sentences
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    index: int
    form: str
    pos: str

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"token index must be >= 1, got {self.index}")
        if not self.form:
            raise ValueError("token form must be non-empty")


@dataclass
class DependencySentence:
    tokens: list[Token]
    heads: list[int]
    deprels: list[str]
    comments: list[str] = field(default_factory=list, compare=False)

    def __post_init__(self):
        if not (len(self.tokens) == len(self.heads) == len(self.deprels)):
            raise ValueError("tokens, heads and deprels differ in length")

    def __len__(self):
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    @property
    def postags(self) -> list[str]:
        return [t.pos for t in self.tokens]

    @classmethod
    def build(cls, forms: Sequence[str], postags: Sequence[str],
              heads: Sequence[int], deprels: Sequence[str]
              ) -> "DependencySentence":
        tokens = [Token(i, f, p) for i, (f, p) in enumerate(zip(forms, postags), 1)]
        return cls(tokens, list(heads), list(deprels))


_INT_ID = re.compile(r"^[0-9]+$")


def read_conllu(source: Union[str, TextIO, Iterable[str]],
                pos_column: str = "upos") -> list[DependencySentence]:
    """Read basic dependency trees from CoNLL-U.

    Comment lines, multiword-token ranges (``3-4``) and empty nodes
    (``5.1``) are skipped. ``pos_column`` selects ``upos`` or ``xpos``.
    """
    if pos_column not in ("upos", "xpos"):
        raise ValueError(f"pos_column must be 'upos' or 'xpos', not {pos_column!r}")
    col = 3 if pos_column == "upos" else 4
    sentences = []
    rows: list[tuple[int, list[str]]] = []
    comments: list[str] = []

    def flush():
        if not rows:
            comments.clear()
            return
        n = len(rows)
        tokens, heads, deprels = [], [], []
        for i, (lineno, cols) in enumerate(rows, 1):
            if int(cols[0]) != i:
                raise FormatError(f"expected token id {i}, got {cols[0]}", lineno)
            try:
                head = int(cols[6])
            except ValueError:
                raise FormatError(f"non-integer head {cols[6]!r}", lineno) from None
            if not 0 <= head <= n:
                raise FormatError(f"head {head} out of range 0..{n}", lineno)
            tokens.append(Token(i, cols[1], cols[col]))
            heads.append(head)
            deprels.append(cols[7])
        sentences.append(DependencySentence(tokens, heads, deprels, list(comments)))
        rows.clear()
        comments.clear()

    for lineno, line in enumerate(_as_text(source), 1):
        line = line.rstrip("\r\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            comments.append(line)
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise FormatError(f"expected 10 tab-separated columns, got {len(cols)}",
                              lineno)
        if not _INT_ID.match(cols[0]):
            continue  # multiword range or empty node
        rows.append((lineno, cols))
    flush()
    return sentences


def write_conllu(sentence: DependencySentence, pos_column: str = "upos",
                 comments: bool = True) -> str:
    """Render one sentence as CoNLL-U, terminated by a blank line."""
    out = []
    if comments:
        out.extend(sentence.comments)
    for tok, head, rel in zip(sentence.tokens, sentence.heads, sentence.deprels):
        upos, xpos = (tok.pos, "_") if pos_column == "upos" else ("_", tok.pos)
        out.append("\t".join([str(tok.index), tok.form, "_", upos, xpos, "_",
                              str(head), rel, "_", "_"]))
    return "\n".join(out) + "\n\n"


def write_conllu_corpus(sentences: Iterable[DependencySentence],
                        pos_column: str = "upos") -> str:
    return "".join(write_conllu(s, pos_column) for s in sentences)


# ----------------------------------------------------------------------
# Embeddings
# ----------------------------------------------------------------------

class EmbeddingTable:
    """Word -> vector lookup backed by a single matrix.

    Reserved rows for ``<unk>``, ``<bos>`` and ``<eos>`` are added on
    demand by :meth:`ensure_special`; lookups of unknown words fall back
    to the UNK row.
    """

    def __init__(self, words: Sequence[str], vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[1] < 1:
            raise ValueError("embedding matrix must be 2-D with dim >= 1")
        if len(words) != vectors.shape[0]:
            raise ValueError("word count does not match matrix rows")
        self.words = list(words)
        self.index = {w: i for i, w in enumerate(self.words)}
        self.vectors = vectors

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def ensure_special(self, rng: Optional[np.random.Generator] = None,
                       bound: Optional[float] = None) -> None:
        """Add UNK/BOS/EOS rows that are missing.

        New rows are uniform in ``[-bound, bound]`` (default sqrt(3)/d),
        drawn from ``rng``; UNK is the zero vector when no rng is given.
        """
        missing = [w for w in (UNK, BOS, EOS) if w not in self.index]
        if not missing:
            return
        if bound is None:
            bound = np.sqrt(3.0) / self.dim
        if rng is None:
            rng = np.random.default_rng(0)
        rows = rng.uniform(-bound, bound, size=(len(missing), self.dim))
        for i, w in enumerate(missing):
            self.index[w] = len(self.words)
            self.words.append(w)
        self.vectors = np.vstack([self.vectors, rows])

    def row(self, word: str) -> int:
        i = self.index.get(word)
        if i is None:
            i = self.index.get(UNK)
            if i is None:
                raise KeyError(f"{word!r} not in table and no UNK row")
        return i

    def lookup(self, word: str) -> np.ndarray:
        return self.vectors[self.row(word)]

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(list(self.words), self.vectors.copy())


def _parse_floats(parts: Sequence[str], lineno: int) -> list[float]:
    try:
        return [float(x) for x in parts]
    except ValueError:
        raise FormatError("unparsable float", lineno) from None


def read_embeddings(source: Union[str, TextIO, Iterable[str]],
                    vocab: Optional[set[str]] = None) -> EmbeddingTable:
    """Read a text embedding file line by line.

    A first line of exactly two integers is taken as a ``<count> <dim>``
    header; otherwise the dimension is that of the first row. Duplicate
    words keep their first vector. With ``vocab``, only those words are
    kept (dimension checks still cover every row).
    """
    words: list[str] = []
    seen: set[str] = set()
    rows: list[list[float]] = []
    dim = None
    for lineno, line in enumerate(_as_text(source), 1):
        parts = line.rstrip("\r\n").split(" ")
        if len(parts) <= 1:
            parts = line.split()
        parts = [p for p in parts if p != ""]
        if not parts:
            continue
        if lineno == 1 and len(parts) == 2 and all(_INT_ID.match(p) for p in parts):
            dim = int(parts[1])
            if dim < 1:
                raise FormatError("header dimension must be >= 1", lineno)
            continue
        word, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
            if dim < 1:
                raise FormatError("row without vector values", lineno)
        if len(values) != dim:
            raise FormatError(f"expected {dim} values, got {len(values)}", lineno)
        if word in seen or (vocab is not None and word not in vocab):
            continue
        rows.append(_parse_floats(values, lineno))
        seen.add(word)
        words.append(word)
    if dim is None:
        raise FormatError("empty embedding file")
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return EmbeddingTable(words, matrix)


def write_embeddings(table: EmbeddingTable) -> str:
    lines = [f"{len(table)} {table.dim}"]
    for w, v in zip(table.words, table.vectors):
        lines.append(w + " " + " ".join(repr(float(x)) for x in v))
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# Per-token vector files
# ----------------------------------------------------------------------

@dataclass
class TokenVectorFile:
    sentences: list[np.ndarray]  # each (n_tokens, dim)
    dim: int

    def __len__(self):
        return len(self.sentences)

    def check_aligned(self, lengths: Sequence[int]) -> None:
        """Raise :class:`AlignmentError` unless block sizes match ``lengths``."""
        if len(lengths) != len(self.sentences):
            raise AlignmentError(
                f"vector file has {len(self.sentences)} sentences, "
                f"corpus has {len(lengths)}")
        for i, (n, block) in enumerate(zip(lengths, self.sentences)):
            if block.shape[0] != n:
                raise AlignmentError(
                    f"sentence {i}: {n} tokens but {block.shape[0]} vectors")


def read_token_vectors(source: Union[str, TextIO, Iterable[str]]) -> TokenVectorFile:
    blocks: list[np.ndarray] = []
    current: list[list[float]] = []
    dim = None
    for lineno, line in enumerate(_as_text(source), 1):
        parts = line.split()
        if not parts:
            if current:
                blocks.append(np.array(current, dtype=np.float64))
                current = []
            continue
        if dim is None:
            dim = len(parts)
        elif len(parts) != dim:
            raise FormatError(f"expected {dim} values, got {len(parts)}", lineno)
        current.append(_parse_floats(parts, lineno))
    if current:
        blocks.append(np.array(current, dtype=np.float64))
    return TokenVectorFile(blocks, dim or 0)


def write_token_vectors(blocks: Iterable[np.ndarray]) -> str:
    out = []
    for block in blocks:
        for row in block:
            out.append(" ".join(repr(float(x)) for x in row))
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


# ----------------------------------------------------------------------
# Label files: form<TAB>label, blank line between sentences
# ----------------------------------------------------------------------

def read_labeled(source: Union[str, TextIO, Iterable[str]]
                 ) -> list[tuple[list[str], list[Optional[str]]]]:
    """Read ``form<TAB>label`` blocks. A missing label column yields None."""
    sents = []
    forms: list[str] = []
    labels: list[Optional[str]] = []
    for line in _as_text(source):
        line = line.rstrip("\r\n")
        if not line.strip():
            if forms:
                sents.append((forms, labels))
                forms, labels = [], []
            continue
        cols = line.split("\t")
        forms.append(cols[0])
        labels.append(cols[1] if len(cols) > 1 else None)
    if forms:
        sents.append((forms, labels))
    return sents


def write_labeled(sentences: Iterable[tuple[Sequence[str], Sequence[str]]]) -> str:
    out = []
    for forms, labels in sentences:
        for f, lab in zip(forms, labels):
            out.append(f"{f}\t{lab}")
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


def read_tagged(source: Union[str, TextIO, Iterable[str]]
                ) -> list[tuple[list[str], list[str]]]:
    """Read ``form<TAB>pos`` blocks (externally predicted tags)."""
    out = []
    for lineno, (forms, tags) in enumerate(read_labeled(source)):
        if any(t is None for t in tags):
            raise FormatError(f"sentence {lineno}: missing PoS column")
        out.append((forms, list(tags)))
    return out
