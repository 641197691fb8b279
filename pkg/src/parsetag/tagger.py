"""A single linear + softmax layer from word vectors to atomic tree labels.

Inputs are either rows of an :class:`EmbeddingTable` (random or
precomputed vectors, optionally fine-tuned) or per-token vectors read from
a file (frozen contextualized vectors). Every sentence is padded with
dummy begin/end vectors; those positions are not classified.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Optional, Sequence, Union

import numpy as np

from .treebank_io import (BOS, EOS, UNK, AlignmentError, EmbeddingTable,
                          TokenVectorFile)

logger = logging.getLogger(__name__)

Source = Union[EmbeddingTable, TokenVectorFile]


class LabelVocab:
    """Label string <-> class index. Order is first occurrence in training
    data, so it does not depend on hashing or the random seed."""

    UNK_ID = -1

    def __init__(self, labels: Sequence[str]):
        self.labels = list(labels)
        self.index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self.index) != len(self.labels):
            raise ValueError("duplicate labels")

    @classmethod
    def from_sequences(cls, sequences: Iterable[Sequence[str]]) -> "LabelVocab":
        seen = {}
        for seq in sequences:
            for lab in seq:
                seen.setdefault(lab, None)
        return cls(list(seen))

    def __len__(self):
        return len(self.labels)

    def encode(self, label: str) -> int:
        return self.index.get(label, self.UNK_ID)

    def decode(self, i: int) -> str:
        return self.labels[i]


@dataclass
class LinearProbe:
    W: np.ndarray  # (K, d)
    b: np.ndarray  # (K,)

    @property
    def num_classes(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    @classmethod
    def zeros(cls, num_classes: int, dim: int) -> "LinearProbe":
        return cls(np.zeros((num_classes, dim)), np.zeros(num_classes))

    def copy(self) -> "LinearProbe":
        return LinearProbe(self.W.copy(), self.b.copy())


@dataclass
class TrainConfig:
    learning_rate: float = 5e-4
    epochs: int = 30
    batch_size: int = 32  # sentences per update
    seed: int = 0
    mode: str = "frozen"  # or "fine-tune"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.mode not in ("frozen", "fine-tune"):
            raise ValueError(f"mode must be 'frozen' or 'fine-tune', not {self.mode!r}")

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in vars(self).items())


def init_random_embeddings(words: Iterable[str], dim: int = 300,
                           seed: int = 0) -> EmbeddingTable:
    """Uniform vectors in [-sqrt(3)/dim, sqrt(3)/dim] for ``words`` plus the
    UNK/BOS/EOS rows."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    vocab = list(dict.fromkeys(list(words) + [UNK, BOS, EOS]))
    bound = np.sqrt(3.0) / dim
    rng = np.random.default_rng(seed)
    return EmbeddingTable(vocab, rng.uniform(-bound, bound, size=(len(vocab), dim)))


def embed_sentence(forms: Sequence[str], source: Source,
                   sentence_index: Optional[int] = None) -> np.ndarray:
    """Vectors for BOS, each token and EOS: shape (len(forms) + 2, d).

    With a table, unknown forms get the UNK row. With a vector file, the
    block at ``sentence_index`` is used as is and BOS/EOS are zero.
    """
    if isinstance(source, EmbeddingTable):
        rows = [source.row(BOS)] + [source.row(w) for w in forms] + [source.row(EOS)]
        return source.vectors[rows]
    if sentence_index is None or not 0 <= sentence_index < len(source):
        raise AlignmentError(f"no vectors for sentence {sentence_index}")
    block = source.sentences[sentence_index]
    if block.shape[0] != len(forms):
        raise AlignmentError(f"sentence {sentence_index}: {len(forms)} tokens "
                             f"but {block.shape[0]} vectors")
    pad = np.zeros((1, source.dim))
    return np.vstack([pad, block, pad])


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(x: np.ndarray, probe: LinearProbe) -> np.ndarray:
    """Class probabilities for one vector (d,) or a batch (n, d)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != probe.dim:
        raise ValueError(f"input dimension {x.shape[-1]} != probe dimension {probe.dim}")
    return softmax(x @ probe.W.T + probe.b)


@dataclass
class Gradients:
    W: np.ndarray
    b: np.ndarray
    # fine-tune only: distinct embedding rows and their gradients
    rows: Optional[np.ndarray] = None
    E: Optional[np.ndarray] = None
    X: Optional[np.ndarray] = None


def loss_and_gradients(X: np.ndarray, y: np.ndarray, probe: LinearProbe,
                       rows: Optional[np.ndarray] = None,
                       input_grad: bool = False) -> tuple[float, Gradients]:
    """Summed negative log-likelihood of labels ``y`` and its gradients.

    ``rows`` gives the embedding row behind each input vector; when present
    the gradient is accumulated per distinct row (fine-tuning). Set
    ``input_grad`` to also get the gradient for each input vector.
    """
    y = np.asarray(y)
    K = probe.num_classes
    if y.size and (y.min() < 0 or y.max() >= K):
        raise ValueError("label index out of range")
    P = forward(X, probe)
    n = len(y)
    picked = P[np.arange(n), y]
    loss = float(-np.sum(np.log(np.maximum(picked, np.finfo(float).tiny))))
    dZ = P
    dZ[np.arange(n), y] -= 1.0
    grads = Gradients(dZ.T @ X, dZ.sum(axis=0))
    if rows is not None or input_grad:
        dX = dZ @ probe.W
        if input_grad:
            grads.X = dX
        if rows is not None:
            uniq, inverse = np.unique(rows, return_inverse=True)
            dE = np.zeros((len(uniq), X.shape[1]))
            np.add.at(dE, inverse, dX)
            grads.rows, grads.E = uniq, dE
    return loss, grads


@dataclass
class EpochLog:
    epoch: int
    train_loss: float  # mean per token, measured after the epoch
    train_accuracy: float
    dev_accuracy: Optional[float]


@dataclass
class TrainResult:
    probe: LinearProbe
    vocab: LabelVocab
    table: Optional[EmbeddingTable]
    history: list[EpochLog] = field(default_factory=list)
    best_epoch: int = 0

    def history_tsv(self) -> str:
        rows = ["epoch\ttrain_loss\ttrain_accuracy\tdev_accuracy"]
        for h in self.history:
            dev = "" if h.dev_accuracy is None else f"{h.dev_accuracy:.4f}"
            rows.append(f"{h.epoch}\t{h.train_loss:.6f}\t{h.train_accuracy:.4f}\t{dev}")
        return "\n".join(rows) + "\n"


LabeledSentence = tuple[Sequence[str], Sequence[str]]


class _Inputs:
    """Token-level design matrix for a corpus, without BOS/EOS."""

    def __init__(self, forms: Sequence[Sequence[str]], source: Source):
        self.offsets = np.cumsum([0] + [len(f) for f in forms])
        if isinstance(source, EmbeddingTable):
            self.table = source
            self.rows = np.array([source.row(w) for fs in forms for w in fs], dtype=np.int64)
            self._X = None
        else:
            source.check_aligned([len(f) for f in forms])
            self.table = None
            self.rows = None
            self._X = (np.vstack(source.sentences) if len(source)
                       else np.zeros((0, source.dim)))

    def X(self, token_ids: Optional[np.ndarray] = None) -> np.ndarray:
        if self.table is not None:
            rows = self.rows if token_ids is None else self.rows[token_ids]
            return self.table.vectors[rows]
        return self._X if token_ids is None else self._X[token_ids]

    def sentence_tokens(self, sentence_ids: np.ndarray) -> np.ndarray:
        return np.concatenate([np.arange(self.offsets[s], self.offsets[s + 1])
                               for s in sentence_ids])


def _accuracy(probe: LinearProbe, X: np.ndarray, y: np.ndarray,
              chunk: int = 8192) -> tuple[float, float]:
    """(mean loss over in-vocabulary tokens, accuracy over all tokens)."""
    if len(y) == 0:
        return 0.0, 0.0
    loss = 0.0
    correct = 0
    known = 0
    for lo in range(0, len(y), chunk):
        P = forward(X[lo:lo + chunk], probe)
        yy = y[lo:lo + chunk]
        correct += int(np.sum(P.argmax(axis=1) == yy))
        mask = yy >= 0
        known += int(mask.sum())
        picked = P[np.nonzero(mask)[0], yy[mask]]
        loss -= float(np.sum(np.log(np.maximum(picked, np.finfo(float).tiny))))
    return loss / max(known, 1), correct / len(y)


def train(corpus: Sequence[LabeledSentence], config: TrainConfig, source: Source,
          dev: Optional[Sequence[LabeledSentence]] = None,
          dev_source: Optional[Source] = None) -> TrainResult:
    """Fit the probe with minibatch SGD on the summed cross-entropy.

    In fine-tune mode the embedding table is copied and its rows are
    updated too; the caller's table is never modified. The returned
    parameters are those of the epoch with the best dev accuracy (the last
    epoch when there is no dev set).
    """
    if not corpus or not any(len(f) for f, _ in corpus):
        raise ValueError("empty training corpus")
    fine_tune = config.mode == "fine-tune"
    if fine_tune and not isinstance(source, EmbeddingTable):
        raise ValueError("fine-tuning needs an embedding table, not fixed vectors")
    rng = np.random.default_rng(config.seed)

    vocab = LabelVocab.from_sequences(labels for _, labels in corpus)
    table = source.copy() if fine_tune else source
    train_in = _Inputs([f for f, _ in corpus], table)
    y = np.array([vocab.encode(lab) for _, labels in corpus for lab in labels],
                 dtype=np.int64)

    dev_in = dev_y = None
    if dev:
        dev_src = dev_source if dev_source is not None else table
        dev_in = _Inputs([f for f, _ in dev], dev_src)
        dev_y = np.array([vocab.encode(lab) for _, labels in dev for lab in labels],
                         dtype=np.int64)

    probe = LinearProbe.zeros(len(vocab), table.dim)
    result = TrainResult(probe.copy(), vocab, table.copy() if fine_tune else None)
    best = -1.0
    n_sent = len(corpus)
    lr = config.learning_rate
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_sent)
        for lo in range(0, n_sent, config.batch_size):
            tok = train_in.sentence_tokens(order[lo:lo + config.batch_size])
            if tok.size == 0:
                continue
            rows = train_in.rows[tok] if fine_tune else None
            _, g = loss_and_gradients(train_in.X(tok), y[tok], probe, rows=rows)
            probe.W -= lr * g.W
            probe.b -= lr * g.b
            if fine_tune:
                table.vectors[g.rows] -= lr * g.E
        loss, acc = _accuracy(probe, train_in.X(), y)
        dev_acc = None
        if dev_in is not None:
            _, dev_acc = _accuracy(probe, dev_in.X(), dev_y)
        result.history.append(EpochLog(epoch, loss, acc, dev_acc))
        logger.info("epoch %d loss %.4f train acc %.4f dev acc %s",
                    epoch, loss, acc, "-" if dev_acc is None else f"{dev_acc:.4f}")
        score = dev_acc if dev_acc is not None else float(epoch)
        if score > best:
            best = score
            result.probe = probe.copy()
            result.best_epoch = epoch
            if fine_tune:
                result.table = table.copy()
    return result


def predict(sentences: Sequence[Sequence[str]], probe: LinearProbe,
            vocab: LabelVocab, source: Source) -> list[list[str]]:
    """Most probable label per token (ties go to the lowest class index)."""
    out = []
    for k, forms in enumerate(sentences):
        if not forms:
            out.append([])
            continue
        X = embed_sentence(forms, source, k)[1:-1]
        P = forward(X, probe)
        out.append([vocab.decode(int(i)) for i in P.argmax(axis=1)])
    return out


# ----------------------------------------------------------------------
# Checkpoints
# ----------------------------------------------------------------------

MAGIC = "PARSETAG-PROBE"
VERSION = 1


def save_checkpoint(fh: BinaryIO, probe: LinearProbe, vocab: LabelVocab,
                    table: Optional[EmbeddingTable] = None,
                    formalism: str = "-") -> None:
    """Text header (version, sizes, labels, words), then little-endian
    float64 arrays W (row-major), b and, if present, the embedding rows."""
    words = table.words if table is not None else []
    header = [f"{MAGIC} {VERSION}", f"formalism {formalism}",
              f"dim {probe.dim}", f"classes {probe.num_classes}",
              f"words {len(words)}"]
    header += vocab.labels + list(words) + ["DATA"]
    fh.write(("\n".join(header) + "\n").encode("utf-8"))
    fh.write(np.ascontiguousarray(probe.W, dtype="<f8").tobytes())
    fh.write(np.ascontiguousarray(probe.b, dtype="<f8").tobytes())
    if table is not None:
        fh.write(np.ascontiguousarray(table.vectors, dtype="<f8").tobytes())


@dataclass
class Checkpoint:
    probe: LinearProbe
    vocab: LabelVocab
    table: Optional[EmbeddingTable]
    formalism: str


def load_checkpoint(fh: BinaryIO) -> Checkpoint:
    def line() -> str:
        raw = fh.readline()
        if not raw:
            raise ValueError("truncated checkpoint header")
        return raw.decode("utf-8").rstrip("\n")

    magic = line().split()
    if len(magic) != 2 or magic[0] != MAGIC:
        raise ValueError("not a probe checkpoint")
    if int(magic[1]) != VERSION:
        raise ValueError(f"unsupported checkpoint version {magic[1]}")
    fields = {}
    for key in ("formalism", "dim", "classes", "words"):
        k, v = line().split(" ", 1)
        if k != key:
            raise ValueError(f"expected header field {key!r}, got {k!r}")
        fields[key] = v
    d, K, V = int(fields["dim"]), int(fields["classes"]), int(fields["words"])
    labels = [line() for _ in range(K)]
    words = [line() for _ in range(V)]
    if line() != "DATA":
        raise ValueError("malformed checkpoint header")
    body = fh.read()
    expected = 8 * (K * d + K + V * d)
    if len(body) != expected:
        raise ValueError(f"checkpoint body has {len(body)} bytes, expected {expected}")
    data = np.frombuffer(body, dtype="<f8").astype(np.float64)
    W = data[:K * d].reshape(K, d).copy()
    b = data[K * d:K * d + K].copy()
    table = None
    if V:
        table = EmbeddingTable(words, data[K * d + K:].reshape(V, d).copy())
    return Checkpoint(LinearProbe(W, b), LabelVocab(labels), table, fields["formalism"])
