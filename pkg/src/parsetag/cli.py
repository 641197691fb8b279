"""Command-line front end: encode, decode, train, predict, eval, analyze."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import const_codec, dep_codec, metrics, tagger
from .treebank_io import (AlignmentError, EmbeddingTable, FormatError,
                          read_bracketed, read_conllu, read_embeddings,
                          read_labeled, read_tagged, read_token_vectors,
                          write_bracketed, write_conllu_corpus, write_labeled)

logger = logging.getLogger("parsetag")


class CommandError(Exception):
    pass


def atomic_write(path: str, data, binary: bool = False) -> None:
    """Write to a temp file next to ``path`` and rename it into place."""
    if path == "-":
        sys.stdout.write(data)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb" if binary else "w",
                       **({} if binary else {"encoding": "utf-8"})) as fh:
            if callable(data):
                data(fh)
            else:
                fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _pmap(fn: Callable, items: Sequence, jobs: int) -> list:
    """Ordered map, optionally over worker processes."""
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def _read_treebank(path: str, formalism: str, pos_column: str):
    text = _read_text(path)
    try:
        if formalism == "const":
            return read_bracketed(text)
        return read_conllu(text, pos_column)
    except FormatError as e:
        raise CommandError(f"{path}: {e}") from None


# ----------------------------------------------------------------------
# encode / decode
# ----------------------------------------------------------------------

def _encode_one(item, formalism: str) -> tuple[list[str], list[str]]:
    if formalism == "const":
        return item.leaves(), [str(lab) for lab in const_codec.encode_const(item)]
    return item.forms, [str(lab) for lab in dep_codec.encode_dep(item)]


def cmd_encode(args) -> None:
    items = _read_treebank(args.input, args.formalism, args.pos_column)
    encoded = _pmap(partial(_encode_one, formalism=args.formalism), items, args.jobs)
    atomic_write(args.output, write_labeled(encoded))
    logger.info("encoded %d sentences", len(encoded))


def _tokens_source(args) -> list[tuple[list[str], list[str]]]:
    if args.tags_format == "tsv":
        try:
            return read_tagged(_read_text(args.tokens))
        except FormatError as e:
            raise CommandError(f"{args.tokens}: {e}") from None
    items = _read_treebank(args.tokens, args.formalism, args.pos_column)
    if args.formalism == "const":
        return [([w for w, _ in t.pos()], [p for _, p in t.pos()]) for t in items]
    return [(s.forms, s.postags) for s in items]


def _parse_labels(raw: Sequence[Sequence[Optional[str]]], formalism: str):
    """Parse label strings; unreadable ones become the fallback label."""
    codec = const_codec if formalism == "const" else dep_codec
    cls = const_codec.ConstLabel if formalism == "const" else dep_codec.DepLabel
    parsed = []
    bad = 0
    for seq in raw:
        out = []
        for text in seq:
            try:
                out.append(cls.parse(text) if text is not None else None)
            except ValueError:
                out.append(None)
        parsed.append(out)
    good = [[lab for lab in seq if lab is not None] for seq in parsed]
    if formalism == "const":
        fb = codec.fallback_label(const_codec.label_counts(good))
    else:
        fb = codec.fallback_label(dep_codec.relation_counts(good))
    for seq in parsed:
        for i, lab in enumerate(seq):
            if lab is None:
                seq[i] = fb
                bad += 1
    return parsed, bad


def _decode_one(item, formalism: str):
    labels, words, tags = item
    if formalism == "const":
        stats = const_codec.DecodeStats()
        tree = const_codec.decode_const(labels, words, tags, stats=stats)
        return tree, stats
    stats = dep_codec.RepairStats()
    return dep_codec.decode_dep(labels, words, tags, stats=stats), stats


def cmd_decode(args) -> None:
    labeled = read_labeled(_read_text(args.labels))
    tokens = _tokens_source(args)
    if len(labeled) != len(tokens):
        raise CommandError(f"{len(labeled)} labeled sentences but "
                           f"{len(tokens)} token sentences")
    for k, ((forms, _), (words, _)) in enumerate(zip(labeled, tokens)):
        if len(forms) != len(words):
            raise CommandError(f"sentence {k}: {len(forms)} labels but "
                               f"{len(words)} tokens")
    labels, unreadable = _parse_labels([lab for _, lab in labeled], args.formalism)
    items = [(lab, w, t) for lab, (w, t) in zip(labels, tokens)]
    results = _pmap(partial(_decode_one, formalism=args.formalism), items, args.jobs)
    if args.formalism == "const":
        total = const_codec.DecodeStats()
        text = "".join(write_bracketed(t) + "\n" for t, _ in results)
    else:
        total = dep_codec.RepairStats()
        text = write_conllu_corpus([s for s, _ in results], args.pos_column)
    for _, st in results:
        total += st
    atomic_write(args.output, text)
    counts = ", ".join(f"{k}={v}" for k, v in vars(total).items())
    print(f"repairs: unreadable_labels={unreadable}, {counts}", file=sys.stderr)


# ----------------------------------------------------------------------
# train / predict
# ----------------------------------------------------------------------

def _load_source(spec: str, words: Iterable[str], seed: int):
    """``random:D``, ``vectors:PATH`` or a text embedding table PATH."""
    if spec.startswith("random:"):
        try:
            dim = int(spec.split(":", 1)[1])
        except ValueError:
            raise CommandError(f"bad embedding spec {spec!r}") from None
        return tagger.init_random_embeddings(sorted(set(words)), dim, seed)
    if spec.startswith("vectors:"):
        path = spec.split(":", 1)[1]
        with open(path, encoding="utf-8") as fh:
            try:
                return read_token_vectors(fh)
            except FormatError as e:
                raise CommandError(f"{path}: {e}") from None
    with open(spec, encoding="utf-8") as fh:
        try:
            table = read_embeddings(fh, vocab=set(words))
        except FormatError as e:
            raise CommandError(f"{spec}: {e}") from None
    table.ensure_special(np.random.default_rng(seed))
    return table


def cmd_train(args) -> None:
    corpus = [(f, lab) for f, lab in read_labeled(_read_text(args.train))]
    if any(lab is None for _, labs in corpus for lab in labs):
        raise CommandError(f"{args.train}: every token needs a label")
    dev = read_labeled(_read_text(args.dev)) if args.dev else None
    words = [w for f, _ in corpus for w in f]
    if dev:
        words += [w for f, _ in dev for w in f]
    source = _load_source(args.embeddings, words, args.seed)
    dev_source = None
    if isinstance(source, tagger.TokenVectorFile) and dev:
        if not args.dev_embeddings:
            raise CommandError("--dev-embeddings vectors:PATH is required with "
                               "vector-file embeddings and --dev")
        dev_source = _load_source(args.dev_embeddings, [], args.seed)
    config = tagger.TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                                batch_size=args.batch_size, seed=args.seed,
                                mode=args.mode)
    try:
        result = tagger.train(corpus, config, source, dev, dev_source)
    except AlignmentError as e:
        raise CommandError(str(e)) from None
    table = result.table
    if table is None and isinstance(source, EmbeddingTable):
        table = source
    atomic_write(args.output, lambda fh: tagger.save_checkpoint(
        fh, result.probe, result.vocab, table, args.formalism), binary=True)
    echo = config.to_text() + f"embeddings={args.embeddings}\nformalism={args.formalism}\n"
    atomic_write(args.output + ".config", echo)
    atomic_write(args.output + ".log.tsv", result.history_tsv())
    logger.info("best epoch %d of %d", result.best_epoch, config.epochs)


def _merge_tables(stored: EmbeddingTable, extra: EmbeddingTable) -> EmbeddingTable:
    """Stored rows win; words only in ``extra`` are appended."""
    new = [w for w in extra.words if w not in stored.index]
    if not new:
        return stored
    rows = extra.vectors[[extra.index[w] for w in new]]
    return EmbeddingTable(stored.words + new, np.vstack([stored.vectors, rows]))


def cmd_predict(args) -> None:
    with open(args.model, "rb") as fh:
        ckpt = tagger.load_checkpoint(fh)
    sentences = [f for f, _ in read_labeled(_read_text(args.input))]
    source = ckpt.table
    if args.embeddings:
        if args.embeddings.startswith("random:"):
            raise CommandError("random embeddings live in the checkpoint; "
                               "omit --embeddings")
        words = [w for f in sentences for w in f]
        loaded = _load_source(args.embeddings, words, args.seed)
        if isinstance(loaded, EmbeddingTable) and source is not None:
            source = _merge_tables(source, loaded)
        else:
            source = loaded
    if source is None:
        raise CommandError("model has no embedding table; pass --embeddings")
    if isinstance(source, tagger.TokenVectorFile):
        try:
            source.check_aligned([len(s) for s in sentences])
        except AlignmentError as e:
            raise CommandError(str(e)) from None
    if source.dim != ckpt.probe.dim:
        raise CommandError(f"embedding dimension {source.dim} does not match "
                           f"model dimension {ckpt.probe.dim}")
    labels = tagger.predict(sentences, ckpt.probe, ckpt.vocab, source)
    atomic_write(args.output, write_labeled(zip(sentences, labels)))


# ----------------------------------------------------------------------
# eval / analyze
# ----------------------------------------------------------------------

def _chunks(n: int, jobs: int) -> list[slice]:
    size = max(1, -(-n // max(jobs, 1)))
    return [slice(i, i + size) for i in range(0, n, size)]


def _bracket_part(pair, params):
    return metrics.bracketing_score(pair[0], pair[1], params)


def _attach_part(pair, ignore_punct):
    return metrics.attachment_score(pair[0], pair[1], ignore_punct=ignore_punct)


def _scores(args):
    gold = _read_treebank(args.gold, args.formalism, args.pos_column)
    pred = _read_treebank(args.pred, args.formalism, args.pos_column)
    if len(gold) != len(pred):
        raise CommandError(f"{len(gold)} gold sentences vs {len(pred)} predicted")
    parts = [(gold[s], pred[s]) for s in _chunks(len(gold), args.jobs)] or [([], [])]
    try:
        if args.formalism == "const":
            params = (metrics.read_params(_read_text(args.params))
                      if args.params else metrics.EvalParams())
            scores = _pmap(partial(_bracket_part, params=params), parts, args.jobs)
            return metrics.merge_bracket_scores(scores), gold, pred
        scores = _pmap(partial(_attach_part, ignore_punct=args.ignore_punct),
                       parts, args.jobs)
        return metrics.merge_attachment_scores(scores), gold, pred
    except AlignmentError as e:
        raise CommandError(str(e)) from None


def cmd_eval(args) -> None:
    score, _, _ = _scores(args)
    if args.formalism == "const":
        report = metrics.format_bracket_report(score)
    else:
        report = metrics.format_attachment_report(score)
    atomic_write(args.output, report)


def cmd_analyze(args) -> None:
    score, gold, pred = _scores(args)
    out = []
    if args.formalism == "const":
        out.append(metrics.breakdown_table("span_length", score.length_counts))
        out.append(metrics.breakdown_table("span_label", score.label_counts))
        out.append(f"total\t{score.matched}\t{score.gold}\t{score.pred}\n"
                   f"sentence_span_matched\t{score.sentence_span_matched}\n")
    else:
        out.append(metrics.breakdown_table("displacement", score.displacement_counts))
        out.append(metrics.breakdown_table("relation", score.relation_counts))
        out.append(metrics.breakdown_table(
            "relation_label_only", metrics.relation_counts(gold, pred, labels_only=True)))
        out.append(f"total\t{score.labeled_correct}\t{score.total}\t{score.total}\n")
    atomic_write(args.output, "\n".join(out))


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------

def read_config(path: str) -> dict[str, str]:
    """``key=value`` lines; keys are option names with dashes or underscores."""
    conf = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CommandError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            conf[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    return conf


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--formalism", choices=["const", "dep"], default="dep")
    common.add_argument("--pos-column", choices=["upos", "xpos"], default="upos")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--config", help="key=value defaults file")
    common.add_argument("-o", "--output", default="-")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="parsetag", description="Parsing as sequence labeling with a linear probe.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", parents=[common], help="treebank -> label file")
    p.add_argument("input")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", parents=[common], help="label file -> treebank")
    p.add_argument("labels")
    p.add_argument("--tokens", required=True,
                   help="words and tags: a treebank, or form<TAB>pos with --tags-format tsv")
    p.add_argument("--tags-format", choices=["treebank", "tsv"], default="treebank")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("train", parents=[common], help="train the probe")
    p.add_argument("train")
    p.add_argument("--dev")
    p.add_argument("--embeddings", default="random:300",
                   help="PATH | random:D | vectors:PATH")
    p.add_argument("--dev-embeddings", help="vectors:PATH for the dev set")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--freeze", dest="mode", action="store_const", const="frozen")
    mode.add_argument("--fine-tune", dest="mode", action="store_const", const="fine-tune")
    p.add_argument("--lr", type=float, default=5e-4)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=32)
    p.set_defaults(func=cmd_train, mode="frozen")

    p = sub.add_parser("predict", parents=[common], help="label tokens with a model")
    p.add_argument("model")
    p.add_argument("input", help="form[<TAB>label] file")
    p.add_argument("--embeddings", help="PATH | vectors:PATH")
    p.set_defaults(func=cmd_predict)

    for name, func, help_ in (("eval", cmd_eval, "global scores"),
                              ("analyze", cmd_analyze, "breakdown tables")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("gold")
        p.add_argument("pred")
        p.add_argument("--params", help="evalb-style parameter file")
        p.add_argument("--ignore-punct", action="store_true")
        p.set_defaults(func=func)
    return parser


_INPUTS = {"encode": ["input"], "decode": ["labels", "tokens"], "train": ["train", "dev"],
           "predict": ["model", "input"], "eval": ["gold", "pred", "params"],
           "analyze": ["gold", "pred", "params"]}


def _validate_paths(args) -> None:
    for name in _INPUTS[args.command]:
        path = getattr(args, name, None)
        if path and path != "-" and not os.path.isfile(path):
            raise CommandError(f"{name}: no such file {path!r}")
    spec = getattr(args, "embeddings", None)
    if spec and not spec.startswith("random:"):
        path = spec.split(":", 1)[1] if spec.startswith("vectors:") else spec
        if not os.path.isfile(path):
            raise CommandError(f"embeddings: no such file {path!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if args.config:
            conf = read_config(args.config)
            sub = parser._subparsers._group_actions[0].choices[args.command]
            known = {a.dest for a in sub._actions}
            unknown = set(conf) - known
            if unknown:
                raise CommandError(f"unknown config keys: {', '.join(sorted(unknown))}")
            typed = {}
            for a in sub._actions:
                if a.dest not in conf:
                    continue
                value = conf[a.dest]
                if isinstance(a, argparse._StoreTrueAction):
                    typed[a.dest] = value.lower() in ("1", "true", "yes")
                else:
                    typed[a.dest] = a.type(value) if a.type else value
            sub.set_defaults(**typed)
            args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        _validate_paths(args)
        args.func(args)
    except (CommandError, FormatError, AlignmentError, ValueError, OSError) as e:
        print(f"parsetag {argv[0] if argv else ''}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
