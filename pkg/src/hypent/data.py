"""Synthetic dataset generators and entailment-corpus loaders.

Two file formats are understood and produced:

* JSONL with the fields ``premise_binary_parse``, ``hypothesis_binary_parse``
  and ``gold_label`` (``entailment``/``neutral``/``contradiction``/``-``;
  ``-`` means no annotator consensus and the record is skipped),
* TSV with three tab-separated columns ``premise``, ``hypothesis``,
  ``label`` and whitespace-tokenized sentences (no parse trees, so only
  chain compositions apply).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import treeparse
from .errors import ConfigError, DataFormatError

UNK_TOKEN = "<unk>"
UNK_ID = 0

LABELS_3 = ("entailment", "neutral", "contradiction")
LABELS_2 = ("entailment", "non-entailment")
ENTAILMENT = 0  # class index of entailment in both tasks


class Vocab:
    """Token <-> id map; id 0 is reserved for unknown tokens."""

    def __init__(self, tokens=()):
        self.id_to_token = [UNK_TOKEN]
        self.token_to_id = {UNK_TOKEN: UNK_ID}
        for tok in tokens:
            self.add(tok)

    def add(self, token):
        wid = self.token_to_id.get(token)
        if wid is None:
            wid = len(self.id_to_token)
            self.id_to_token.append(token)
            self.token_to_id[token] = wid
        return wid

    def id_of(self, token):
        return self.token_to_id.get(token, UNK_ID)

    def __len__(self):
        return len(self.id_to_token)


def build_vocab(token_sequences):
    """Vocab with ids assigned by first occurrence over the training tokens."""
    vocab = Vocab()
    for tokens in token_sequences:
        for tok in tokens:
            vocab.add(tok)
    return vocab


@dataclass
class Sample:
    """One premise/hypothesis pair with a class-index label.

    ``*_tokens`` are word-id lists; ``*_arrays`` hold the post-order tree
    encoding when a parse was available (None for chain-only data).
    """

    premise_tokens: list
    hypothesis_tokens: list
    label: int
    premise_arrays: object = None
    hypothesis_arrays: object = None

    @property
    def has_trees(self):
        return self.premise_arrays is not None and self.hypothesis_arrays is not None


@dataclass
class DatasetSplit:
    train: list
    validation: list
    test: list
    vocab: Vocab
    skipped: int = 0
    meta: dict = field(default_factory=dict)


@dataclass
class RawPair:
    premise: str
    hypothesis: str
    label: str


def _map_label(label, classes, line):
    if classes == 2:
        if label == "entailment":
            return 0
        if label in ("neutral", "contradiction", "non-entailment"):
            return 1
        raise DataFormatError(f"unknown label {label!r}", line)
    if classes == 3:
        try:
            return LABELS_3.index(label)
        except ValueError:
            raise DataFormatError(f"unknown label {label!r} for the 3-class task", line) from None
    raise ConfigError(f"classes must be 2 or 3, got {classes}")


def read_tsv(path):
    """Raw (premise, hypothesis, label) rows from a 3-column TSV file."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise DataFormatError(f"expected 3 tab-separated columns, got {len(cols)}", lineno)
            if not cols[0].strip() or not cols[1].strip():
                raise DataFormatError("empty sentence", lineno)
            rows.append(RawPair(cols[0], cols[1], cols[2]))
    return rows


def read_jsonl(path):
    """Raw rows from a JSONL corpus file; returns (rows, skipped_count)."""
    rows = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"malformed JSON ({exc.msg})", lineno) from None
            try:
                premise = record["premise_binary_parse"]
                hypothesis = record["hypothesis_binary_parse"]
                label = record["gold_label"]
            except KeyError as exc:
                raise DataFormatError(f"missing field {exc.args[0]!r}", lineno) from None
            if label == "-":
                skipped += 1  # no gold consensus: contributes to neither training nor testing
                continue
            rows.append(RawPair(premise, hypothesis, label))
    return rows, skipped


def _sentence_tokens(text):
    """Lowercased tokens of a sentence or binary-parse string."""
    return [t.lower() for t in text.split() if t not in ("(", ")")]


def _to_samples(rows, vocab, classes, fmt, line_offset=0):
    samples = []
    for i, row in enumerate(rows):
        lineno = line_offset + i + 1
        label = _map_label(row.label, classes, lineno)
        if fmt == "jsonl":
            p_tree = treeparse.parse_sexpr(row.premise, vocab)
            h_tree = treeparse.parse_sexpr(row.hypothesis, vocab)
            samples.append(
                Sample(
                    premise_tokens=[leaf.word_id for leaf in treeparse.iter_leaves(p_tree)],
                    hypothesis_tokens=[leaf.word_id for leaf in treeparse.iter_leaves(h_tree)],
                    label=label,
                    premise_arrays=treeparse.post_order_arrays(p_tree),
                    hypothesis_arrays=treeparse.post_order_arrays(h_tree),
                )
            )
        else:
            samples.append(
                Sample(
                    premise_tokens=[vocab.id_of(t) for t in _sentence_tokens(row.premise)],
                    hypothesis_tokens=[vocab.id_of(t) for t in _sentence_tokens(row.hypothesis)],
                    label=label,
                )
            )
    return samples


def samples_from_rows(rows, vocab, classes, fmt):
    """Turn raw rows into Samples against a fixed vocabulary."""
    return _to_samples(rows, vocab, classes, fmt)


def load_dataset(train_path, test_path, validation_path=None, fmt="tsv",
                 classes=2, validation_fraction=0.0, vocab=None):
    """Load train/validation/test files into a DatasetSplit.

    The vocab is built from the training sentences (first-occurrence ids)
    unless one is supplied; validation/test tokens unseen in training map
    to UNK.  With no validation file, ``validation_fraction`` carves one
    off the end of training; at 0.0 the training set doubles as the
    validation set (threshold/model selection then sees training data,
    which is reported via ``meta``).
    """
    reader = {"tsv": lambda p: (read_tsv(p), 0), "jsonl": read_jsonl}.get(fmt)
    if reader is None:
        raise ConfigError(f"format must be 'tsv' or 'jsonl', got {fmt!r}")

    train_rows, skipped = reader(train_path)
    if not train_rows:
        raise DataFormatError("no usable records in training file", 0)
    if vocab is None:
        vocab = build_vocab(
            _sentence_tokens(r.premise) + _sentence_tokens(r.hypothesis) for r in train_rows
        )
    train = _to_samples(train_rows, vocab, classes, fmt)

    test_rows, test_skipped = reader(test_path)
    skipped += test_skipped
    test = _to_samples(test_rows, vocab, classes, fmt)

    meta = {}
    if validation_path is not None:
        val_rows, val_skipped = reader(validation_path)
        skipped += val_skipped
        validation = _to_samples(val_rows, vocab, classes, fmt)
    elif validation_fraction > 0.0:
        n_val = max(1, int(round(len(train) * validation_fraction)))
        validation = train[-n_val:]
        train = train[:-n_val]
        meta["validation_carved"] = n_val
    else:
        validation = train
        meta["validation_is_training"] = True
    return DatasetSplit(train, validation, test, vocab, skipped, meta)


def write_tsv(path, pairs):
    """Write (premise_tokens, hypothesis_tokens, label_str) rows as TSV."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for premise, hypothesis, label in pairs:
            fh.write(f"{' '.join(premise)}\t{' '.join(hypothesis)}\t{label}\n")


# ---------------------------------------------------------------------------
# adjective-noun generator
# ---------------------------------------------------------------------------


def gen_adjnoun(vocab_size=1000, train_n=2000, val_n=20000, test_n=20000, seed=0):
    """Noun/adjective entailment pairs.

    The vocabulary splits evenly: tokens ``a1..a{N/2}`` act as adjectives
    and ``n{N/2+1}..nN`` as nouns.  A positive sample pairs ``n_i`` with
    ``a_j n_i``; a negative one pairs ``n_i`` with ``a_j n_k`` (k != i).
    Splits are exactly class-balanced, disjoint as pair multisets, and
    every adjective and noun occurs at least once in training.
    Returns (DatasetSplit, raw_rows) where raw_rows maps split name to
    token/label triples ready for ``write_tsv``.
    """
    if vocab_size % 2 != 0 or vocab_size < 4:
        raise ConfigError(f"vocab_size must be even and >= 4, got {vocab_size}")
    half = vocab_size // 2
    n_pos_universe = half * half
    n_neg_universe = half * half * (half - 1)
    sizes = {"train": train_n, "validation": val_n, "test": test_n}
    total_pos = sum((n + 1) // 2 for n in sizes.values())
    total_neg = sum(n // 2 for n in sizes.values())
    if total_pos > n_pos_universe or total_neg > n_neg_universe:
        raise ConfigError(
            f"cannot draw {total_pos} positives / {total_neg} negatives without repeats "
            f"from a vocabulary of {vocab_size}"
        )
    if (train_n + 1) // 2 < half:
        # the positive half of training must cover every adjective once
        raise ConfigError(
            f"train_n must be >= {2 * half - 1} so each of the {half} adjectives "
            "fits in an entailing training sample"
        )

    rng = np.random.default_rng(seed)
    adjectives = [f"a{j}" for j in range(1, half + 1)]
    nouns = [f"n{i}" for i in range(half + 1, vocab_size + 1)]
    seen = set()

    def draw(positive, forced_adj=None, forced_noun=None):
        # rejection-sample an unused (premise, hypothesis) pair
        while True:
            j = forced_adj if forced_adj is not None else int(rng.integers(half))
            i = forced_noun if forced_noun is not None else int(rng.integers(half))
            if positive:
                k = i
            else:
                k = int(rng.integers(half))
                if k == i:
                    continue
            key = (i, j, k)
            if key in seen:
                continue
            seen.add(key)
            return ([nouns[i]], [adjectives[j], nouns[k]],
                    "entailment" if positive else "non-entailment")

    def label_deck(n):
        deck = [True] * ((n + 1) // 2) + [False] * (n // 2)
        return [deck[i] for i in rng.permutation(n)]

    raw = {}
    for split, n in sizes.items():
        rows = []
        if split == "train":
            # every adjective gets one entailing sample (with the nouns dealt
            # from a shuffled deck, which also covers every noun); without a
            # positive occurrence an adjective would only ever be pushed away
            # from the origin and its entailing pairs could not be learned
            noun_deck = rng.permutation(half)
            for idx in range(half):
                rows.append(draw(True, forced_adj=idx, forced_noun=int(noun_deck[idx])))
            filler = [True] * ((n + 1) // 2 - half) + [False] * (n // 2)
            for keep in rng.permutation(len(filler)):
                rows.append(draw(filler[keep]))
            rows = [rows[i] for i in rng.permutation(len(rows))]
        else:
            labels = label_deck(n)
            for idx in range(n):
                rows.append(draw(labels[idx]))
        raw[split] = rows

    split = _rows_to_split(raw, classes=2)
    return split, raw


def _rows_to_split(raw, classes):
    vocab = build_vocab(p + h for p, h, _ in raw["train"])
    out = {}
    for name, rows in raw.items():
        out[name] = [
            Sample(
                premise_tokens=[vocab.id_of(t) for t in premise],
                hypothesis_tokens=[vocab.id_of(t) for t in hypothesis],
                label=_map_label(label, classes, 0),
            )
            for premise, hypothesis, label in rows
        ]
    return DatasetSplit(out["train"], out["validation"], out["test"], vocab)


# ---------------------------------------------------------------------------
# 4-digit numbers generator
# ---------------------------------------------------------------------------


def gen_numbers(lo=1000, hi=9999, train_n=8000, val_n=1000, test_n=1000, seed=0):
    """Pairs of 4-digit numbers labeled by the "less than" relation.

    Each number is rendered as its four digit tokens; the premise entails
    the hypothesis exactly when the first number is smaller.  Equal pairs
    never occur, splits are exactly class-balanced and disjoint as pair
    multisets.  Returns (DatasetSplit, raw_rows) like ``gen_adjnoun``.
    """
    if not (1000 <= lo < hi <= 9999):
        raise ConfigError(f"need 1000 <= lo < hi <= 9999, got lo={lo} hi={hi}")
    r = hi - lo + 1
    sizes = {"train": train_n, "validation": val_n, "test": test_n}
    total_pos = sum((n + 1) // 2 for n in sizes.values())
    total_neg = sum(n // 2 for n in sizes.values())
    ordered_pairs = r * (r - 1) // 2
    if total_pos > ordered_pairs or total_neg > ordered_pairs:
        raise ConfigError(f"range {lo}-{hi} cannot supply {total_pos + total_neg} distinct pairs")

    rng = np.random.default_rng(seed)
    seen = set()

    def draw(positive):
        while True:
            a = int(rng.integers(lo, hi + 1))
            b = int(rng.integers(lo, hi + 1))
            if a == b:
                continue
            first, second = (min(a, b), max(a, b)) if positive else (max(a, b), min(a, b))
            if (first, second) in seen:
                continue
            seen.add((first, second))
            return (list(str(first)), list(str(second)),
                    "entailment" if positive else "non-entailment")

    raw = {}
    for split, n in sizes.items():
        deck = [True] * ((n + 1) // 2) + [False] * (n // 2)
        rows = [draw(deck[i]) for i in rng.permutation(n)]
        raw[split] = rows

    split = _rows_to_split(raw, classes=2)
    return split, raw
