"""Classifier head, pair scores, losses, and threshold selection.

Feature specs are compact comma-separated strings (e.g.
``u,v,mdiff,cos,dist``).  Vector blocks are laid out first in spec
order, then scalar blocks in spec order, so the layout is deterministic
regardless of how the string interleaves them.
"""

import math
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import ConfigError

PROB_FLOOR = 1e-12

# block name -> (is_vector, needs_hyperbolic_space)
FEATURE_BLOCKS = {
    "u": (True, False),
    "v": (True, False),
    "mdiff": (True, True),       # (-u) (+) v
    "absmdiff": (True, True),    # |(-u) (+) v|
    "cos": (False, False),
    "dist": (False, True),       # geodesic distance
    "absdiff": (True, False),    # |u - v|
    "hadamard": (True, False),   # u * v
    "dot": (False, False),
    "edist": (False, False),     # ||u - v||
}


@dataclass(frozen=True)
class FeatureSpec:
    """Ordered feature blocks fed to the classifier."""

    blocks: tuple

    @classmethod
    def parse(cls, text):
        names = [t.strip() for t in text.split(",") if t.strip()]
        if not names:
            raise ConfigError("feature spec is empty")
        for name in names:
            if name not in FEATURE_BLOCKS:
                raise ConfigError(
                    f"unknown feature block {name!r}; known: {', '.join(sorted(FEATURE_BLOCKS))}"
                )
        return cls(tuple(names))

    def __str__(self):
        return ",".join(self.blocks)

    @property
    def vector_blocks(self):
        return [b for b in self.blocks if FEATURE_BLOCKS[b][0]]

    @property
    def scalar_blocks(self):
        return [b for b in self.blocks if not FEATURE_BLOCKS[b][0]]

    def needs_hyperbolic(self):
        return any(FEATURE_BLOCKS[b][1] for b in self.blocks)

    def length(self, dim):
        return dim * len(self.vector_blocks) + len(self.scalar_blocks)

    def validate_for_space(self, space):
        if self.needs_hyperbolic() and space.c <= 0.0:
            bad = [b for b in self.blocks if FEATURE_BLOCKS[b][1]]
            raise ConfigError(
                f"feature blocks {bad} require a curved space (c > 0), got c = {space.c}"
            )


def build_features(u, v, spec, space):
    """Concatenate the requested blocks for a premise/hypothesis pair."""
    spec.validate_for_space(space)
    c = space.c
    parts = []
    for name in spec.vector_blocks:
        if name == "u":
            parts.append(u)
        elif name == "v":
            parts.append(v)
        elif name == "mdiff":
            parts.append(kernels.mobius_add(c, -u, v))
        elif name == "absmdiff":
            parts.append(np.abs(kernels.mobius_add(c, -u, v)))
        elif name == "absdiff":
            parts.append(np.abs(u - v))
        elif name == "hadamard":
            parts.append(u * v)
    for name in spec.scalar_blocks:
        if name == "cos":
            parts.append(np.array([kernels.cosine(u, v)]))
        elif name == "dist":
            parts.append(np.array([kernels.hyp_dist(c, u, v)]))
        elif name == "dot":
            parts.append(np.array([float(u @ v)]))
        elif name == "edist":
            parts.append(np.array([float(np.linalg.norm(u - v))]))
    return np.concatenate(parts)


@dataclass
class FfnnParams:
    """One hidden layer (ReLU) plus a softmax output layer."""

    W_hidden: np.ndarray
    b_hidden: np.ndarray
    W_out: np.ndarray
    b_out: np.ndarray

    @classmethod
    def init(cls, feature_len, classes, rng, hidden=256):
        def glorot(rows, cols):
            bound = math.sqrt(6.0 / (rows + cols))
            return rng.uniform(-bound, bound, size=(rows, cols))

        return cls(
            W_hidden=glorot(hidden, feature_len),
            b_hidden=np.zeros(hidden),
            W_out=glorot(classes, hidden),
            b_out=np.zeros(classes),
        )

    @property
    def hidden(self):
        return self.W_hidden.shape[0]

    @property
    def classes(self):
        return self.W_out.shape[0]

    def copy(self):
        return FfnnParams(
            self.W_hidden.copy(), self.b_hidden.copy(),
            self.W_out.copy(), self.b_out.copy(),
        )


class EmbeddingTable:
    """Vocabulary-indexed word vectors living inside the ball."""

    def __init__(self, vectors, space):
        self.vectors = vectors
        self.space = space

    @classmethod
    def init(cls, vocab_size, space, rng):
        # tiny ball around the origin keeps the first RSGD steps stable
        vectors = rng.uniform(-0.001, 0.001, size=(vocab_size, space.dim))
        for i in range(vocab_size):
            vectors[i] = kernels.project_ball(space.c, vectors[i])
        return cls(vectors, space)

    def __len__(self):
        return self.vectors.shape[0]


def ffnn_forward(params, features):
    """Class probabilities for one feature vector."""
    if features.shape[0] != params.W_hidden.shape[1]:
        raise ValueError(
            f"feature length {features.shape[0]} does not match the hidden layer "
            f"({params.W_hidden.shape[1]} inputs)"
        )
    hidden = kernels.relu(kernels.affine(params.W_hidden, params.b_hidden, features))
    logits = kernels.affine(params.W_out, params.b_out, hidden)
    z = logits - np.max(logits)
    ez = np.exp(z)
    return ez / ez.sum()


def cross_entropy(probs, gold):
    """-log p(gold), with probabilities floored at 1e-12."""
    if gold < 0 or gold >= len(probs):
        raise ValueError(f"gold class {gold} out of range for {len(probs)} classes")
    return -math.log(max(float(probs[gold]), PROB_FLOOR))


def pair_energy(u, v, beta, space):
    """beta * d(u, v) + (1 - beta) * max(0, ||v|| - ||u||).

    Low for entailing pairs: u is the premise, v the hypothesis, and
    hypotheses are pushed toward the origin.
    """
    d = kernels.hyp_dist(space.c, u, v)
    gap = float(np.linalg.norm(v)) - float(np.linalg.norm(u))
    return beta * d + (1.0 - beta) * max(0.0, gap)


def margin_loss(positives, negatives, alpha, beta, space):
    """Sum of positive-pair energies plus hinged negative-pair margins."""
    total = 0.0
    for u, v in positives:
        total += pair_energy(u, v, beta, space)
    for u, v in negatives:
        total += max(0.0, alpha - pair_energy(u, v, beta, space))
    return total


def order_energy(x, y):
    """||max(0, y - x)||^2; zero exactly when y <= x coordinate-wise."""
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    gap = np.maximum(y - x, 0.0)
    return float(gap @ gap)


def disentangle_loss(pair_dist, negative_dists):
    """-log softmax of the pair distance against sampled negative distances."""
    dists = np.concatenate(([pair_dist], np.asarray(negative_dists, dtype=np.float64)))
    lo = dists.min()
    log_z = -lo + math.log(float(np.exp(-(dists - lo)).sum()))
    return float(pair_dist + log_z)


def select_threshold(scores, labels):
    """Score cut maximizing accuracy of "score < threshold => entailment".

    Candidates are the midpoints of sorted unique scores plus +-inf;
    ties go to the smallest candidate.  Returns (threshold, accuracy).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.size == 0:
        raise ValueError("cannot select a threshold from an empty score list")
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    pos = labels[order].astype(np.int64)
    uniq, start = np.unique(s, return_index=True)
    # cumulative counts of entailment / non-entailment up to each unique value
    cum_pos = np.cumsum(pos)
    cum_neg = np.cumsum(1 - pos)
    end = np.append(start[1:], len(s)) - 1
    pos_below = cum_pos[end]
    neg_below = cum_neg[end]
    total_pos = int(cum_pos[-1])
    total_neg = int(cum_neg[-1])
    n = len(s)

    candidates = [-math.inf]
    correct = [total_neg]  # nothing predicted entailment
    for k in range(len(uniq) - 1):
        candidates.append(0.5 * (uniq[k] + uniq[k + 1]))
        correct.append(int(pos_below[k]) + (total_neg - int(neg_below[k])))
    candidates.append(math.inf)
    correct.append(total_pos)  # everything predicted entailment

    best_i = 0
    for i in range(1, len(candidates)):
        if correct[i] > correct[best_i]:
            best_i = i
    return candidates[best_i], correct[best_i] / n
