"""Model assembly and the per-sample RSGD training loop.

Every training sample gets a fresh computation graph (built here from
the autodiff tape ops), one backward pass, and immediate parameter
updates: word embeddings through the metric-inverse rescale plus ball
projection, dense-layer weights through plain SGD.  Evaluation runs the
direct (tape-free) forward path from ``compose``/``model``.
"""

import json
import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import compose, metrics, model, treeparse
from .autodiff import Graph, backward, finite_diff_check
from .backend import kernels
from .compose import CompositionMethod
from .data import ENTAILMENT, Vocab
from .errors import ConfigError, NumericalError
from .geometry import CurvatureSpace

CHECKPOINT_VERSION = 1

# model name -> (loss kind, composition method, uses ffnn)
MODELS = {
    "MS": ("margin", CompositionMethod.TREE_MOBIUS, False),
    "LMS": ("margin", CompositionMethod.LEFT_CHAIN, False),
    "RMS": ("margin", CompositionMethod.RIGHT_CHAIN, False),
    "MS_FFNN": ("cross_entropy", CompositionMethod.TREE_MOBIUS, True),
    "MA_FFNN": ("cross_entropy", CompositionMethod.MOBIUS_AVERAGE, True),
    "LMS_FFNN": ("cross_entropy", CompositionMethod.LEFT_CHAIN, True),
    "RMS_FFNN": ("cross_entropy", CompositionMethod.RIGHT_CHAIN, True),
    "EA_FFNN": ("cross_entropy", CompositionMethod.EUCLIDEAN_AVERAGE, True),
    "ES_FFNN": ("cross_entropy", CompositionMethod.EUCLIDEAN_SUM, True),
}

DEFAULT_FEATURES_HYPERBOLIC = "u,v,mdiff,dist"
DEFAULT_FEATURES_EUCLIDEAN = "u,v,absdiff,hadamard"


@dataclass
class RunConfig:
    model: str = "LMS_FFNN"
    dim: int = 5
    curvature: float = 1.0
    classes: int = 2
    features: str | None = None
    lr: float = 0.05
    epochs: int = 15
    alpha: float = 0.05
    beta: float = 0.5
    seed: int = 0
    hidden: int = 256
    disentangle_epochs: int = 0
    disentangle_negatives: int = 10

    def validated(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; known: {', '.join(MODELS)}")
        loss_kind, method, uses_ffnn = MODELS[self.model]
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.curvature < 0.0:
            raise ConfigError(f"curvature must be >= 0, got {self.curvature}")
        if self.classes not in (2, 3):
            raise ConfigError(f"classes must be 2 or 3, got {self.classes}")
        if loss_kind == "margin" and self.classes != 2:
            raise ConfigError(f"{self.model} scores pairs and only supports 2 classes")
        if self.lr <= 0.0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must lie in [0, 1], got {self.beta}")
        if self.alpha <= 0.0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.hidden < 1:
            raise ConfigError(f"hidden must be >= 1, got {self.hidden}")
        euclidean = method in (
            CompositionMethod.EUCLIDEAN_AVERAGE,
            CompositionMethod.EUCLIDEAN_SUM,
        )
        if euclidean and self.curvature != 0.0:
            raise ConfigError(f"{self.model} composes in flat space; set curvature to 0")
        if uses_ffnn:
            spec = model.FeatureSpec.parse(self.feature_string())
            spec.validate_for_space(CurvatureSpace(self.dim, self.curvature))
        return self

    def feature_string(self):
        if self.features:
            return self.features
        _, method, _ = MODELS[self.model]
        if method in compose.HYPERBOLIC_METHODS and self.curvature > 0.0:
            return DEFAULT_FEATURES_HYPERBOLIC
        return DEFAULT_FEATURES_EUCLIDEAN

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        return cls(**data)


@dataclass
class ModelState:
    """Everything needed to score samples: parameters plus bookkeeping."""

    config: RunConfig
    space: CurvatureSpace
    vocab: Vocab
    embeddings: np.ndarray
    ffnn: model.FfnnParams | None
    threshold: float | None = None
    best_epoch: int = 0

    def snapshot(self):
        return ModelState(
            config=self.config,
            space=self.space,
            vocab=self.vocab,
            embeddings=self.embeddings.copy(),
            ffnn=self.ffnn.copy() if self.ffnn is not None else None,
            threshold=self.threshold,
            best_epoch=self.best_epoch,
        )


# ---------------------------------------------------------------------------
# tape builders
# ---------------------------------------------------------------------------


def build_sentence_node(graph, method, tokens, arrays, get_vec, c):
    """Append one sentence's composition to the tape; returns its node id."""
    if method in (CompositionMethod.TREE_MOBIUS, CompositionMethod.MOBIUS_AVERAGE) \
            and arrays is not None:
        node_ids = [0] * len(arrays)
        for i in range(len(arrays)):
            if arrays.is_leaf[i]:
                wid = int(arrays.word_ids[i])
                node_ids[i] = graph.leaf(get_vec(wid), param=wid)
            else:
                node_ids[i] = graph.mobius_add(
                    node_ids[arrays.left[i]], node_ids[arrays.right[i]], c
                )
        root = node_ids[-1]
        if method is CompositionMethod.MOBIUS_AVERAGE:
            n_leaves = int(arrays.is_leaf.sum())
            root = graph.mobius_scalar(root, 1.0 / n_leaves, c)
        return root

    if method is CompositionMethod.TREE_MOBIUS:
        raise ConfigError("tree composition requires parse trees in the data")

    ids = [graph.leaf(get_vec(int(w)), param=int(w)) for w in tokens]
    if method is CompositionMethod.LEFT_CHAIN:
        acc = ids[-1]
        for i in range(len(ids) - 2, -1, -1):
            acc = graph.mobius_add(ids[i], acc, c)
        return acc
    if method is CompositionMethod.RIGHT_CHAIN:
        acc = ids[0]
        for i in range(1, len(ids)):
            acc = graph.mobius_add(acc, ids[i], c)
        return acc
    if method is CompositionMethod.MOBIUS_AVERAGE:
        acc = ids[-1]
        for i in range(len(ids) - 2, -1, -1):
            acc = graph.mobius_add(ids[i], acc, c)
        return graph.mobius_scalar(acc, 1.0 / len(ids), c)
    if method is CompositionMethod.EUCLIDEAN_AVERAGE:
        acc = ids[0]
        for i in range(1, len(ids)):
            acc = graph.add(acc, ids[i])
        return graph.scale(acc, 1.0 / len(ids))
    if method is CompositionMethod.EUCLIDEAN_SUM:
        acc = ids[0]
        for i in range(1, len(ids)):
            acc = graph.add(acc, ids[i])
        return acc
    raise ConfigError(f"unknown composition method {method!r}")


def build_feature_node(graph, spec, u, v, c):
    """Append the feature concatenation (vector blocks, then scalars)."""
    ids = []
    for name in spec.vector_blocks:
        if name == "u":
            ids.append(u)
        elif name == "v":
            ids.append(v)
        elif name == "mdiff":
            ids.append(graph.mobius_add(graph.neg(u), v, c))
        elif name == "absmdiff":
            ids.append(graph.abs(graph.mobius_add(graph.neg(u), v, c)))
        elif name == "absdiff":
            ids.append(graph.abs(graph.sub(u, v)))
        elif name == "hadamard":
            ids.append(graph.hadamard(u, v))
    for name in spec.scalar_blocks:
        if name == "cos":
            ids.append(graph.cosine(u, v))
        elif name == "dist":
            ids.append(graph.hyp_dist(u, v, c))
        elif name == "dot":
            ids.append(graph.dot(u, v))
        elif name == "edist":
            ids.append(graph.euclid_dist(u, v))
    return graph.concat(ids)


def build_pair_energy_node(graph, u, v, beta, c):
    """beta * d(u, v) + (1 - beta) * max(0, ||v|| - ||u||)."""
    d = graph.hyp_dist(u, v, c)
    gap = graph.combo(graph.norm(v), graph.norm(u), 1.0, -1.0)
    return graph.combo(d, graph.hinge(gap), beta, 1.0 - beta)


def build_margin_sample_loss(graph, u, v, positive, alpha, beta, c):
    energy = build_pair_energy_node(graph, u, v, beta, c)
    if positive:
        return energy
    return graph.hinge(graph.sub_from(energy, alpha))


def build_order_sample_loss(graph, u, v, positive, alpha):
    energy = graph.sqnorm(graph.relu(graph.sub(v, u)))
    if positive:
        return energy
    return graph.hinge(graph.sub_from(energy, alpha))


def build_ffnn_loss(graph, ffnn, features, gold):
    w1 = graph.leaf(ffnn.W_hidden, param="W_hidden")
    b1 = graph.leaf(ffnn.b_hidden, param="b_hidden")
    w2 = graph.leaf(ffnn.W_out, param="W_out")
    b2 = graph.leaf(ffnn.b_out, param="b_out")
    hidden = graph.relu(graph.affine(w1, b1, features))
    logits = graph.affine(w2, b2, hidden)
    return graph.softmax_ce(logits, gold)


def build_disentangle_loss(graph, pair_nodes, negative_node_pairs, c):
    d0 = graph.hyp_dist(pair_nodes[0], pair_nodes[1], c)
    dists = [d0]
    for nu, nv in negative_node_pairs:
        dists.append(graph.hyp_dist(nu, nv, c))
    log_z = graph.logsumexp_neg(dists)
    return graph.combo(d0, log_z, 1.0, 1.0)


def build_sample_graph(state, sample, feature_spec, corrupt_param=False):
    """Full per-sample graph; returns (graph, loss node id)."""
    cfg = state.config
    loss_kind, method, uses_ffnn = MODELS[cfg.model]
    c = cfg.curvature
    graph = Graph()
    vectors = state.embeddings

    def get_vec(wid):
        return vectors[wid]

    u = build_sentence_node(graph, method, sample.premise_tokens,
                            sample.premise_arrays, get_vec, c)
    v = build_sentence_node(graph, method, sample.hypothesis_tokens,
                            sample.hypothesis_arrays, get_vec, c)
    if corrupt_param:
        # test hook: mis-route the first word leaf's gradient
        for i, pid in enumerate(graph.params):
            if isinstance(pid, int):
                graph.params[i] = pid + 10_000_000
                break
    if loss_kind == "margin":
        loss = build_margin_sample_loss(
            graph, u, v, sample.label == ENTAILMENT, cfg.alpha, cfg.beta, c
        )
    else:
        features = build_feature_node(graph, feature_spec, u, v, c)
        loss = build_ffnn_loss(graph, state.ffnn, features, sample.label)
    return graph, loss


# ---------------------------------------------------------------------------
# direct (tape-free) evaluation
# ---------------------------------------------------------------------------


def compose_sample(state, sample):
    _, method, _ = MODELS[state.config.model]
    u = compose.compose(method, (sample.premise_tokens, sample.premise_arrays),
                        state.embeddings, state.space)
    v = compose.compose(method, (sample.hypothesis_tokens, sample.hypothesis_arrays),
                        state.embeddings, state.space)
    return u, v


def margin_scores(state, samples):
    beta = state.config.beta
    scores = np.empty(len(samples))
    for i, sample in enumerate(samples):
        u, v = compose_sample(state, sample)
        scores[i] = model.pair_energy(u, v, beta, state.space)
    return scores


def evaluate_split(state, samples, feature_spec=None, threshold=None):
    """Metrics for one sample list; margin models need a threshold (or
    compute one from these very samples when none is given)."""
    if not samples:
        raise ValueError("cannot evaluate an empty sample list")
    cfg = state.config
    loss_kind, _, _ = MODELS[cfg.model]
    gold = [s.label for s in samples]
    if loss_kind == "margin":
        scores = margin_scores(state, samples)
        if threshold is None:
            threshold, _ = model.select_threshold(
                scores, [g == ENTAILMENT for g in gold]
            )
        preds = [ENTAILMENT if s < threshold else 1 for s in scores]
        report = metrics.evaluate(preds, gold, cfg.classes)
        return report, threshold
    spec = feature_spec or model.FeatureSpec.parse(cfg.feature_string())
    preds = []
    for sample in samples:
        u, v = compose_sample(state, sample)
        probs = model.ffnn_forward(state.ffnn, model.build_features(u, v, spec, state.space))
        preds.append(int(np.argmax(probs)))
    report = metrics.evaluate(preds, gold, cfg.classes)
    return report, None


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    state: ModelState  # best-validation snapshot
    log: list = field(default_factory=list)


def init_state(config, vocab):
    rng = np.random.default_rng(config.seed)
    space = CurvatureSpace(config.dim, config.curvature)
    vectors = rng.uniform(-0.001, 0.001, size=(len(vocab), config.dim))
    for i in range(vectors.shape[0]):
        vectors[i] = kernels.project_ball(space.c, vectors[i])
    _, _, uses_ffnn = MODELS[config.model]
    ffnn = None
    if uses_ffnn:
        spec = model.FeatureSpec.parse(config.feature_string())
        ffnn = model.FfnnParams.init(spec.length(config.dim), config.classes, rng,
                                     hidden=config.hidden)
    return ModelState(config, space, vocab, vectors, ffnn), rng


def _apply_updates(state, record, lr):
    """RSGD for embeddings, plain SGD for dense params; enforces the ball."""
    c = state.config.curvature
    violations = 0
    for wid, grad in record.words.items():
        updated = kernels.rsgd_update(c, state.embeddings[wid], grad, lr)
        if c > 0.0 and c * float(updated @ updated) >= 1.0:
            violations += 1
        state.embeddings[wid] = updated
    for name, grad in record.dense.items():
        kernels.sgd_update(getattr(state.ffnn, name), grad, lr)
    if violations:
        raise NumericalError(f"{violations} embedding(s) escaped the ball after an update")
    return violations


def _check_tree_requirement(config, samples):
    _, method, _ = MODELS[config.model]
    if method is CompositionMethod.TREE_MOBIUS:
        missing = sum(1 for s in samples if not s.has_trees)
        if missing:
            raise ConfigError(
                f"{config.model} needs parse trees but {missing} sample(s) have none "
                "(TSV data supports chain compositions only)"
            )


def train(config, split, log_sink=None):
    """Train on a DatasetSplit and return the best-validation snapshot.

    Appends one JSON-serializable record per epoch (including epoch 0,
    the untrained parameters) to the log; ``log_sink``, when given, is
    called with each record as it is produced.
    """
    config = config.validated()
    for samples in (split.train, split.validation, split.test):
        if not samples:
            raise ConfigError("train/validation/test must all be non-empty")
    _check_tree_requirement(config, split.train)
    _check_tree_requirement(config, split.validation)
    _check_tree_requirement(config, split.test)

    loss_kind, _, _ = MODELS[config.model]
    feature_spec = (model.FeatureSpec.parse(config.feature_string())
                    if loss_kind == "cross_entropy" else None)
    state, rng = init_state(config, split.vocab)

    log = []

    def emit(record):
        log.append(record)
        if log_sink is not None:
            log_sink(record)

    emit({"config": config.to_dict(), "vocab_size": len(split.vocab),
          "train_size": len(split.train), "validation_size": len(split.validation),
          "test_size": len(split.test)})

    best = None
    best_val = -1.0

    def eval_epoch(epoch, train_loss):
        val_report, threshold = evaluate_split(state, split.validation, feature_spec)
        test_report, _ = evaluate_split(state, split.test, feature_spec,
                                        threshold=threshold)
        record = {
            "epoch": epoch,
            "train_loss": train_loss,
            "val_accuracy": val_report.accuracy,
            "test_accuracy": test_report.accuracy,
            "test_f1": test_report.f1,
            "ball_violations": 0,
        }
        if threshold is not None:
            record["threshold"] = threshold
        emit(record)
        return val_report.accuracy, threshold

    def consider_best(epoch, val_accuracy, threshold):
        nonlocal best, best_val
        if val_accuracy >= best_val:  # ties go to the later (more converged) epoch
            best_val = val_accuracy
            state.threshold = threshold
            state.best_epoch = epoch
            best = state.snapshot()

    val_acc, threshold = eval_epoch(0, None)
    consider_best(0, val_acc, threshold)

    positives = [s for s in split.train if s.label == ENTAILMENT]
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(split.train))
        total = 0.0
        disentangle = epoch <= config.disentangle_epochs
        for idx in order:
            sample = split.train[idx]
            if disentangle:
                loss_value = _disentangle_step(state, sample, positives, rng)
                if loss_value is None:
                    continue
            else:
                graph, loss_node = build_sample_graph(state, sample, feature_spec)
                loss_value = graph.values[loss_node]
                if not math.isfinite(loss_value):
                    raise NumericalError(
                        f"non-finite loss {loss_value!r} at epoch {epoch}, sample {int(idx)}"
                    )
                record = backward(graph, loss_node)
                _apply_updates(state, record, config.lr)
            total += loss_value
        val_acc, threshold = eval_epoch(epoch, total / max(len(split.train), 1))
        consider_best(epoch, val_acc, threshold)

    return TrainResult(state=best, log=log)


def _disentangle_step(state, sample, positives, rng):
    """Embedding pre-training step on one entailing pair; None = skipped."""
    if sample.label != ENTAILMENT or not positives:
        return None
    cfg = state.config
    _, method, _ = MODELS[cfg.model]
    c = cfg.curvature
    graph = Graph()

    def get_vec(wid):
        return state.embeddings[wid]

    u = build_sentence_node(graph, method, sample.premise_tokens,
                            sample.premise_arrays, get_vec, c)
    v = build_sentence_node(graph, method, sample.hypothesis_tokens,
                            sample.hypothesis_arrays, get_vec, c)
    negatives = []
    for _ in range(cfg.disentangle_negatives):
        other = positives[int(rng.integers(len(positives)))]
        nu = build_sentence_node(graph, method, other.premise_tokens,
                                 other.premise_arrays, get_vec, c)
        nv = build_sentence_node(graph, method, other.hypothesis_tokens,
                                 other.hypothesis_arrays, get_vec, c)
        negatives.append((nu, nv))
    loss_node = build_disentangle_loss(graph, (u, v), negatives, c)
    loss_value = graph.values[loss_node]
    if not math.isfinite(loss_value):
        raise NumericalError(f"non-finite disentanglement loss {loss_value!r}")
    record = backward(graph, loss_node)
    _apply_updates(state, record, cfg.lr)
    return loss_value


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def state_to_checkpoint(state):
    ffnn = None
    if state.ffnn is not None:
        ffnn = {
            "W_hidden": state.ffnn.W_hidden.tolist(),
            "b_hidden": state.ffnn.b_hidden.tolist(),
            "W_out": state.ffnn.W_out.tolist(),
            "b_out": state.ffnn.b_out.tolist(),
        }
    return {
        "format_version": CHECKPOINT_VERSION,
        "config": state.config.to_dict(),
        "token_normalization": "lowercase",
        "activation": "relu",
        "vocab": list(state.vocab.id_to_token),
        "embeddings": state.embeddings.tolist(),
        "ffnn": ffnn,
        "threshold": state.threshold,
        "best_epoch": state.best_epoch,
    }


def save_checkpoint(path, state):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(state_to_checkpoint(state), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    version = raw.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {version!r}")
    config = RunConfig.from_dict(raw["config"])
    vocab = Vocab()
    for token in raw["vocab"][1:]:
        vocab.add(token)
    embeddings = np.asarray(raw["embeddings"], dtype=np.float64)
    if embeddings.shape != (len(vocab), config.dim):
        raise ConfigError(
            f"embedding matrix {embeddings.shape} does not match vocab "
            f"{len(vocab)} x dim {config.dim}"
        )
    ffnn = None
    if raw["ffnn"] is not None:
        ffnn = model.FfnnParams(
            W_hidden=np.asarray(raw["ffnn"]["W_hidden"], dtype=np.float64),
            b_hidden=np.asarray(raw["ffnn"]["b_hidden"], dtype=np.float64),
            W_out=np.asarray(raw["ffnn"]["W_out"], dtype=np.float64),
            b_out=np.asarray(raw["ffnn"]["b_out"], dtype=np.float64),
        )
    return ModelState(
        config=config,
        space=CurvatureSpace(config.dim, config.curvature),
        vocab=vocab,
        embeddings=embeddings,
        ffnn=ffnn,
        threshold=raw["threshold"],
        best_epoch=raw["best_epoch"],
    )


# ---------------------------------------------------------------------------
# gradient-check harness
# ---------------------------------------------------------------------------

GRADCHECK_COMBOS = []
for _method in ("TREE", "LEFT", "RIGHT"):
    GRADCHECK_COMBOS.append(("margin", _method, None))
for _method in ("TREE", "LEFT", "RIGHT", "MA"):
    for _spec in ("u,v,mdiff,dist", "u,v,absmdiff,cos", "u,v,mdiff,cos,dist"):
        GRADCHECK_COMBOS.append(("cross_entropy", _method, _spec))
for _method in ("EA", "ES"):
    for _spec in ("u,v,absdiff,hadamard", "u,v,absdiff,hadamard,dot,edist"):
        GRADCHECK_COMBOS.append(("cross_entropy", _method, _spec))
    GRADCHECK_COMBOS.append(("order", _method, None))
for _method in ("TREE", "LEFT", "RIGHT", "MA"):
    GRADCHECK_COMBOS.append(("disentangle", _method, None))

_GRADCHECK_METHODS = {
    "TREE": CompositionMethod.TREE_MOBIUS,
    "LEFT": CompositionMethod.LEFT_CHAIN,
    "RIGHT": CompositionMethod.RIGHT_CHAIN,
    "MA": CompositionMethod.MOBIUS_AVERAGE,
    "EA": CompositionMethod.EUCLIDEAN_AVERAGE,
    "ES": CompositionMethod.EUCLIDEAN_SUM,
}


def _random_tree_arrays(rng, word_ids):
    """Random binary bracketing over the given leaf tokens."""
    def build(tokens):
        if len(tokens) == 1:
            return treeparse.TreeNode(token=f"t{tokens[0]}", word_id=tokens[0])
        cut = int(rng.integers(1, len(tokens)))
        return treeparse.TreeNode(left=build(tokens[:cut]), right=build(tokens[cut:]))

    return treeparse.post_order_arrays(build(list(word_ids)))


def gradcheck_trial(combo, rng, h=1e-5, corrupt=False):
    """Build one random configuration and return its worst relative error."""
    loss_kind, method_name, spec_text = combo
    method = _GRADCHECK_METHODS[method_name]
    euclidean = method in (CompositionMethod.EUCLIDEAN_AVERAGE,
                           CompositionMethod.EUCLIDEAN_SUM)
    dim = int(rng.integers(2, 11))
    c = 0.0 if euclidean else float(rng.choice([1.0, 0.1]))
    n_p = int(rng.integers(1, 8))
    n_h = int(rng.integers(1, 8))
    # small per-side pools force repeated words (gradient accumulation), but
    # the sides stay disjoint: a token used on both sides of a difference-only
    # loss has an exactly-zero gradient, which central differences can only
    # measure as rounding noise
    pool_p = max(2, n_p - 1)
    pool_h = max(2, n_h - 1)
    premise = [int(w) for w in rng.integers(0, pool_p, size=n_p)]
    hypothesis = [int(w) + pool_p for w in rng.integers(0, pool_h, size=n_h)]
    pool = pool_p + pool_h
    scale = 0.4 if c == 0.0 else 0.4 / math.sqrt(c)
    params = {}
    for wid in set(premise) | set(hypothesis):
        vec = rng.uniform(-1.0, 1.0, size=dim)
        params[wid] = vec * (scale * rng.uniform(0.1, 1.0) / max(np.linalg.norm(vec), 1e-9))

    p_arrays = _random_tree_arrays(rng, premise) if method_name in ("TREE", "MA") else None
    h_arrays = _random_tree_arrays(rng, hypothesis) if method_name in ("TREE", "MA") else None
    positive = bool(rng.integers(0, 2))
    alpha = 0.05
    beta = 0.5

    spec = model.FeatureSpec.parse(spec_text) if spec_text else None
    ffnn = None
    if loss_kind == "cross_entropy":
        classes = int(rng.choice([2, 3]))
        gold = int(rng.integers(classes))
        ffnn = model.FfnnParams.init(spec.length(dim), classes, rng, hidden=8)
        params["W_hidden"] = ffnn.W_hidden
        params["b_hidden"] = ffnn.b_hidden
        params["W_out"] = ffnn.W_out
        params["b_out"] = ffnn.b_out

    extra_pairs = []
    if loss_kind == "disentangle":
        def negative_tokens():
            toks = [int(w) for w in rng.integers(0, pool, size=int(rng.integers(1, 4)))]
            for wid in toks:
                if wid not in params:
                    vec = rng.uniform(-1.0, 1.0, size=dim)
                    params[wid] = vec * (scale * rng.uniform(0.1, 1.0)
                                         / max(np.linalg.norm(vec), 1e-9))
            return toks

        for _ in range(int(rng.integers(1, 4))):
            side_a = negative_tokens()
            side_b = negative_tokens()
            while side_b == side_a:  # identical sides make a constant-zero distance
                side_b = negative_tokens()
            if method_name == "TREE":
                extra_pairs.append((side_a, _random_tree_arrays(rng, side_a),
                                    side_b, _random_tree_arrays(rng, side_b)))
            else:
                extra_pairs.append((side_a, None, side_b, None))

    def build(p):
        graph = Graph()

        def get_vec(wid):
            return p[wid]

        u = build_sentence_node(graph, method, premise, p_arrays, get_vec, c)
        v = build_sentence_node(graph, method, hypothesis, h_arrays, get_vec, c)
        if corrupt:
            for i, pid in enumerate(graph.params):
                if isinstance(pid, int):
                    graph.params[i] = pid + 10_000_000
                    break
        if loss_kind == "margin":
            loss = build_margin_sample_loss(graph, u, v, positive, alpha, beta, c)
        elif loss_kind == "order":
            loss = build_order_sample_loss(graph, u, v, positive, alpha)
        elif loss_kind == "disentangle":
            pairs = []
            for toks_u, arr_u, toks_v, arr_v in extra_pairs:
                nu = build_sentence_node(graph, method, toks_u, arr_u, get_vec, c)
                nv = build_sentence_node(graph, method, toks_v, arr_v, get_vec, c)
                pairs.append((nu, nv))
            loss = build_disentangle_loss(graph, (u, v), pairs, c)
        else:
            w1 = graph.leaf(p["W_hidden"], param="W_hidden")
            b1 = graph.leaf(p["b_hidden"], param="b_hidden")
            w2 = graph.leaf(p["W_out"], param="W_out")
            b2 = graph.leaf(p["b_out"], param="b_out")
            feats = build_feature_node(graph, spec, u, v, c)
            hidden_node = graph.relu(graph.affine(w1, b1, feats))
            logits = graph.affine(w2, b2, hidden_node)
            loss = graph.softmax_ce(logits, gold)
        return graph, loss

    if loss_kind in ("margin", "order"):
        graph, loss = build(params)
        if graph.values[loss] == 0.0:
            # inactive hinge: identically-zero loss leaves nothing to measure
            positive = True
    return finite_diff_check(build, params, h)


def run_gradcheck(trials=100, seed=0, h=1e-5, corrupt=False):
    """Cycle the combination grid for `trials` rounds; returns a report dict."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_combo = None
    per_combo = {}
    for t in range(trials):
        combo = GRADCHECK_COMBOS[t % len(GRADCHECK_COMBOS)]
        err = gradcheck_trial(combo, rng, h=h, corrupt=corrupt)
        key = "/".join(str(x) for x in combo if x is not None)
        per_combo[key] = max(per_combo.get(key, 0.0), err)
        if err > worst:
            worst = err
            worst_combo = key
    return {
        "trials": trials,
        "seed": seed,
        "h": h,
        "max_relative_error": worst,
        "worst_combination": worst_combo,
        "per_combination": dict(sorted(per_combo.items())),
    }
