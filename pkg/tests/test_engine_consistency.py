"""The per-sample tape must agree with the direct evaluation path."""

import json
import math

import numpy as np
import pytest

from hypent import compose, data, engine, model
from hypent.autodiff import Graph
from hypent.compose import CompositionMethod
from hypent.data import write_tsv
from hypent.engine import RunConfig
from hypent.geometry import CurvatureSpace
from hypent.treeparse import TreeNode, post_order_arrays


def random_tree_arrays(rng, word_ids):
    def build(tokens):
        if len(tokens) == 1:
            return TreeNode(token="w", word_id=tokens[0])
        cut = int(rng.integers(1, len(tokens)))
        return TreeNode(left=build(tokens[:cut]), right=build(tokens[cut:]))

    return post_order_arrays(build(list(word_ids)))


class TestTapeMatchesDirectPath:
    @pytest.mark.parametrize("method", list(CompositionMethod))
    def test_sentence_values_bit_identical(self, method):
        rng = np.random.default_rng(90)
        c = 0.0 if method in (CompositionMethod.EUCLIDEAN_AVERAGE,
                              CompositionMethod.EUCLIDEAN_SUM) else 1.0
        space = CurvatureSpace(6, c)
        for _ in range(30):
            n_tokens = int(rng.integers(1, 8))
            emb = rng.uniform(-0.2, 0.2, size=(n_tokens, 6))
            tokens = list(range(n_tokens))
            arrays = (random_tree_arrays(rng, tokens)
                      if method in (CompositionMethod.TREE_MOBIUS,
                                    CompositionMethod.MOBIUS_AVERAGE) else None)
            direct = compose.compose(method, (tokens, arrays), emb, space)
            graph = Graph()
            node = engine.build_sentence_node(graph, method, tokens, arrays,
                                              lambda w: emb[w], c)
            np.testing.assert_array_equal(graph.value(node), direct)

    def test_mobius_average_chain_fallback(self):
        rng = np.random.default_rng(91)
        space = CurvatureSpace(4, 1.0)
        emb = rng.uniform(-0.2, 0.2, size=(3, 4))
        direct = compose.compose(CompositionMethod.MOBIUS_AVERAGE, ([0, 1, 2], None),
                                 emb, space)
        chain = compose.compose_chain([0, 1, 2], emb, space, "left")
        from hypent.backend import kernels
        np.testing.assert_array_equal(
            direct, kernels.mobius_scalar_mul(1.0, 1.0 / 3.0, chain)
        )

    def test_margin_loss_matches_direct(self):
        rng = np.random.default_rng(92)
        space = CurvatureSpace(5, 1.0)
        for _ in range(50):
            u = rng.uniform(-0.3, 0.3, 5)
            v = rng.uniform(-0.3, 0.3, 5)
            graph = Graph()
            ui = graph.leaf(u)
            vi = graph.leaf(v)
            pos = graph.values[engine.build_margin_sample_loss(
                graph, ui, vi, True, 0.05, 0.5, 1.0)]
            neg = graph.values[engine.build_margin_sample_loss(
                graph, ui, vi, False, 0.05, 0.5, 1.0)]
            assert pos == model.pair_energy(u, v, 0.5, space)
            assert neg == max(0.0, 0.05 - model.pair_energy(u, v, 0.5, space))

    def test_feature_vector_matches_direct(self):
        rng = np.random.default_rng(93)
        space = CurvatureSpace(5, 1.0)
        spec = model.FeatureSpec.parse("u,v,mdiff,absmdiff,hadamard,cos,dist,dot,edist")
        for _ in range(30):
            u = rng.uniform(-0.3, 0.3, 5)
            v = rng.uniform(-0.3, 0.3, 5)
            direct = model.build_features(u, v, spec, space)
            graph = Graph()
            node = engine.build_feature_node(graph, spec, graph.leaf(u), graph.leaf(v), 1.0)
            np.testing.assert_array_equal(graph.value(node), direct)

    def test_cross_entropy_matches_direct_forward(self):
        rng = np.random.default_rng(94)
        ffnn = model.FfnnParams.init(12, 3, rng, hidden=16)
        for _ in range(30):
            feats = rng.normal(size=12)
            gold = int(rng.integers(3))
            graph = Graph()
            loss_node = engine.build_ffnn_loss(graph, ffnn, graph.leaf(feats), gold)
            probs = model.ffnn_forward(ffnn, feats)
            assert abs(graph.values[loss_node] - model.cross_entropy(probs, gold)) < 1e-12

    def test_disentangle_matches_direct(self):
        rng = np.random.default_rng(95)
        space = CurvatureSpace(4, 1.0)
        for _ in range(30):
            pts = rng.uniform(-0.3, 0.3, size=(6, 4))
            graph = Graph()
            ids = [graph.leaf(p) for p in pts]
            loss_node = engine.build_disentangle_loss(
                graph, (ids[0], ids[1]), [(ids[2], ids[3]), (ids[4], ids[5])], 1.0
            )
            from hypent.backend import kernels
            d0 = kernels.hyp_dist(1.0, pts[0], pts[1])
            negs = [kernels.hyp_dist(1.0, pts[2], pts[3]),
                    kernels.hyp_dist(1.0, pts[4], pts[5])]
            assert abs(graph.values[loss_node] - model.disentangle_loss(d0, negs)) < 1e-12


@pytest.fixture(scope="module")
def tree_jsonl(tmp_path_factory):
    """Tiny tree-annotated corpus: entailment iff the hypothesis drops the
    premise's modifier, mirroring the adjective-noun construction."""
    rng = np.random.default_rng(96)
    root = tmp_path_factory.mktemp("trees")
    nouns = [f"n{i}" for i in range(8)]
    mods = [f"m{i}" for i in range(8)]
    records = []
    for _ in range(240):
        noun = nouns[int(rng.integers(8))]
        mod = mods[int(rng.integers(8))]
        if rng.integers(2):
            hyp_noun = noun
            label = "entailment"
        else:
            hyp_noun = nouns[(nouns.index(noun) + 1 + int(rng.integers(6))) % 8]
            label = "neutral"
        records.append({
            "premise_binary_parse": noun,
            "hypothesis_binary_parse": f"( {mod} {hyp_noun} )",
            "gold_label": label,
        })
    paths = {}
    for name, chunk in (("train", records[:160]), ("val", records[160:200]),
                        ("test", records[200:])):
        path = root / f"{name}.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            for record in chunk:
                fh.write(json.dumps(record) + "\n")
        paths[name] = path
    return paths


class TestTreeModels:
    def test_ms_margin_trains_on_trees(self, tree_jsonl):
        split = data.load_dataset(tree_jsonl["train"], tree_jsonl["test"],
                                  validation_path=tree_jsonl["val"],
                                  fmt="jsonl", classes=2)
        cfg = RunConfig(model="MS", dim=4, epochs=6, seed=2, lr=0.05)
        result = engine.train(cfg, split)
        best = next(r for r in result.log if r.get("epoch") == result.state.best_epoch)
        assert best["test_accuracy"] > 0.8  # separable toy task
        assert result.state.threshold is not None

    def test_ms_ffnn_trains_on_trees(self, tree_jsonl):
        split = data.load_dataset(tree_jsonl["train"], tree_jsonl["test"],
                                  validation_path=tree_jsonl["val"],
                                  fmt="jsonl", classes=2)
        cfg = RunConfig(model="MS_FFNN", dim=4, epochs=4, seed=2, lr=0.01)
        result = engine.train(cfg, split)
        assert all(math.isfinite(r["train_loss"]) for r in result.log[2:])

    def test_ma_ffnn_uses_tree_leaf_count(self, tree_jsonl):
        split = data.load_dataset(tree_jsonl["train"], tree_jsonl["test"],
                                  validation_path=tree_jsonl["val"],
                                  fmt="jsonl", classes=2)
        cfg = RunConfig(model="MA_FFNN", dim=4, epochs=1, seed=2, lr=0.01)
        result = engine.train(cfg, split)
        assert result.state.best_epoch >= 0


@pytest.fixture(scope="module")
def three_class_split(tmp_path_factory):
    rng = np.random.default_rng(97)
    root = tmp_path_factory.mktemp("three")
    labels = ("entailment", "neutral", "contradiction")
    rows = []
    for _ in range(180):
        label = labels[int(rng.integers(3))]
        # class-specific marker token makes the task learnable
        rows.append(([f"w{int(rng.integers(6))}"],
                     [f"mark_{label}", f"w{int(rng.integers(6))}"], label))
    write_tsv(root / "train.tsv", rows[:120])
    write_tsv(root / "val.tsv", rows[120:150])
    write_tsv(root / "test.tsv", rows[150:])
    return data.load_dataset(root / "train.tsv", root / "test.tsv",
                             validation_path=root / "val.tsv", classes=3)


class TestThreeClassTraining:
    def test_three_way_training_and_confusion(self, three_class_split):
        cfg = RunConfig(model="LMS_FFNN", dim=4, classes=3, epochs=8, seed=3, lr=0.02)
        result = engine.train(cfg, three_class_split)
        best = next(r for r in result.log if r.get("epoch") == result.state.best_epoch)
        assert best["test_f1"] is None
        report, _ = engine.evaluate_split(result.state, three_class_split.test)
        assert report.confusion.shape == (3, 3)
        assert report.precision is None
        assert report.accuracy == best["test_accuracy"]
        assert best["test_accuracy"] > 0.5  # marker token is learnable

    def test_three_way_euclidean_baseline(self, three_class_split):
        cfg = RunConfig(model="ES_FFNN", dim=4, curvature=0.0, classes=3,
                        epochs=2, seed=3, lr=0.02)
        result = engine.train(cfg, three_class_split)
        assert result.state.ffnn.classes == 3
