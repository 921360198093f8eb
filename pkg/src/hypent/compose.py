"""Sentence representations from word embeddings.

Six methods: post-order tree summation, the two chain summations,
gyro-averaging, and Euclidean averaging/summation.  The chain naming
follows the summation equations, which is counter-intuitive: the "left"
chain is right-parenthesized, ``w1 (+) (w2 (+) (... (+) wN))``, and the
"right" chain is left-parenthesized, ``((w1 (+) w2) (+) ...) (+) wN``.
"""

import enum

import numpy as np

from .backend import kernels


class CompositionMethod(enum.Enum):
    TREE_MOBIUS = "tree_mobius"
    LEFT_CHAIN = "left_chain"
    RIGHT_CHAIN = "right_chain"
    MOBIUS_AVERAGE = "mobius_average"
    EUCLIDEAN_AVERAGE = "euclidean_average"
    EUCLIDEAN_SUM = "euclidean_sum"


HYPERBOLIC_METHODS = frozenset(
    {
        CompositionMethod.TREE_MOBIUS,
        CompositionMethod.LEFT_CHAIN,
        CompositionMethod.RIGHT_CHAIN,
        CompositionMethod.MOBIUS_AVERAGE,
    }
)

TREE_METHODS = frozenset({CompositionMethod.TREE_MOBIUS})


def compose_tree(arrays, embeddings, space):
    """Evaluate the post-order arrays bottom-up; each internal node is the
    gyro-sum of its children, and the root value is the sentence."""
    c = space.c
    n = len(arrays)
    values = [None] * n
    is_leaf = arrays.is_leaf
    left = arrays.left
    right = arrays.right
    word_ids = arrays.word_ids
    for i in range(n):
        if is_leaf[i]:
            wid = word_ids[i]
            if wid < 0 or wid >= embeddings.shape[0]:
                raise KeyError(f"word id {wid} missing from the embedding table")
            values[i] = embeddings[wid]
        else:
            values[i] = kernels.mobius_add(c, values[left[i]], values[right[i]])
    return values[n - 1]


def compose_chain(tokens, embeddings, space, direction):
    """Chain gyro-summation; ``direction`` is "left" or "right" (see module
    docstring for the parenthesization each one denotes)."""
    if len(tokens) == 0:
        raise ValueError("cannot compose an empty token sequence")
    c = space.c
    if direction == "left":
        acc = embeddings[tokens[-1]]
        for wid in reversed(tokens[:-1]):
            acc = kernels.mobius_add(c, embeddings[wid], acc)
    elif direction == "right":
        acc = embeddings[tokens[0]]
        for wid in tokens[1:]:
            acc = kernels.mobius_add(c, acc, embeddings[wid])
    else:
        raise ValueError(f"direction must be 'left' or 'right', got {direction!r}")
    return acc


def compose_mobius_average(arrays, embeddings, space, n_tokens):
    """Tree gyro-sum scaled by 1/N along its geodesic ray."""
    root = compose_tree(arrays, embeddings, space)
    return kernels.mobius_scalar_mul(space.c, 1.0 / n_tokens, root)


def compose_euclidean(tokens, embeddings, mode="average"):
    """Coordinate-wise sum of the token embeddings, divided by N in
    average mode."""
    if len(tokens) == 0:
        raise ValueError("cannot compose an empty token sequence")
    total = embeddings[tokens[0]].copy()
    for wid in tokens[1:]:
        total = total + embeddings[wid]
    if mode == "average":
        # multiply by the reciprocal: keeps the training tape bit-identical
        return (1.0 / len(tokens)) * total
    if mode == "sum":
        return total
    raise ValueError(f"mode must be 'average' or 'sum', got {mode!r}")


def compose(method, sample_side, embeddings, space):
    """Dispatch on the composition method for one sentence.

    ``sample_side`` carries ``tokens`` (id list) and optionally ``arrays``
    (post-order encoding); tree methods require the arrays.
    """
    tokens, arrays = sample_side
    if method is CompositionMethod.TREE_MOBIUS:
        if arrays is None:
            raise ValueError("tree composition requires a parse tree")
        return compose_tree(arrays, embeddings, space)
    if method is CompositionMethod.LEFT_CHAIN:
        return compose_chain(tokens, embeddings, space, "left")
    if method is CompositionMethod.RIGHT_CHAIN:
        return compose_chain(tokens, embeddings, space, "right")
    if method is CompositionMethod.MOBIUS_AVERAGE:
        if arrays is not None:
            return compose_mobius_average(arrays, embeddings, space, len(tokens))
        chain = compose_chain(tokens, embeddings, space, "left")
        return kernels.mobius_scalar_mul(space.c, 1.0 / len(tokens), chain)
    if method is CompositionMethod.EUCLIDEAN_AVERAGE:
        return compose_euclidean(tokens, embeddings, "average")
    if method is CompositionMethod.EUCLIDEAN_SUM:
        return compose_euclidean(tokens, embeddings, "sum")
    raise ValueError(f"unknown composition method {method!r}")
