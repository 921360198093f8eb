"""Binary constituency trees from S-expression text, and their array encoding.

The accepted format is the parenthesized, space-delimited style used by
the ``sentence*_binary_parse`` fields of NLI corpora, e.g.
``( ( It is ) ( raining today ) )``.  A bare token is a one-leaf tree.
Penn-style trees with node labels can be read with ``penn_labels=True``
(labels are discarded; only the bracket structure matters).  The two
styles cannot be auto-detected reliably: ``( X y )`` is a two-leaf node
in the plain style but a labeled preterminal in Penn style.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParseError


@dataclass
class TreeNode:
    """Binary tree node: leaves carry a token, internal nodes two children."""

    token: str | None = None
    word_id: int = -1
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self):
        return self.left is None and self.right is None


@dataclass
class TraversalArrays:
    """Post-order array encoding of a binary tree.

    All arrays have length 2L-1 for L leaves; children indices precede
    their parent and the root sits at the last index.  ``left``/``right``
    are -1 for leaves, ``word_ids`` is -1 for internal nodes.
    """

    is_leaf: np.ndarray
    left: np.ndarray
    right: np.ndarray
    word_ids: np.ndarray

    @property
    def root_index(self):
        return len(self.is_leaf) - 1

    def __len__(self):
        return len(self.is_leaf)


def _tokenize(text):
    """Split into ``(``, ``)`` and symbol tokens, each with its byte offset."""
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            tokens.append((ch, i))
            i += 1
        else:
            start = i
            while i < n and not text[i].isspace() and text[i] not in "()":
                i += 1
            tokens.append((text[start:i], start))
    return tokens


def _read_nested(text):
    """Parse to nested lists of raw token strings, checking balance."""
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty parse string", 0)
    stack = [[]]
    opens = []
    for tok, off in tokens:
        if tok == "(":
            stack.append([])
            opens.append(off)
        elif tok == ")":
            if not opens:
                raise ParseError("unbalanced ')'", off)
            done = stack.pop()
            opens.pop()
            if not done:
                raise ParseError("empty '()' group", off)
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if opens:
        raise ParseError("unbalanced '(': missing closing parenthesis", len(text))
    top = stack[0]
    if len(top) != 1:
        # e.g. "a b" or ") ("-free juxtaposed groups: not a single tree
        raise ParseError("expected a single tree", len(text))
    return top[0]


def _strip_labels(node):
    """Drop Penn-style labels: '(X child...)' keeps only the children."""
    if isinstance(node, str):
        return node
    if len(node) >= 2 and isinstance(node[0], str):
        rest = [_strip_labels(ch) for ch in node[1:]]
        return rest[0] if len(rest) == 1 else rest
    stripped = [_strip_labels(ch) for ch in node]
    return stripped[0] if len(stripped) == 1 else stripped


def binarize(tree):
    """Fold an n-ary nested-list tree into a left-branching binary TreeNode.

    ``(a b c)`` becomes ``((a b) c)``; unary chains collapse to the child.
    """
    if isinstance(tree, str):
        return TreeNode(token=tree)
    if len(tree) == 0:
        raise ValueError("internal node with no children")
    if len(tree) == 1:
        return binarize(tree[0])
    node = binarize(tree[0])
    for child in tree[1:]:
        node = TreeNode(left=node, right=binarize(child))
    return node


def parse_sexpr(text, vocab=None, penn_labels=False):
    """Parse S-expression text into a binary tree with lowercased tokens.

    Unknown tokens map to the UNK id when a vocab is given; without one,
    word ids stay -1.  Malformed input raises ParseError with the byte
    offset of the defect.
    """
    nested = _read_nested(text)
    if penn_labels:
        nested = _strip_labels(nested)
    tree = binarize(nested)
    for leaf in iter_leaves(tree):
        leaf.token = leaf.token.lower()
        if vocab is not None:
            leaf.word_id = vocab.id_of(leaf.token)
    return tree


def iter_leaves(tree):
    """Yield leaves in left-to-right sentence order."""
    if tree.is_leaf:
        yield tree
    else:
        yield from iter_leaves(tree.left)
        yield from iter_leaves(tree.right)


def leaf_tokens(tree):
    return [leaf.token for leaf in iter_leaves(tree)]


def post_order_arrays(tree):
    """Encode a binary tree as post-order arrays (children before parents)."""
    is_leaf = []
    left = []
    right = []
    word_ids = []

    def visit(node):
        if node.is_leaf:
            is_leaf.append(True)
            left.append(-1)
            right.append(-1)
            word_ids.append(node.word_id)
        else:
            li = visit(node.left)
            ri = visit(node.right)
            is_leaf.append(False)
            left.append(li)
            right.append(ri)
            word_ids.append(-1)
        return len(is_leaf) - 1

    visit(tree)
    return TraversalArrays(
        is_leaf=np.array(is_leaf, dtype=bool),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        word_ids=np.array(word_ids, dtype=np.int64),
    )
