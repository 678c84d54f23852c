"""Random access trees for property tests."""

from __future__ import annotations

import random

from hypothesis import strategies as st

from mcabe.policy import AccessTree, Leaf, _reindex, make_gate

ALPHABET = [f"a{i}" for i in range(8)]


def random_tree(rng: random.Random, max_depth: int = 4, max_leaves: int = 16,
                alphabet=ALPHABET) -> AccessTree:
    """Depth counts gate levels below the root; leaf count never exceeds ``max_leaves``."""

    def node(depth, budget):
        if depth >= max_depth or budget == 1 or rng.random() < (0.3 if depth else 0.05):
            return Leaf(rng.choice(alphabet)), 1
        n = rng.randint(1, min(4, budget))
        children, used = [], 0
        for i in range(n):
            # leave at least one leaf for each remaining sibling
            child, c = node(depth + 1, budget - used - (n - 1 - i))
            children.append(child)
            used += c
        return make_gate(rng.randint(1, n), children), used

    root, _ = node(0, max_leaves)
    return AccessTree(_reindex(root, 1))


def tree_depth(node, d=0) -> int:
    if isinstance(node, Leaf):
        return d
    return max(tree_depth(c, d + 1) for c in node.children)


def random_attrs(rng: random.Random, alphabet=ALPHABET) -> set[str]:
    return {a for a in alphabet if rng.random() < 0.5}


@st.composite
def trees(draw, max_depth: int = 4, max_leaves: int = 16):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_tree(random.Random(seed), max_depth, max_leaves)


@st.composite
def attr_sets(draw):
    return set(draw(st.sets(st.sampled_from(ALPHABET))))
