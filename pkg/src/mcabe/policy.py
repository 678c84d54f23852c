"""Access trees: parsing, pretty-printing, satisfaction and share distribution.

Policy grammar (keywords are case-insensitive)::

    policy  := or_expr
    or_expr := and_expr ( "OR" and_expr )*
    and_expr:= atom ( "AND" atom )*
    atom    := ATTR
             | "(" policy ")"
             | "THRESH" "(" INT ";" policy ( "," policy )* ")"
    ATTR    := [A-Za-z_][A-Za-z0-9_.:@-]*   (not a keyword)

``AND`` binds tighter than ``OR``.  A chain ``a AND b AND c`` is one 3-of-3
gate; parentheses always introduce their own node.  Child order in the text
fixes each child's 1-based index.

Nodes are addressed by *paths*: the tuple of child indices from the root
(the root itself is ``()``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

from .algebra import ORDER, lagrange_coeff
from .errors import PolicySyntaxError

Path = tuple[int, ...]


@dataclass(frozen=True)
class Leaf:
    attribute: str
    index: int = 1


@dataclass(frozen=True)
class Gate:
    threshold: int
    children: tuple["Node", ...]
    index: int = 1

    def __post_init__(self):
        if not self.children:
            raise ValueError("gate has no children")
        if not 1 <= self.threshold <= len(self.children):
            raise ValueError(
                f"threshold {self.threshold} outside 1..{len(self.children)}"
            )
        for pos, child in enumerate(self.children, start=1):
            if child.index != pos:
                raise ValueError(f"child at position {pos} has index {child.index}")


Node = Union[Leaf, Gate]


@dataclass(frozen=True)
class AccessTree:
    root: Node

    def __post_init__(self):
        for _, leaf in self.leaves():
            if not leaf.attribute:
                raise ValueError("empty attribute name")

    def leaves(self) -> list[tuple[Path, Leaf]]:
        """Leaves in depth-first, left-to-right order."""
        return list(_walk_leaves(self.root, ()))

    def node(self, path: Path) -> Node:
        n = self.root
        for i in path:
            n = n.children[i - 1]
        return n

    def attributes(self) -> set[str]:
        return {leaf.attribute for _, leaf in self.leaves()}

    def __str__(self) -> str:
        return pretty(self)


def _walk_leaves(node: Node, path: Path) -> Iterator[tuple[Path, Leaf]]:
    if isinstance(node, Leaf):
        yield path, node
    else:
        for child in node.children:
            yield from _walk_leaves(child, path + (child.index,))


def _reindex(node: Node, index: int) -> Node:
    if isinstance(node, Leaf):
        return Leaf(node.attribute, index)
    return Gate(node.threshold, node.children, index)


def make_gate(threshold: int, children: list[Node], index: int = 1) -> Gate:
    """Build a gate, renumbering children 1..n in the given order."""
    return Gate(threshold, tuple(_reindex(c, i) for i, c in enumerate(children, 1)), index)


# ---------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)\b|(?P<ident>[A-Za-z_][A-Za-z0-9_.:@-]*)|(?P<punct>[(),;]))"
)
_KEYWORDS = {"AND", "OR", "THRESH"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise PolicySyntaxError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        value = m.group(kind)
        start = m.start(kind)
        if kind == "ident" and value.upper() in _KEYWORDS:
            kind, value = "kw", value.upper()
        tokens.append((kind, value, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind: str, value: str | None = None):
        tok = self.peek()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            got = tok[1] or "end of input"
            raise PolicySyntaxError(f"expected {want!r}, found {got!r}", tok[2])
        self.i += 1
        return tok

    def policy(self) -> Node:
        parts = [self.and_expr()]
        while self.peek()[:2] == ("kw", "OR"):
            self.i += 1
            parts.append(self.and_expr())
        return parts[0] if len(parts) == 1 else make_gate(1, parts)

    def and_expr(self) -> Node:
        parts = [self.atom()]
        while self.peek()[:2] == ("kw", "AND"):
            self.i += 1
            parts.append(self.atom())
        return parts[0] if len(parts) == 1 else make_gate(len(parts), parts)

    def atom(self) -> Node:
        kind, value, pos = self.peek()
        if kind == "ident":
            self.i += 1
            return Leaf(value)
        if (kind, value) == ("punct", "("):
            self.i += 1
            if self.peek()[:2] == ("punct", ")"):
                raise PolicySyntaxError("empty group", self.peek()[2])
            node = self.policy()
            self.take("punct", ")")
            return node
        if (kind, value) == ("kw", "THRESH"):
            self.i += 1
            self.take("punct", "(")
            _, num, num_pos = self.take("num")
            k = int(num)
            self.take("punct", ";")
            children = [self.policy()]
            while self.peek()[:2] == ("punct", ","):
                self.i += 1
                children.append(self.policy())
            self.take("punct", ")")
            if not 1 <= k <= len(children):
                raise PolicySyntaxError(
                    f"threshold {k} outside 1..{len(children)}", num_pos
                )
            return make_gate(k, children)
        got = value or "end of input"
        raise PolicySyntaxError(f"unexpected {got!r}", pos)


def parse_policy(text: str) -> AccessTree:
    if not text or not text.strip():
        raise PolicySyntaxError("empty policy", 0)
    parser = _Parser(text)
    root = parser.policy()
    kind, value, pos = parser.peek()
    if kind != "end":
        raise PolicySyntaxError(f"unexpected {value!r}", pos)
    return AccessTree(_reindex(root, 1))


def pretty(tree: AccessTree) -> str:
    """Canonical text form; ``parse_policy(pretty(t)) == t``."""
    return _pretty(tree.root)


def _pretty(node: Node) -> str:
    if isinstance(node, Leaf):
        return node.attribute
    n = len(node.children)
    parts = [_pretty(c) for c in node.children]
    if n > 1 and node.threshold == n:
        return "(" + " AND ".join(parts) + ")"
    if n > 1 and node.threshold == 1:
        return "(" + " OR ".join(parts) + ")"
    return f"THRESH({node.threshold}; " + ", ".join(parts) + ")"


# ---------------------------------------------------------------------------
# Satisfaction


@dataclass(frozen=True)
class Selection:
    """A satisfying choice: k_x child indices per used gate, plus the used leaves."""

    gates: dict[Path, tuple[int, ...]]
    leaves: dict[Path, str]


def check_satisfy(tree: AccessTree, attrs) -> Selection | None:
    """Lowest-index satisfying selection, or None if ``attrs`` does not satisfy."""
    attrs = frozenset(attrs)
    gates: dict[Path, tuple[int, ...]] = {}
    leaves: dict[Path, str] = {}
    if not _select(tree.root, (), attrs, gates, leaves):
        return None
    return Selection(gates, leaves)


def _satisfiable(node: Node, attrs: frozenset) -> bool:
    if isinstance(node, Leaf):
        return node.attribute in attrs
    hits = 0
    for child in node.children:
        if _satisfiable(child, attrs):
            hits += 1
            if hits == node.threshold:
                return True
    return False


def _select(node, path, attrs, gates, leaves) -> bool:
    if not _satisfiable(node, attrs):
        return False
    if isinstance(node, Leaf):
        leaves[path] = node.attribute
        return True
    chosen = []
    for child in node.children:
        if len(chosen) == node.threshold:
            break
        if _satisfiable(child, attrs):
            _select(child, path + (child.index,), attrs, gates, leaves)
            chosen.append(child.index)
    gates[path] = tuple(chosen)
    return True


def enumerate_selections(tree: AccessTree, attrs) -> Iterator[Selection]:
    """Every satisfying selection (all k_x-subsets of satisfiable children)."""
    from itertools import combinations, product

    attrs = frozenset(attrs)

    def rec(node, path):
        if isinstance(node, Leaf):
            if node.attribute in attrs:
                yield {}, {path: node.attribute}
            return
        ok = [c for c in node.children if _satisfiable(c, attrs)]
        for subset in combinations(ok, node.threshold):
            subs = [list(rec(c, path + (c.index,))) for c in subset]
            for combo in product(*subs):
                g = {path: tuple(c.index for c in subset)}
                lv = {}
                for cg, cl in combo:
                    g.update(cg)
                    lv.update(cl)
                yield g, lv

    for g, lv in rec(tree.root, ()):
        yield Selection(g, lv)


# ---------------------------------------------------------------------------
# Secret sharing down the tree


@dataclass
class ShareMap:
    """q_y(0) for every leaf path; gate polynomials only if retained."""

    shares: dict[Path, int]
    polynomials: dict[Path, list[int]] = field(default_factory=dict)


def _eval_poly(coeffs: list[int], x: int, order: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % order
    return acc


def share_secret(
    tree: AccessTree, s: int, rng, order: int = ORDER, keep_polynomials: bool = False
) -> ShareMap:
    """Top-down assignment of q_x with q_R(0) = s and deg q_x = k_x - 1."""
    out = ShareMap({})

    def rec(node: Node, path: Path, value: int):
        if isinstance(node, Leaf):
            out.shares[path] = value
            return
        coeffs = [value] + [rng.randrange(order) for _ in range(node.threshold - 1)]
        if keep_polynomials:
            out.polynomials[path] = coeffs
        for child in node.children:
            rec(child, path + (child.index,), _eval_poly(coeffs, child.index, order))

    rec(tree.root, (), s % order)
    return out


def recover_secret(
    tree: AccessTree, selection: Selection, shares: dict[Path, int], order: int = ORDER
) -> int:
    """Recursively Lagrange-combine the selected leaf shares back to q_R(0)."""

    def rec(node: Node, path: Path) -> int:
        if isinstance(node, Leaf):
            return shares[path]
        chosen = selection.gates[path]
        return sum(
            rec(node.children[i - 1], path + (i,)) * lagrange_coeff(i, chosen, order)
            for i in chosen
        ) % order

    return rec(tree.root, ())
