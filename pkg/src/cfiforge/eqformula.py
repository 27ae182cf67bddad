"""Quantifier-free equality formulas over two blocks of variables.

A formula speaks about a tuple x_1..x_k and a tuple y_1..y_l and can only
compare variables for equality.  Grammar, with insignificant whitespace and
"&" binding tighter than "|":

    formula := term ("|" term)*
    term    := factor ("&" factor)*
    factor  := "!" factor | "(" formula ")" | literal
    literal := VAR "=" VAR | VAR "!=" VAR
    VAR     := ("x" | "y") digits          (indices are 1-based)

Besides parsing and evaluation, the module extracts the 0/1 coefficient
matrix of a formula over [n]^k x [n]^l and decomposes a formula into the
complete equality types it covers.  Complete types are stored as partitions
of the k+l variable slots; slot i-1 is x_i and slot k+j-1 is y_j.
"""

from __future__ import annotations

import itertools
import json
from typing import Iterator, Mapping, Sequence

import numpy as np

from .caps import check_cap, load_caps
from .errors import InputError
from .gfp import PrimeFieldMatrix

Var = tuple[str, int]


class Literal:
    __slots__ = ("left", "right", "equal")

    def __init__(self, left: Var, right: Var, equal: bool):
        self.left = left
        self.right = right
        self.equal = equal

    def __eq__(self, other):
        if not isinstance(other, Literal):
            return NotImplemented
        return (self.left, self.right, self.equal) == (other.left, other.right, other.equal)

    def __hash__(self):
        return hash((Literal, self.left, self.right, self.equal))

    def __repr__(self):
        op = "=" if self.equal else "!="
        return f"Literal({_var_name(self.left)}{op}{_var_name(self.right)})"


class Not:
    __slots__ = ("child",)

    def __init__(self, child):
        self.child = child

    def __eq__(self, other):
        return isinstance(other, Not) and self.child == other.child

    def __hash__(self):
        return hash((Not, self.child))

    def __repr__(self):
        return f"Not({self.child!r})"


class And:
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        self.left = left
        self.right = right

    def __eq__(self, other):
        return isinstance(other, And) and (self.left, self.right) == (other.left, other.right)

    def __hash__(self):
        return hash((And, self.left, self.right))

    def __repr__(self):
        return f"And({self.left!r}, {self.right!r})"


class Or:
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        self.left = left
        self.right = right

    def __eq__(self, other):
        return isinstance(other, Or) and (self.left, self.right) == (other.left, other.right)

    def __hash__(self):
        return hash((Or, self.left, self.right))

    def __repr__(self):
        return f"Or({self.left!r}, {self.right!r})"


def _var_name(v: Var) -> str:
    return f"{v[0]}{v[1]}"


def _walk(node) -> Iterator:
    yield node
    if isinstance(node, Not):
        yield from _walk(node.child)
    elif isinstance(node, (And, Or)):
        yield from _walk(node.left)
        yield from _walk(node.right)


class EqFormula:
    """Parsed formula plus its declared block arities k and ell."""

    __slots__ = ("root", "k", "ell")

    def __init__(self, root, k: int | None = None, ell: int | None = None):
        max_x = max_y = 0
        for node in _walk(root):
            if not isinstance(node, Literal):
                continue
            for block, idx in (node.left, node.right):
                if block == "x":
                    max_x = max(max_x, idx)
                else:
                    max_y = max(max_y, idx)
        self.k = max_x if k is None else int(k)
        self.ell = max_y if ell is None else int(ell)
        if self.k < 0 or self.ell < 0:
            raise InputError("variable block arities must be nonnegative")
        if max_x > self.k:
            raise InputError(f"formula mentions x{max_x} but k = {self.k}")
        if max_y > self.ell:
            raise InputError(f"formula mentions y{max_y} but ell = {self.ell}")
        self.root = root

    def evaluate(self, xs: Sequence[int], ys: Sequence[int]) -> bool:
        if len(xs) != self.k or len(ys) != self.ell:
            raise InputError(
                f"expected {self.k} x-values and {self.ell} y-values, "
                f"got {len(xs)} and {len(ys)}"
            )
        env = {("x", i + 1): xs[i] for i in range(self.k)}
        env.update({("y", j + 1): ys[j] for j in range(self.ell)})
        return _eval(self.root, env)

    def to_text(self) -> str:
        return _unparse(self.root, 0)

    def to_json(self) -> str:
        return json.dumps(
            {"k": self.k, "ell": self.ell, "ast": _ast_doc(self.root)}, sort_keys=True
        )

    def __eq__(self, other):
        if not isinstance(other, EqFormula):
            return NotImplemented
        return (self.k, self.ell, self.root) == (other.k, other.ell, other.root)

    def __repr__(self):
        return f"EqFormula({self.to_text()!r}, k={self.k}, ell={self.ell})"


def _eval(node, env: Mapping[Var, int]) -> bool:
    if isinstance(node, Literal):
        same = env[node.left] == env[node.right]
        return same if node.equal else not same
    if isinstance(node, Not):
        return not _eval(node.child, env)
    if isinstance(node, And):
        return _eval(node.left, env) and _eval(node.right, env)
    return _eval(node.left, env) or _eval(node.right, env)


# precedence ranks for the printer: or < and < not/literal
def _prec(node) -> int:
    if isinstance(node, Or):
        return 0
    if isinstance(node, And):
        return 1
    return 2


def _unparse(node, parent_prec: int) -> str:
    if isinstance(node, Literal):
        op = "=" if node.equal else "!="
        return f"{_var_name(node.left)}{op}{_var_name(node.right)}"
    if isinstance(node, Not):
        return "!" + _unparse(node.child, 2)
    op, prec = ("&", 1) if isinstance(node, And) else ("|", 0)
    # the parser is left-associative, so a right child at the same level
    # needs parentheses to survive the round trip
    left = _unparse(node.left, prec)
    right = _unparse(node.right, prec + 1)
    text = f"{left} {op} {right}"
    return f"({text})" if prec < parent_prec else text


def _ast_doc(node):
    if isinstance(node, Literal):
        return {
            "op": "eq" if node.equal else "ne",
            "left": _var_name(node.left),
            "right": _var_name(node.right),
        }
    if isinstance(node, Not):
        return {"op": "not", "child": _ast_doc(node.child)}
    kind = "and" if isinstance(node, And) else "or"
    return {"op": kind, "left": _ast_doc(node.left), "right": _ast_doc(node.right)}


def _tokenize(text: str) -> list[tuple[str, Var | None, int]]:
    tokens: list[tuple[str, Var | None, int]] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "xy":
            j = i + 1
            while j < len(text) and text[j].isdigit():
                j += 1
            if j == i + 1:
                raise InputError(
                    f"syntax error at offset {i + 1}: expected digits after {ch!r}"
                )
            idx = int(text[i + 1 : j])
            if idx < 1:
                raise InputError(f"syntax error at offset {i}: variable indices start at 1")
            tokens.append(("var", (ch, idx), i))
            i = j
            continue
        if ch == "!" and i + 1 < len(text) and text[i + 1] == "=":
            tokens.append(("!=", None, i))
            i += 2
            continue
        if ch in "!=&|()":
            tokens.append((ch, None, i))
            i += 1
            continue
        raise InputError(f"syntax error at offset {i}: unexpected character {ch!r}")
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.at = 0

    def peek(self) -> str:
        return self.tokens[self.at][0]

    def take(self):
        tok = self.tokens[self.at]
        self.at += 1
        return tok

    def fail(self, expected: str):
        kind, _, pos = self.tokens[self.at]
        got = "end of input" if kind == "end" else repr(kind)
        raise InputError(f"syntax error at offset {pos}: expected {expected}, got {got}")

    def formula(self):
        node = self.term()
        while self.peek() == "|":
            self.take()
            node = Or(node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek() == "&":
            self.take()
            node = And(node, self.factor())
        return node

    def factor(self):
        kind = self.peek()
        if kind == "!":
            self.take()
            return Not(self.factor())
        if kind == "(":
            self.take()
            node = self.formula()
            if self.peek() != ")":
                self.fail("')'")
            self.take()
            return node
        if kind == "var":
            return self.literal()
        self.fail("a literal, '!' or '('")

    def literal(self):
        _, left, _ = self.take()
        if self.peek() not in ("=", "!="):
            self.fail("'=' or '!='")
        op, _, _ = self.take()
        if self.peek() != "var":
            self.fail("a variable")
        _, right, _ = self.take()
        return Literal(left, right, op == "=")


def parse(text: str, k: int | None = None, ell: int | None = None) -> EqFormula:
    """Parse a formula; k and ell default to the largest mentioned indices."""
    parser = _Parser(_tokenize(text))
    root = parser.formula()
    if parser.peek() != "end":
        parser.fail("end of input")
    return EqFormula(root, k=k, ell=ell)


class EqualityType:
    """A complete consistent equality pattern on the k+ell variable slots.

    Stored as the partition of slots into equality classes, blocks ordered
    by least slot.  Two variables are equal exactly when their slots share
    a block, so consistency and completeness hold by construction.
    """

    __slots__ = ("k", "ell", "blocks", "_slot_class")

    def __init__(self, k: int, ell: int, blocks):
        self.k = int(k)
        self.ell = int(ell)
        n = self.k + self.ell
        cleaned = [tuple(sorted(int(x) for x in b)) for b in blocks]
        if sorted(x for b in cleaned for x in b) != list(range(n)):
            raise InputError("blocks must disjointly cover the variable slots")
        self.blocks = tuple(sorted(cleaned))
        slot_class = [0] * n
        for c, block in enumerate(self.blocks):
            for x in block:
                slot_class[x] = c
        self._slot_class = tuple(slot_class)

    def same(self, i: int, j: int) -> bool:
        """Whether slots i and j carry an equality literal."""
        return self._slot_class[i] == self._slot_class[j]

    def satisfied_by(self, xs: Sequence[int], ys: Sequence[int]) -> bool:
        """True iff the assignment's coincidence pattern is exactly this type."""
        if len(xs) != self.k or len(ys) != self.ell:
            raise InputError("assignment arities do not match the type")
        vals = tuple(xs) + tuple(ys)
        n = len(vals)
        return all(
            (vals[i] == vals[j]) == self.same(i, j)
            for i in range(n)
            for j in range(i + 1, n)
        )

    def __eq__(self, other):
        if not isinstance(other, EqualityType):
            return NotImplemented
        return (self.k, self.ell, self.blocks) == (other.k, other.ell, other.blocks)

    def __hash__(self):
        return hash((self.k, self.ell, self.blocks))

    def __repr__(self):
        return f"EqualityType(k={self.k}, ell={self.ell}, blocks={self.blocks})"


def _set_partitions(n: int) -> Iterator[list[list[int]]]:
    """All partitions of range(n) via restricted-growth strings."""

    def rec(rgs: list[int], bound: int) -> Iterator[list[int]]:
        if len(rgs) == n:
            yield rgs
            return
        for v in range(bound + 1):
            yield from rec(rgs + [v], max(bound, v + 1))

    for rgs in rec([], 0):
        blocks: dict[int, list[int]] = {}
        for slot, c in enumerate(rgs):
            blocks.setdefault(c, []).append(slot)
        yield [blocks[c] for c in sorted(blocks)]


def decompose(alpha: EqFormula) -> list[EqualityType]:
    """The complete equality types whose assignments are exactly alpha's models.

    A type is kept when alpha holds under any assignment with that pattern;
    class indices serve as the witness values, which is sound because alpha
    only tests equality.
    """
    k, ell = alpha.k, alpha.ell
    kept = []
    for blocks in _set_partitions(k + ell):
        slot_val = [0] * (k + ell)
        for c, block in enumerate(blocks):
            for slot in block:
                slot_val[slot] = c
        if alpha.evaluate(slot_val[:k], slot_val[k:]):
            kept.append(EqualityType(k, ell, blocks))
    return kept


def random_formula(rng, k: int, ell: int, max_depth: int = 3) -> EqFormula:
    """A random formula over x_1..x_k, y_1..y_ell, for the randomized suites."""
    if k < 1 or ell < 1:
        raise InputError("random formulas need at least one variable per block")
    names = [("x", i + 1) for i in range(k)] + [("y", j + 1) for j in range(ell)]

    def node(depth: int):
        pick = rng.random()
        if depth >= max_depth or pick < 0.4:
            return Literal(rng.choice(names), rng.choice(names), rng.random() < 0.5)
        if pick < 0.55:
            return Not(node(depth + 1))
        ctor = And if pick < 0.8 else Or
        return ctor(node(depth + 1), node(depth + 1))

    return EqFormula(node(0), k=k, ell=ell)


def build_matrix(
    alpha: EqFormula, n: int, p: int, caps: Mapping | None = None
) -> PrimeFieldMatrix:
    """The 0/1 matrix with M[a, b] = 1 iff alpha(a, b) holds, tuples in lex order."""
    if n < 1:
        raise InputError(f"need a positive domain size, got {n}")
    table = load_caps(caps)
    k, ell = alpha.k, alpha.ell
    rows, cols = n**k, n**ell
    check_cap("matrix_cells", rows * cols, table)
    out = np.zeros((rows, cols), dtype=np.int64)
    for a, xs in enumerate(itertools.product(range(n), repeat=k)):
        for b, ys in enumerate(itertools.product(range(n), repeat=ell)):
            if alpha.evaluate(xs, ys):
                out[a, b] = 1
    return PrimeFieldMatrix(p, out)
