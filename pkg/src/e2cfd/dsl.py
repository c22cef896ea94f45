"""Arithmetic expression language for generated cost and scoring functions.

Every candidate produced by the generator, the seed library, or weighted
recombination is an immutable AST over named scalar features.  The module
provides the parser (recursive descent, whitespace-insensitive), a guarded
evaluator that always returns a finite float, a pretty-printer whose output
reparses to a structurally equal tree, and the weighted-sum combinator.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-'? atom
    atom   := NUMBER | IDENT | FN '(' args ')' | '(' expr ')'
              | 'if' '(' cond ',' expr ',' expr ')'
              | 'clip' '(' expr ',' expr ',' expr ')'
    cond   := expr ('<' | '<=' | '>' | '>=' | '==') expr

Callable functions: abs, exp, log, sqrt, tanh, step (1 if x > 0 else 0),
min(a, b), max(a, b).  A leading '-' on a number literal folds into the
constant; on anything else it becomes a negation node.

Evaluation guards: division uses sign(y) * max(|y|, 1e-8) as denominator,
log and sqrt clamp their argument up to 1e-8, and every node output is
clamped to [-1e30, 1e30], so a validated tree plus a complete feature map
can never produce NaN or infinity.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence, Union

MAX_DEPTH = 32
MAX_NODES = 512

# Hard cap on parser recursion frames, distinct from the tree-depth limit:
# redundant parentheses burn frames without adding tree depth, so the
# descent guard only protects the interpreter stack.  Tree depth is
# enforced on the finished tree.
_MAX_PARSE_FRAMES = 200

DIV_EPS = 1e-8
CLAMP_EPS = 1e-8
HUGE = 1e30

UNARY_OPS = ("neg", "abs", "exp", "log", "sqrt", "tanh", "step")
BINARY_OPS = ("add", "sub", "mul", "div", "min", "max")
COMPARISON_OPS = ("<", "<=", ">", ">=", "==")

# Functions callable by name in source text.  'neg' is only reachable
# through the '-' prefix.
_UNARY_FNS = {"abs", "exp", "log", "sqrt", "tanh", "step"}
_BINARY_FNS = {"min", "max"}
_RESERVED = _UNARY_FNS | _BINARY_FNS | {"clip", "if"}


class DslError(Exception):
    """Base class for everything this module raises."""


class ParseError(DslError):
    """Source text rejected by the grammar.

    Carries the byte offset of the failure, a description of what was
    expected, and a short excerpt around the offset.
    """

    def __init__(self, offset: int, expected: str, source: str):
        self.offset = min(offset, len(source))
        self.expected = expected
        lo = max(0, self.offset - 16)
        hi = min(len(source), self.offset + 16)
        self.excerpt = source[lo:hi]
        super().__init__(
            f"expected {expected} at offset {self.offset}: {self.excerpt!r}"
        )


class LimitError(ParseError):
    """Tree exceeds the depth or node budget."""

    def __init__(self, offset: int, what: str, source: str):
        super().__init__(offset, what, source)


class UnboundFeatureError(DslError):
    """Evaluation hit a feature name missing from the feature map."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound feature: {name!r}")


class UnknownFeatureError(DslError):
    """Validation found a feature name outside the declared registry."""

    def __init__(self, names: Sequence[str]):
        self.names = tuple(sorted(names))
        super().__init__("unknown feature(s): " + ", ".join(self.names))


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Feature:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Clip:
    value: "Expr"
    lo: "Expr"
    hi: "Expr"


@dataclass(frozen=True)
class Comparison:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class If:
    cond: Comparison
    then: "Expr"
    orelse: "Expr"


Expr = Union[Constant, Feature, Unary, Binary, Clip, If]


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|[-+*/(),<>])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens: list[tuple[str, str, int]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(pos, "a token", text)
        if m.lastgroup != "ws":
            kind = m.lastgroup or "op"
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.nodes = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str) -> tuple[str, str, int]:
        kind, text, offset = self.peek()
        if text != value:
            raise ParseError(offset, repr(value), self.text)
        return self.advance()

    def count_node(self) -> None:
        self.nodes += 1
        if self.nodes > MAX_NODES:
            raise LimitError(self.peek()[2], "node budget (512)", self.text)

    def check_depth(self, depth: int) -> None:
        if depth > _MAX_PARSE_FRAMES:
            raise LimitError(self.peek()[2], "shallower nesting", self.text)

    def parse(self) -> Expr:
        expr = self.expr(1)
        kind, _, offset = self.peek()
        if kind != "eof":
            raise ParseError(offset, "end of input", self.text)
        return expr

    def expr(self, depth: int) -> Expr:
        self.check_depth(depth)
        left = self.term(depth + 1)
        while self.peek()[1] in ("+", "-"):
            op = "add" if self.advance()[1] == "+" else "sub"
            right = self.term(depth + 1)
            self.count_node()
            left = Binary(op, left, right)
        return left

    def term(self, depth: int) -> Expr:
        self.check_depth(depth)
        left = self.factor(depth + 1)
        while self.peek()[1] in ("*", "/"):
            op = "mul" if self.advance()[1] == "*" else "div"
            right = self.factor(depth + 1)
            self.count_node()
            left = Binary(op, left, right)
        return left

    def factor(self, depth: int) -> Expr:
        self.check_depth(depth)
        if self.peek()[1] == "-":
            self.advance()
            kind, text, _ = self.peek()
            if kind == "number":
                self.advance()
                self.count_node()
                return Constant(-float(text))
            arg = self.atom(depth + 1)
            self.count_node()
            return Unary("neg", arg)
        return self.atom(depth + 1)

    def atom(self, depth: int) -> Expr:
        self.check_depth(depth)
        kind, text, offset = self.peek()
        if kind == "number":
            self.advance()
            self.count_node()
            return Constant(float(text))
        if kind == "ident":
            self.advance()
            if text in _RESERVED:
                return self.call(text, offset, depth)
            self.count_node()
            return Feature(text)
        if text == "(":
            self.advance()
            inner = self.expr(depth + 1)
            self.expect(")")
            return inner
        raise ParseError(offset, "a number, name, or '('", self.text)

    def call(self, name: str, offset: int, depth: int) -> Expr:
        self.expect("(")
        if name == "if":
            cond = self.condition(depth + 1)
            self.expect(",")
            then = self.expr(depth + 1)
            self.expect(",")
            orelse = self.expr(depth + 1)
            self.expect(")")
            self.count_node()
            return If(cond, then, orelse)
        if name == "clip":
            value = self.expr(depth + 1)
            self.expect(",")
            lo = self.expr(depth + 1)
            self.expect(",")
            hi = self.expr(depth + 1)
            self.expect(")")
            self.count_node()
            return Clip(value, lo, hi)
        if name in _BINARY_FNS:
            left = self.expr(depth + 1)
            self.expect(",")
            right = self.expr(depth + 1)
            self.expect(")")
            self.count_node()
            return Binary(name, left, right)
        arg = self.expr(depth + 1)
        self.expect(")")
        self.count_node()
        return Unary(name, arg)

    def condition(self, depth: int) -> Comparison:
        self.check_depth(depth)
        left = self.expr(depth + 1)
        kind, text, offset = self.peek()
        if text not in COMPARISON_OPS:
            raise ParseError(offset, "a comparison operator", self.text)
        self.advance()
        right = self.expr(depth + 1)
        self.count_node()
        return Comparison(text, left, right)


def parse(text: str) -> Expr:
    """Parse source text into an AST.

    Raises ParseError (or its LimitError subclass) on any rejection; no
    input, including arbitrary byte noise decoded as text, raises anything
    else.
    """
    expr = _Parser(text).parse()
    # Depth is enforced during descent for parser inputs, but re-check on
    # the finished tree so parse and validate agree on the budget.
    if depth(expr) > MAX_DEPTH:
        raise LimitError(len(text), "depth budget (32)", text)
    return expr


def _children(expr: Expr | Comparison) -> tuple:
    if isinstance(expr, (Constant, Feature)):
        return ()
    if isinstance(expr, Unary):
        return (expr.arg,)
    if isinstance(expr, (Binary, Comparison)):
        return (expr.left, expr.right)
    if isinstance(expr, Clip):
        return (expr.value, expr.lo, expr.hi)
    if isinstance(expr, If):
        return (expr.cond, expr.then, expr.orelse)
    raise TypeError(f"not an expression node: {expr!r}")


def walk(expr: Expr) -> Iterator[Expr | Comparison]:
    stack: list[Expr | Comparison] = [expr]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(_children(node))


def count_nodes(expr: Expr) -> int:
    return sum(1 for _ in walk(expr))


def depth(expr: Expr) -> int:
    def rec(node: Expr | Comparison) -> int:
        kids = _children(node)
        if not kids:
            return 1
        return 1 + max(rec(k) for k in kids)

    return rec(expr)


def free_features(expr: Expr) -> set[str]:
    """Exactly the feature names occurring in the tree."""
    return {node.name for node in walk(expr) if isinstance(node, Feature)}


def validate(expr: Expr, registry: Sequence[str]) -> None:
    """Check feature names against a registry and enforce tree limits."""
    unknown = free_features(expr) - set(registry)
    if unknown:
        raise UnknownFeatureError(sorted(unknown))
    if count_nodes(expr) > MAX_NODES:
        raise LimitError(0, "node budget (512)", "")
    if depth(expr) > MAX_DEPTH:
        raise LimitError(0, "depth budget (32)", "")


def _clamp(x: float) -> float:
    if x > HUGE:
        return HUGE
    if x < -HUGE:
        return -HUGE
    return x


def _guarded_div(x: float, y: float) -> float:
    sign = -1.0 if y < 0.0 else 1.0
    return x / (sign * max(abs(y), DIV_EPS))


def evaluate(expr: Expr, features: Mapping[str, float]) -> float:
    """Evaluate a tree against a feature map; the result is always finite."""
    if isinstance(expr, Constant):
        return _clamp(expr.value)
    if isinstance(expr, Feature):
        try:
            return float(features[expr.name])
        except KeyError:
            raise UnboundFeatureError(expr.name) from None
    if isinstance(expr, Unary):
        v = evaluate(expr.arg, features)
        if expr.op == "neg":
            return -v
        if expr.op == "abs":
            return abs(v)
        if expr.op == "exp":
            return _clamp(math.exp(min(v, 700.0)))
        if expr.op == "log":
            return math.log(max(v, CLAMP_EPS))
        if expr.op == "sqrt":
            return math.sqrt(max(v, CLAMP_EPS))
        if expr.op == "tanh":
            return math.tanh(v)
        if expr.op == "step":
            return 1.0 if v > 0.0 else 0.0
        raise DslError(f"unknown unary op {expr.op!r}")
    if isinstance(expr, Binary):
        a = evaluate(expr.left, features)
        b = evaluate(expr.right, features)
        if expr.op == "add":
            return _clamp(a + b)
        if expr.op == "sub":
            return _clamp(a - b)
        if expr.op == "mul":
            return _clamp(a * b)
        if expr.op == "div":
            return _clamp(_guarded_div(a, b))
        if expr.op == "min":
            return min(a, b)
        if expr.op == "max":
            return max(a, b)
        raise DslError(f"unknown binary op {expr.op!r}")
    if isinstance(expr, Clip):
        v = evaluate(expr.value, features)
        lo = evaluate(expr.lo, features)
        hi = evaluate(expr.hi, features)
        return min(max(v, lo), hi)
    if isinstance(expr, If):
        c = expr.cond
        a = evaluate(c.left, features)
        b = evaluate(c.right, features)
        if c.op == "<":
            taken = a < b
        elif c.op == "<=":
            taken = a <= b
        elif c.op == ">":
            taken = a > b
        elif c.op == ">=":
            taken = a >= b
        else:
            taken = a == b
        return evaluate(expr.then if taken else expr.orelse, features)
    raise DslError(f"not an expression node: {expr!r}")


# Precedence levels used by the printer: 1 add/sub, 2 mul/div, 3 prefix
# minus, 4 atoms.  A child printed in a context demanding a higher level
# than it has gets parenthesized.
_LEVEL_ATOM = 4


def _level(expr: Expr) -> int:
    if isinstance(expr, Binary) and expr.op in ("add", "sub"):
        return 1
    if isinstance(expr, Binary) and expr.op in ("mul", "div"):
        return 2
    if isinstance(expr, Unary) and expr.op == "neg":
        return 3
    if isinstance(expr, Constant) and expr.value < 0:
        # Prints with a leading '-', so it binds like a prefix minus.
        return 3
    return _LEVEL_ATOM


def _fmt_number(value: float) -> str:
    if value != value or value in (float("inf"), float("-inf")):
        raise DslError(f"non-finite constant: {value!r}")
    if value == int(value) and abs(value) < 1e16:
        return f"{value:.1f}"
    return repr(value)


def _print(expr: Expr, min_level: int) -> str:
    if isinstance(expr, Constant):
        text = _fmt_number(expr.value)
    elif isinstance(expr, Feature):
        text = expr.name
    elif isinstance(expr, Unary) and expr.op == "neg":
        text = "-" + _print(expr.arg, _LEVEL_ATOM)
    elif isinstance(expr, Unary):
        text = f"{expr.op}({_print(expr.arg, 1)})"
    elif isinstance(expr, Binary) and expr.op in ("min", "max"):
        text = f"{expr.op}({_print(expr.left, 1)}, {_print(expr.right, 1)})"
    elif isinstance(expr, Binary):
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[expr.op]
        lvl = _level(expr)
        # Left-associative: the right child needs strictly tighter binding.
        left = _print(expr.left, lvl)
        right = _print(expr.right, lvl + 1)
        text = f"{left} {sym} {right}"
    elif isinstance(expr, Clip):
        text = (
            f"clip({_print(expr.value, 1)}, "
            f"{_print(expr.lo, 1)}, {_print(expr.hi, 1)})"
        )
    elif isinstance(expr, If):
        c = expr.cond
        cond = f"{_print(c.left, 1)} {c.op} {_print(c.right, 1)}"
        text = f"if({cond}, {_print(expr.then, 1)}, {_print(expr.orelse, 1)})"
    else:
        raise DslError(f"not an expression node: {expr!r}")
    if _level(expr) < min_level:
        return f"({text})"
    return text


def pretty(expr: Expr) -> str:
    """Single-line canonical form; parse(pretty(e)) is structurally e."""
    return _print(expr, 1)


def weighted_sum(exprs: Sequence[Expr], weights: Sequence[float]) -> Expr:
    """Build the tree for sum_i weights[i] * exprs[i].

    The result evaluates to exactly the weighted sum of the individual
    evaluations on any feature map (same operation order, no re-association).
    """
    if len(exprs) != len(weights):
        raise ValueError(
            f"got {len(exprs)} expressions but {len(weights)} weights"
        )
    if not exprs:
        raise ValueError("need at least one expression")
    terms = [
        Binary("mul", Constant(float(w)), e) for e, w in zip(exprs, weights)
    ]
    out: Expr = terms[0]
    for term in terms[1:]:
        out = Binary("add", out, term)
    if count_nodes(out) > MAX_NODES or depth(out) > MAX_DEPTH:
        raise LimitError(0, "combined tree exceeds limits", "")
    return out
