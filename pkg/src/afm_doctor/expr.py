"""AST for cross-tree constraint expressions.

Expressions are trees of boolean operators over arithmetic comparisons.
Feature references appear only inside exist()/nonexist(); attribute
references are arithmetic terms written ``Feature:attr``. References hold
the surface name as written plus a resolved feature id filled in by the
resolution pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .span import SourceSpan

ARITH_OPS = ("+", "-", "*", "/")
CMP_OPS = ("=", "\\=", "<", "=<", ">", ">=")


@dataclass(eq=False)
class Expr:
    span: SourceSpan | None = field(default=None, init=False, compare=False)


@dataclass(eq=False)
class IntLit(Expr):
    value: int


@dataclass(eq=False)
class AttrRef(Expr):
    feature_name: str
    attr_name: str
    feature_id: str | None = None  # set by resolution


@dataclass(eq=False)
class ExistRef(Expr):
    feature_name: str
    feature_id: str | None = None


@dataclass(eq=False)
class NonexistRef(Expr):
    feature_name: str
    feature_id: str | None = None


@dataclass(eq=False)
class Arith(Expr):
    op: str  # one of ARITH_OPS
    left: Expr
    right: Expr


@dataclass(eq=False)
class Cmp(Expr):
    op: str  # one of CMP_OPS
    left: Expr
    right: Expr


@dataclass(eq=False)
class Not(Expr):
    child: Expr


@dataclass(eq=False)
class And(Expr):
    left: Expr
    right: Expr


@dataclass(eq=False)
class Or(Expr):
    left: Expr
    right: Expr


@dataclass(eq=False)
class Implies(Expr):
    left: Expr
    right: Expr


@dataclass(eq=False)
class Iff(Expr):
    left: Expr
    right: Expr


def children(expr: Expr) -> tuple[Expr, ...]:
    if isinstance(expr, (Arith, Cmp, And, Or, Implies, Iff)):
        return (expr.left, expr.right)
    if isinstance(expr, Not):
        return (expr.child,)
    return ()


def walk(expr: Expr) -> Iterator[Expr]:
    """Yield expr and every descendant, pre-order."""
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def feature_refs(expr: Expr) -> Iterator[ExistRef | NonexistRef]:
    for node in walk(expr):
        if isinstance(node, (ExistRef, NonexistRef)):
            yield node


def attr_refs(expr: Expr) -> Iterator[AttrRef]:
    for node in walk(expr):
        if isinstance(node, AttrRef):
            yield node


def is_boolean(expr: Expr) -> bool:
    return isinstance(expr, (ExistRef, NonexistRef, Cmp, Not, And, Or, Implies, Iff))


def is_arithmetic(expr: Expr) -> bool:
    return isinstance(expr, (IntLit, AttrRef, Arith))


def structurally_equal(a: Expr, b: Expr) -> bool:
    """Surface-level equality: same shape, operators, names and literals."""
    if type(a) is not type(b):
        return False
    if isinstance(a, IntLit):
        return a.value == b.value  # type: ignore[union-attr]
    if isinstance(a, AttrRef):
        return (a.feature_name, a.attr_name) == (b.feature_name, b.attr_name)  # type: ignore[union-attr]
    if isinstance(a, (ExistRef, NonexistRef)):
        return a.feature_name == b.feature_name  # type: ignore[union-attr]
    if isinstance(a, (Arith, Cmp)) and a.op != b.op:  # type: ignore[union-attr]
        return False
    return all(structurally_equal(x, y) for x, y in zip(children(a), children(b)))


_PRECEDENCE = {
    Iff: 1,
    Implies: 2,
    Or: 3,
    And: 4,
    Not: 5,
    Cmp: 6,
    # arithmetic handled separately: 7 for +/-, 8 for * and /
}


def _arith_prec(expr: Expr) -> int:
    if isinstance(expr, Arith):
        return 7 if expr.op in ("+", "-") else 8
    return 9  # atoms


def _prec(expr: Expr) -> int:
    if isinstance(expr, (IntLit, AttrRef, ExistRef, NonexistRef)):
        return 9
    if isinstance(expr, Arith):
        return _arith_prec(expr)
    return _PRECEDENCE[type(expr)]


def render(expr: Expr) -> str:
    """Render back into the surface syntax with minimal parentheses."""
    return _render(expr, 0)


def _render(expr: Expr, parent_prec: int) -> str:
    if isinstance(expr, IntLit):
        text = str(expr.value)
        return f"({text})" if expr.value < 0 and parent_prec >= 7 else text
    if isinstance(expr, AttrRef):
        return f"{expr.feature_name}:{expr.attr_name}"
    if isinstance(expr, ExistRef):
        return f"exist({expr.feature_name})"
    if isinstance(expr, NonexistRef):
        return f"nonexist({expr.feature_name})"
    if isinstance(expr, Not):
        text = f"not {_render(expr.child, _prec(expr))}"
        return f"({text})" if parent_prec > _prec(expr) else text

    op_text = {
        And: "/\\",
        Or: "\\/",
        Implies: "==>",
        Iff: "<==>",
    }
    prec = _prec(expr)
    if isinstance(expr, (And, Or, Iff)):
        # left-associative: right child needs parens at equal precedence
        text = "{} {} {}".format(
            _render(expr.left, prec), op_text[type(expr)], _render(expr.right, prec + 1)
        )
    elif isinstance(expr, Implies):
        # right-associative
        text = f"{_render(expr.left, prec + 1)} ==> {_render(expr.right, prec)}"
    elif isinstance(expr, Cmp):
        text = f"{_render(expr.left, prec)} {expr.op} {_render(expr.right, prec)}"
    elif isinstance(expr, Arith):
        # left-associative; '-' and '/' are not commutative
        text = "{} {} {}".format(
            _render(expr.left, prec), expr.op, _render(expr.right, prec + 1)
        )
    else:  # pragma: no cover - exhaustive
        raise TypeError(f"unknown expression node {type(expr).__name__}")
    return f"({text})" if parent_prec > prec else text
