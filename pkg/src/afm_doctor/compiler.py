"""Translation of feature models into finite-domain CSPs, plus the
pre-analysis model reduction.

Variables: one 0/1 existence variable per feature; one integer variable per
attribute whose domain is the declared domain plus a global NIL sentinel
(smallest attribute value in the model minus one).  NIL means "attribute
absent because its feature is absent".

Compiled constraints are boolean trees over three leaf forms:

* ``LinCmp``   -- linear comparison  sum(coef*var) + const  (=|!=|<=)  0
* ``TermCmp``  -- non-linear comparison kept as a term DAG (fallback)
* ``Membership`` -- target variable equals the value of one of the listed
  variables (the anonymous-index element form)

Arithmetic comparisons in cross-tree constraints are NIL-guarded: the
comparison only applies when every referenced attribute is non-NIL.
Division by a constant is compiled away by multiplying the comparison
through, so integer truncation never distorts the intended ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import expr as E
from .model import (
    AlternativeGroup,
    Attribute,
    CrossTreeConstraint,
    Feature,
    FeatureModel,
    MandatoryRel,
    ModuleDecl,
    ModuleRef,
    OptionalRel,
    Pragma,
)

FEATURE = "feature"
ATTRIBUTE = "attribute"


@dataclass(frozen=True)
class Variable:
    index: int
    name: str           # display name, e.g. "Drill" or "Motor:pwr"
    kind: str           # FEATURE or ATTRIBUTE
    feature_id: str
    attr_name: str | None = None


# -- constraint node forms ---------------------------------------------------

EQ, NE, LE = "eq", "ne", "le"


class LinCmp:
    """sum(coef * var) + const  OP  0 with OP in {eq, ne, le}."""

    __slots__ = ("op", "terms", "const")

    def __init__(self, op: str, terms: tuple[tuple[int, int], ...], const: int):
        self.op = op
        self.terms = terms
        self.const = const


class TConst:
    __slots__ = ("value",)

    def __init__(self, value: int):
        self.value = value


class TVar:
    __slots__ = ("index",)

    def __init__(self, index: int):
        self.index = index


class TBin:
    """Arithmetic term; '/' is integer division truncating toward zero."""

    __slots__ = ("op", "left", "right")

    def __init__(self, op: str, left, right):
        self.op = op
        self.left = left
        self.right = right


class TermCmp:
    """Comparison over term DAGs; used when a constraint is not linear."""

    __slots__ = ("op", "left", "right")

    def __init__(self, op: str, left, right):
        self.op = op  # surface op: = \= < =< > >=
        self.left = left
        self.right = right


class BoolConst:
    __slots__ = ("value",)

    def __init__(self, value: bool):
        self.value = value


class NotOp:
    __slots__ = ("child",)

    def __init__(self, child):
        self.child = child


class AndOp:
    __slots__ = ("children",)

    def __init__(self, children: tuple):
        self.children = children


class OrOp:
    __slots__ = ("children",)

    def __init__(self, children: tuple):
        self.children = children


class ImpliesOp:
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        self.left = left
        self.right = right


class IffOp:
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        self.left = left
        self.right = right


class Membership:
    """target takes the value of at least one source variable."""

    __slots__ = ("target", "sources")

    def __init__(self, target: int, sources: tuple[int, ...]):
        self.target = target
        self.sources = sources


Node = object  # any of the classes above


def node_vars(node: Node) -> set[int]:
    out: set[int] = set()
    _collect_vars(node, out)
    return out


def _collect_vars(node: Node, out: set[int]) -> None:
    if isinstance(node, LinCmp):
        out.update(v for _, v in node.terms)
    elif isinstance(node, TermCmp):
        _collect_term_vars(node.left, out)
        _collect_term_vars(node.right, out)
    elif isinstance(node, Membership):
        out.add(node.target)
        out.update(node.sources)
    elif isinstance(node, NotOp):
        _collect_vars(node.child, out)
    elif isinstance(node, (AndOp, OrOp)):
        for child in node.children:
            _collect_vars(child, out)
    elif isinstance(node, (ImpliesOp, IffOp)):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)


def _collect_term_vars(term, out: set[int]) -> None:
    if isinstance(term, TVar):
        out.add(term.index)
    elif isinstance(term, TBin):
        _collect_term_vars(term.left, out)
        _collect_term_vars(term.right, out)


def _trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def eval_term(term, values) -> int:
    if isinstance(term, TConst):
        return term.value
    if isinstance(term, TVar):
        return values[term.index]
    left = eval_term(term.left, values)
    right = eval_term(term.right, values)
    op = term.op
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    return _trunc_div(left, right)  # raises ZeroDivisionError on /0


_SURFACE_CMP = {
    "=": lambda a, b: a == b,
    "\\=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "=<": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def evaluate(node: Node, values) -> bool:
    """Truth of a constraint under a total assignment (var index -> value)."""
    if isinstance(node, LinCmp):
        total = node.const + sum(c * values[v] for c, v in node.terms)
        if node.op == EQ:
            return total == 0
        if node.op == NE:
            return total != 0
        return total <= 0
    if isinstance(node, TermCmp):
        try:
            return _SURFACE_CMP[node.op](
                eval_term(node.left, values), eval_term(node.right, values)
            )
        except ZeroDivisionError:
            return False
    if isinstance(node, Membership):
        target = values[node.target]
        return any(values[s] == target for s in node.sources)
    if isinstance(node, BoolConst):
        return node.value
    if isinstance(node, NotOp):
        return not evaluate(node.child, values)
    if isinstance(node, AndOp):
        return all(evaluate(c, values) for c in node.children)
    if isinstance(node, OrOp):
        return any(evaluate(c, values) for c in node.children)
    if isinstance(node, ImpliesOp):
        return not evaluate(node.left, values) or evaluate(node.right, values)
    if isinstance(node, IffOp):
        return evaluate(node.left, values) == evaluate(node.right, values)
    raise TypeError(f"unknown constraint node {type(node).__name__}")


# -- origins -----------------------------------------------------------------


@dataclass(frozen=True)
class TreeRelation:
    kind: str                     # mandatory|optional|alternative|attribute|abstract
    features: tuple[str, ...]     # involved feature ids
    attr_name: str | None = None


@dataclass(frozen=True)
class CtcOrigin:
    name: str


@dataclass(frozen=True)
class Assumption:
    description: str


Origin = TreeRelation | CtcOrigin | Assumption


@dataclass(frozen=True)
class CompiledConstraint:
    id: int
    origin: Origin
    text: str
    node: Node
    # feature the constraint hangs off (tree constraints); None for CTCs
    anchor: str | None = None
    module: str | None = None
    variables: frozenset[int] = field(default_factory=frozenset)

    def __str__(self) -> str:
        return self.text


class CompileError(ValueError):
    """An expression references an element missing from the model."""


class Csp:
    """The (variables, domains, constraints) triple plus lookup caches.

    Immutable after construction; solver runs never mutate it, so one Csp
    may back many concurrent checks.
    """

    def __init__(
        self,
        variables: list[Variable],
        domains: list[frozenset[int]],
        constraints: list[CompiledConstraint],
        nil: int,
        warnings: list[str] | None = None,
    ):
        self.variables = tuple(variables)
        self.domains = tuple(domains)
        self.constraints = tuple(constraints)
        self.nil = nil
        self.warnings = tuple(warnings or [])
        self.feature_var: dict[str, int] = {}
        self.attr_var: dict[tuple[str, str], int] = {}
        for var in self.variables:
            if var.kind == FEATURE:
                self.feature_var[var.feature_id] = var.index
            else:
                self.attr_var[(var.feature_id, var.attr_name)] = var.index
        watchers: list[list[int]] = [[] for _ in self.variables]
        degree = [0] * len(self.variables)
        for con in self.constraints:
            for v in con.variables:
                watchers[v].append(con.id)
                degree[v] += 1
        self.watchers: tuple[tuple[int, ...], ...] = tuple(tuple(w) for w in watchers)
        self.degree: tuple[int, ...] = tuple(degree)

    def var_name(self, index: int) -> str:
        return self.variables[index].name

    def require_feature_var(self, feature_id: str) -> int:
        try:
            return self.feature_var[feature_id]
        except KeyError:
            raise CompileError(f"no existence variable for feature {feature_id!r}") from None

    def require_attr_var(self, feature_id: str, attr_name: str) -> int:
        try:
            return self.attr_var[(feature_id, attr_name)]
        except KeyError:
            raise CompileError(
                f"no variable for attribute {feature_id}:{attr_name}"
            ) from None


# -- compilation ---------------------------------------------------------------


def nil_value(model: FeatureModel) -> int:
    values = [v for _, attr in model.attributes() for v in attr.domain]
    return (min(values) - 1) if values else -1


def compile_model(model: FeatureModel) -> Csp:
    """Translate a valid model into its CSP."""
    nil = nil_value(model)
    variables: list[Variable] = []
    domains: list[frozenset[int]] = []
    warnings: list[str] = []

    feature_var: dict[str, int] = {}
    attr_var: dict[tuple[str, str], int] = {}
    for feat in model.features():
        index = len(variables)
        feature_var[feat.id] = index
        variables.append(Variable(index, feat.name, FEATURE, feat.id))
        domains.append(frozenset((0, 1)))
        for attr in feat.attributes:
            index = len(variables)
            attr_var[(feat.id, attr.name)] = index
            variables.append(
                Variable(index, f"{feat.name}:{attr.name}", ATTRIBUTE, feat.id, attr.name)
            )
            domains.append(frozenset(attr.domain) | {nil})

    constraints: list[CompiledConstraint] = []

    def add(origin: Origin, text: str, node: Node, anchor: str | None, module: str | None) -> None:
        constraints.append(
            CompiledConstraint(
                id=len(constraints),
                origin=origin,
                text=text,
                node=node,
                anchor=anchor,
                module=module,
                variables=frozenset(node_vars(node)),
            )
        )

    def feat_eq(fid: str, value: int) -> LinCmp:
        return LinCmp(EQ, ((1, feature_var[fid]),), -value)

    for feat in model.features():
        fvar = feature_var[feat.id]
        for attr in feat.attributes:
            avar = attr_var[(feat.id, attr.name)]
            node = IffOp(feat_eq(feat.id, 0), LinCmp(EQ, ((1, avar),), -nil))
            add(
                TreeRelation("attribute", (feat.id,), attr.name),
                f"{feat.name} = 0 <==> {feat.name}:{attr.name} = nil",
                node,
                feat.id,
                feat.module,
            )
        for rel in feat.child_relations:
            if isinstance(rel, MandatoryRel):
                child = rel.child
                node = LinCmp(EQ, ((1, fvar), (-1, feature_var[child.id])), 0)
                add(
                    TreeRelation("mandatory", (feat.id, child.id)),
                    f"{feat.name} = {child.name}",
                    node,
                    child.id,
                    child.module,
                )
            elif isinstance(rel, OptionalRel):
                child = rel.child
                add(
                    TreeRelation("optional", (feat.id, child.id)),
                    f"{child.name} = 1 ==> {feat.name} = 1",
                    ImpliesOp(feat_eq(child.id, 1), feat_eq(feat.id, 1)),
                    child.id,
                    child.module,
                )
                add(
                    TreeRelation("optional", (feat.id, child.id)),
                    f"{feat.name} = 0 ==> {child.name} = 0",
                    ImpliesOp(feat_eq(feat.id, 0), feat_eq(child.id, 0)),
                    child.id,
                    child.module,
                )
            else:
                assert isinstance(rel, AlternativeGroup)
                members = rel.children
                terms = tuple((1, feature_var[c.id]) for c in members) + ((-1, fvar),)
                names = ", ".join(c.name for c in members)
                add(
                    TreeRelation(
                        "alternative", tuple(c.id for c in members) + (feat.id,)
                    ),
                    f"sum([{names}], =, {feat.name})",
                    LinCmp(EQ, terms, 0),
                    feat.id,
                    feat.module,
                )
        for attr in feat.attributes:
            if not attr.abstract:
                continue
            members = [
                c
                for rel in feat.child_relations
                if isinstance(rel, AlternativeGroup)
                for c in rel.children
                if c.attribute(attr.name) is not None
            ]
            pvar = attr_var[(feat.id, attr.name)]
            sources = tuple(attr_var[(c.id, attr.name)] for c in members)
            names = ", ".join(f"{c.name}:{attr.name}" for c in members)
            add(
                TreeRelation(
                    "abstract", (feat.id,) + tuple(c.id for c in members), attr.name
                ),
                f"element(_, [{names}], {feat.name}:{attr.name})",
                Membership(pvar, sources),
                feat.id,
                feat.module,
            )
            # one value-exclusion implication per domain value, with a
            # disjunction over every child carrying that value
            for dv in sorted(attr.domain):
                carriers = [c for c in members if dv in c.attribute(attr.name).domain]
                if not carriers:
                    continue
                consequent_nodes = tuple(
                    LinCmp(NE, ((1, attr_var[(c.id, attr.name)]),), -dv)
                    for c in carriers
                )
                consequent = (
                    consequent_nodes[0]
                    if len(consequent_nodes) == 1
                    else OrOp(consequent_nodes)
                )
                cons_text = " \\/ ".join(
                    f"{c.name}:{attr.name} \\= {dv}" for c in carriers
                )
                add(
                    TreeRelation(
                        "abstract", (feat.id,) + tuple(c.id for c in carriers), attr.name
                    ),
                    f"{feat.name}:{attr.name} \\= {dv} ==> {cons_text}",
                    ImpliesOp(LinCmp(NE, ((1, pvar),), -dv), consequent),
                    feat.id,
                    feat.module,
                )

    lookup = _SymbolTable(model, feature_var, attr_var, nil, warnings)
    for ctc in model.constraints:
        node = _compile_bool(ctc.expression, lookup)
        add(
            CtcOrigin(ctc.name),
            E.render(ctc.expression),
            node,
            None,
            ctc.module,
        )

    return Csp(variables, domains, constraints, nil, warnings)


# alias matching the operation name used elsewhere
compile = compile_model


@dataclass
class _SymbolTable:
    model: FeatureModel
    feature_var: dict[str, int]
    attr_var: dict[tuple[str, str], int]
    nil: int
    warnings: list[str]

    def feature(self, name: str, resolved: str | None) -> int:
        fid = resolved
        if fid is None:
            feat = self.model.resolve_feature(name)
            if feat is None:
                raise CompileError(self.model.resolution_error(name))
            fid = feat.id
        try:
            return self.feature_var[fid]
        except KeyError:
            raise CompileError(f"no variable for feature {fid!r}") from None

    def attribute(self, feat_name: str, attr_name: str, resolved: str | None) -> int:
        fid = resolved
        if fid is None:
            feat = self.model.resolve_feature(feat_name)
            if feat is None:
                raise CompileError(self.model.resolution_error(feat_name))
            fid = feat.id
        try:
            return self.attr_var[(fid, attr_name)]
        except KeyError:
            raise CompileError(f"no variable for attribute {fid}:{attr_name}") from None


class _LinForm:
    """sum(coeffs)/den + const/den with den > 0; None when non-linear."""

    __slots__ = ("coeffs", "const", "den")

    def __init__(self, coeffs: dict[int, int], const: int, den: int):
        self.coeffs = coeffs
        self.const = const
        self.den = den


def _lin_scale(form: _LinForm, num: int, den: int) -> _LinForm:
    if den < 0:
        num, den = -num, -den
    coeffs = {v: c * num for v, c in form.coeffs.items()}
    return _LinForm(coeffs, form.const * num, form.den * den)


def _lin_combine(a: _LinForm, b: _LinForm, sign: int) -> _LinForm:
    den = a.den * b.den // math.gcd(a.den, b.den)
    fa, fb = den // a.den, den // b.den
    coeffs = {v: c * fa for v, c in a.coeffs.items()}
    for v, c in b.coeffs.items():
        coeffs[v] = coeffs.get(v, 0) + sign * c * fb
    coeffs = {v: c for v, c in coeffs.items() if c != 0}
    return _LinForm(coeffs, a.const * fa + sign * b.const * fb, den)


def _linearize(node: E.Expr, table: _SymbolTable) -> _LinForm | None:
    if isinstance(node, E.IntLit):
        return _LinForm({}, node.value, 1)
    if isinstance(node, E.AttrRef):
        var = table.attribute(node.feature_name, node.attr_name, node.feature_id)
        return _LinForm({var: 1}, 0, 1)
    if isinstance(node, E.Arith):
        left = _linearize(node.left, table)
        right = _linearize(node.right, table)
        if left is None or right is None:
            return None
        if node.op == "+":
            return _lin_combine(left, right, 1)
        if node.op == "-":
            return _lin_combine(left, right, -1)
        if node.op == "*":
            if not right.coeffs:
                return _lin_scale(left, right.const, right.den)
            if not left.coeffs:
                return _lin_scale(right, left.const, left.den)
            return None  # variable * variable
        if node.op == "/":
            if right.coeffs or right.const == 0:
                return None  # variable divisor, or division by zero
            return _lin_scale(left, right.den, right.const)
    return None


def _to_term(node: E.Expr, table: _SymbolTable):
    if isinstance(node, E.IntLit):
        return TConst(node.value)
    if isinstance(node, E.AttrRef):
        return TVar(table.attribute(node.feature_name, node.attr_name, node.feature_id))
    if isinstance(node, E.Arith):
        return TBin(node.op, _to_term(node.left, table), _to_term(node.right, table))
    raise CompileError(f"not an arithmetic term: {E.render(node)}")


def _compile_comparison(node: E.Cmp, table: _SymbolTable) -> Node:
    attr_vars = sorted(
        {
            table.attribute(r.feature_name, r.attr_name, r.feature_id)
            for side in (node.left, node.right)
            for r in E.attr_refs(side)
        }
    )
    left = _linearize(node.left, table)
    right = _linearize(node.right, table)
    cmp_node: Node
    if left is not None and right is not None:
        diff = _lin_combine(left, right, -1)  # num/den OP 0 with den > 0
        terms = tuple(sorted(((c, v) for v, c in diff.coeffs.items()), key=lambda t: t[1]))
        const = diff.const
        if node.op == "=":
            cmp_node = LinCmp(EQ, terms, const)
        elif node.op == "\\=":
            cmp_node = LinCmp(NE, terms, const)
        elif node.op == "=<":
            cmp_node = LinCmp(LE, terms, const)
        elif node.op == "<":
            cmp_node = LinCmp(LE, terms, const + 1)
        elif node.op == ">=":
            cmp_node = LinCmp(LE, tuple((-c, v) for c, v in terms), -const)
        else:  # ">"
            cmp_node = LinCmp(LE, tuple((-c, v) for c, v in terms), -const + 1)
    else:
        table.warnings.append(
            f"non-linear comparison {E.render(node)!r}: integer division "
            "truncates toward zero"
        )
        cmp_node = TermCmp(node.op, _to_term(node.left, table), _to_term(node.right, table))
    if not attr_vars:
        return cmp_node
    guards = tuple(LinCmp(NE, ((1, v),), -table.nil) for v in attr_vars)
    guard = guards[0] if len(guards) == 1 else AndOp(guards)
    return ImpliesOp(guard, cmp_node)


def _compile_bool(node: E.Expr, table: _SymbolTable) -> Node:
    if isinstance(node, E.ExistRef):
        return LinCmp(EQ, ((1, table.feature(node.feature_name, node.feature_id)),), -1)
    if isinstance(node, E.NonexistRef):
        return LinCmp(EQ, ((1, table.feature(node.feature_name, node.feature_id)),), 0)
    if isinstance(node, E.Cmp):
        return _compile_comparison(node, table)
    if isinstance(node, E.Not):
        return NotOp(_compile_bool(node.child, table))
    if isinstance(node, E.And):
        return AndOp((_compile_bool(node.left, table), _compile_bool(node.right, table)))
    if isinstance(node, E.Or):
        return OrOp((_compile_bool(node.left, table), _compile_bool(node.right, table)))
    if isinstance(node, E.Implies):
        return ImpliesOp(_compile_bool(node.left, table), _compile_bool(node.right, table))
    if isinstance(node, E.Iff):
        return IffOp(_compile_bool(node.left, table), _compile_bool(node.right, table))
    raise CompileError(f"not a boolean expression: {E.render(node)}")


def compile_ctc(expression: E.Expr, model: FeatureModel, csp: Csp) -> CompiledConstraint:
    """Compile a standalone constraint expression against an existing CSP."""
    table = _SymbolTable(model, dict(csp.feature_var), dict(csp.attr_var), csp.nil, [])
    node = _compile_bool(expression, table)
    return CompiledConstraint(
        id=-1,
        origin=Assumption(E.render(expression)),
        text=E.render(expression),
        node=node,
        variables=frozenset(node_vars(node)),
    )


# -- assumptions ----------------------------------------------------------------


def assume_feature(csp: Csp, feature_id: str, value: int) -> CompiledConstraint:
    var = csp.require_feature_var(feature_id)
    text = f"{csp.var_name(var)} = {value}"
    return CompiledConstraint(
        id=-1,
        origin=Assumption(text),
        text=text,
        node=LinCmp(EQ, ((1, var),), -value),
        variables=frozenset((var,)),
    )


def assume_attr_eq(csp: Csp, feature_id: str, attr_name: str, value: int) -> CompiledConstraint:
    var = csp.require_attr_var(feature_id, attr_name)
    text = f"{csp.var_name(var)} = {value}"
    return CompiledConstraint(
        id=-1,
        origin=Assumption(text),
        text=text,
        node=LinCmp(EQ, ((1, var),), -value),
        variables=frozenset((var,)),
    )


def assume_attr_ne(csp: Csp, feature_id: str, attr_name: str, value: int) -> CompiledConstraint:
    var = csp.require_attr_var(feature_id, attr_name)
    text = f"{csp.var_name(var)} \\= {value}"
    return CompiledConstraint(
        id=-1,
        origin=Assumption(text),
        text=text,
        node=LinCmp(NE, ((1, var),), -value),
        variables=frozenset((var,)),
    )


# -- reduction -------------------------------------------------------------------


def _ctc_references(model: FeatureModel) -> tuple[set[str], set[tuple[str, str]]]:
    feat_refs: set[str] = set()
    attr_refs: set[tuple[str, str]] = set()
    for ctc in model.constraints:
        for node in E.walk(ctc.expression):
            if isinstance(node, (E.ExistRef, E.NonexistRef)):
                feat = (
                    model.feature(node.feature_id)
                    if node.feature_id
                    else model.resolve_feature(node.feature_name)
                )
                if feat is not None:
                    feat_refs.add(feat.id)
            elif isinstance(node, E.AttrRef):
                feat = (
                    model.feature(node.feature_id)
                    if node.feature_id
                    else model.resolve_feature(node.feature_name)
                )
                if feat is not None:
                    attr_refs.add((feat.id, node.attr_name))
    return feat_refs, attr_refs


def reduce_model(model: FeatureModel) -> FeatureModel:
    """Remove leaf features and attributes that cannot take part in any
    contradiction because no cross-tree constraint reaches them.

    Applied to fixpoint: (1) abstract attribute sets with no referenced
    member, (2) other unreferenced attributes, (3) whole alternative groups
    of bare unreferenced features, (4) other unreferenced bare leaves.
    Module root features are never removed so grouping stays well-defined.
    """
    feat_refs, attr_refs = _ctc_references(model)
    module_roots = {m.root_feature for m in model.modules}

    kept_attrs: set[tuple[str, str]] = set()
    for feat in model.features():
        for attr in feat.attributes:
            if attr.abstract:
                group_attrs = [(feat.id, attr.name)]
                for rel in feat.child_relations:
                    if isinstance(rel, AlternativeGroup):
                        group_attrs.extend(
                            (c.id, attr.name)
                            for c in rel.children
                            if c.attribute(attr.name) is not None
                        )
                if any(pair in attr_refs for pair in group_attrs):
                    kept_attrs.update(group_attrs)
    for feat in model.features():
        for attr in feat.attributes:
            pair = (feat.id, attr.name)
            if pair in kept_attrs:
                continue
            abstract_member = _in_abstract_set(model, feat, attr)
            if not abstract_member and pair in attr_refs:
                kept_attrs.add(pair)

    alive = {f.id for f in model.features()}

    def feature_bare(feat: Feature) -> bool:
        if any((feat.id, a.name) in kept_attrs for a in feat.attributes):
            return False
        return not any(c.id in alive for c in feat.children())

    changed = True
    while changed:
        changed = False
        for feat in reversed(model.features()):  # bottom-up
            if feat.id not in alive:
                continue
            for rel in feat.child_relations:
                if isinstance(rel, AlternativeGroup):
                    members = [c for c in rel.children if c.id in alive]
                    if members and all(
                        feature_bare(c) and c.id not in feat_refs and c.id not in module_roots
                        for c in members
                    ):
                        for c in members:
                            alive.discard(c.id)
                        changed = True
                else:
                    child = rel.child
                    if (
                        child.id in alive
                        and feature_bare(child)
                        and child.id not in feat_refs
                        and child.id not in module_roots
                    ):
                        alive.discard(child.id)
                        changed = True

    def rebuild(feat: Feature) -> Feature:
        attrs = [
            Attribute(a.name, a.domain, a.abstract, a.span)
            for a in feat.attributes
            if (feat.id, a.name) in kept_attrs
        ]
        relations = []
        for rel in feat.child_relations:
            if isinstance(rel, AlternativeGroup):
                members = [rebuild(c) for c in rel.children if c.id in alive]
                if members:
                    relations.append(AlternativeGroup(members))
            elif rel.child.id in alive:
                built = rebuild(rel.child)
                relations.append(
                    MandatoryRel(built) if isinstance(rel, MandatoryRel) else OptionalRel(built)
                )
        return Feature(feat.name, attrs, relations, span=feat.span)

    new_root = rebuild(model.root)
    new_constraints = [
        CrossTreeConstraint(c.name, c.expression, module=c.module, span=c.span)
        for c in model.constraints
    ]
    new_pragmas = [
        Pragma(p.feature_name, p.property, p.attr_name, p.value, span=p.span)
        for p in model.pragmas
        if _pragma_survives(model, p, alive, kept_attrs)
    ]
    new_modules = [
        ModuleDecl(
            m.id,
            m.root_feature,
            [
                ModuleRef(r.feature_name, r.attr_name, span=r.span)
                for r in m.references
                if _ref_survives(model, r, alive, kept_attrs)
            ],
            span=m.span,
        )
        for m in model.modules
        if m.root_feature in alive
    ]
    return FeatureModel(
        new_root,
        constraints=new_constraints,
        pragmas=new_pragmas,
        modules=new_modules,
        source_file=model.source_file,
    )


# operation name used by the CLI and detector
reduce = reduce_model


def _in_abstract_set(model: FeatureModel, feat: Feature, attr: Attribute) -> bool:
    if attr.abstract:
        return True
    parent_id = model.parent_id(feat.id)
    if parent_id is None:
        return False
    parent = model.feature(parent_id)
    parent_attr = parent.attribute(attr.name)
    if parent_attr is None or not parent_attr.abstract:
        return False
    return any(
        isinstance(rel, AlternativeGroup) and any(c.id == feat.id for c in rel.children)
        for rel in parent.child_relations
    )


def _pragma_survives(
    model: FeatureModel,
    pragma: Pragma,
    alive: set[str],
    kept_attrs: set[tuple[str, str]],
) -> bool:
    feat = model.resolve_feature(pragma.feature_name)
    if feat is None or feat.id not in alive:
        return False
    if pragma.attr_name is not None:
        return (feat.id, pragma.attr_name) in kept_attrs
    return True


def _ref_survives(
    model: FeatureModel,
    ref: ModuleRef,
    alive: set[str],
    kept_attrs: set[tuple[str, str]],
) -> bool:
    feat = model.resolve_feature(ref.feature_name)
    if feat is None or feat.id not in alive:
        return False
    if ref.attr_name is not None:
        return (feat.id, ref.attr_name) in kept_attrs
    return True
