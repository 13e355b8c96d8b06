"""Parser and serializer for the textual AFM language.

Grammar sketch (full reference in docs/grammar.md):

    model       := item*
    item        := feature_block | module_block | constraint | pragma
    feature_block := "feature" NAME "{" (attr | child)* "}"
    module_block  := "module" NAME "{" ref* feature_block (constraint | pragma)* "}"
    attr        := "attr" NAME ("abstract" | "in" "{" dom ("," dom)* "}") ";"
    dom         := INT | "[" INT ".." INT "]"
    child       := ("mandatory" | "optional") member
                 | "alternative" "{" member member+ "}"
    member      := NAME "{" ... "}" | module_block
    ref         := "ref" NAME (":" NAME)? ";"
    constraint  := "constraint" "(" NAME "," expr ")" "."
    pragma      := "pragma" "(" NAME (":" NAME "=" INT)? "," PROPERTY ")" "."

Operator precedence (loosest first): <==>  ==>  \/  /\  not
comparisons (= \= < =< > >=)  then + -  then * /.  ==> is
right-associative; // starts a line comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import expr as E
from .model import (
    AlternativeGroup,
    AnomalyKind,
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
from .span import SourceSpan


@dataclass
class ParseError:
    span: SourceSpan
    message: str
    expected: tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"{self.span}: {self.message}"


class ParseFailure(Exception):
    """Raised by parse() when the input has syntax or resolution errors."""

    def __init__(self, errors: list[ParseError]):
        self.errors = errors
        super().__init__("; ".join(str(e) for e in errors))


_KEYWORDS = {
    "feature",
    "module",
    "ref",
    "attr",
    "abstract",
    "in",
    "mandatory",
    "optional",
    "alternative",
    "constraint",
    "pragma",
    "exist",
    "nonexist",
    "not",
}

_PROPERTIES = {kind.value: kind for kind in AnomalyKind if kind is not AnomalyKind.VOID_MODEL}

# longest match first
_OPERATORS = [
    "<==>", "==>", "\\/", "/\\", "\\=", "=<", ">=", "..",
    "{", "}", "(", ")", "[", "]", ",", ";", ".", ":",
    "=", "<", ">", "+", "-", "*", "/",
]

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT_RE = re.compile(r"\d+")


@dataclass
class _Token:
    kind: str  # "name", "int", "op", "eof"
    text: str
    span: SourceSpan


def _tokenize(text: str, file: str) -> tuple[list[_Token], list[ParseError]]:
    tokens: list[_Token] = []
    errors: list[ParseError] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
                col += 1
            continue
        m = _NAME_RE.match(text, i)
        if m:
            word = m.group()
            tokens.append(
                _Token("name", word, SourceSpan(file, line, col, line, col + len(word)))
            )
            i = m.end()
            col += len(word)
            continue
        m = _INT_RE.match(text, i)
        if m:
            digits = m.group()
            tokens.append(
                _Token("int", digits, SourceSpan(file, line, col, line, col + len(digits)))
            )
            i = m.end()
            col += len(digits)
            continue
        for op in _OPERATORS:
            if text.startswith(op, i):
                tokens.append(
                    _Token("op", op, SourceSpan(file, line, col, line, col + len(op)))
                )
                i += len(op)
                col += len(op)
                break
        else:
            errors.append(
                ParseError(
                    SourceSpan.point(file, line, col),
                    f"unexpected character {ch!r}",
                )
            )
            i += 1
            col += 1
    tokens.append(_Token("eof", "", SourceSpan.point(file, line, col)))
    return tokens, errors


class _Parser:
    def __init__(self, tokens: list[_Token], file: str):
        self.tokens = tokens
        self.file = file
        self.pos = 0
        self.errors: list[ParseError] = []
        self.constraints: list[CrossTreeConstraint] = []
        self.pragmas: list[Pragma] = []
        self.modules: list[ModuleDecl] = []
        # (module decl, feature object) pairs so root paths can be fixed later
        self._module_roots: list[tuple[ModuleDecl, Feature]] = []

    # -- token helpers ----------------------------------------------------

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    def at_keyword(self, word: str) -> bool:
        return self.at("name", word)

    def expect(self, kind: str, text: str | None = None) -> _Token:
        tok = self.peek()
        if tok.kind == kind and (text is None or tok.text == text):
            return self.advance()
        wanted = text if text is not None else kind
        raise self._error(f"expected {wanted!r}, found {self._describe(tok)}", (wanted,))

    def expect_name(self, what: str) -> _Token:
        tok = self.peek()
        if tok.kind == "name" and tok.text not in _KEYWORDS:
            return self.advance()
        raise self._error(f"expected {what}, found {self._describe(tok)}", (what,))

    def _describe(self, tok: _Token) -> str:
        return "end of input" if tok.kind == "eof" else repr(tok.text)

    def _error(self, message: str, expected: tuple[str, ...] = ()) -> ParseFailure:
        err = ParseError(self.peek().span, message, expected)
        self.errors.append(err)
        return ParseFailure(self.errors)

    # -- model ------------------------------------------------------------

    def parse_model(self) -> FeatureModel:
        root: Feature | None = None
        if self.at("eof"):
            raise self._error("expected feature declaration", ("feature", "module"))
        while not self.at("eof"):
            if self.at_keyword("feature") or self.at_keyword("module"):
                if root is not None:
                    raise self._error("a model has exactly one root feature")
                if self.at_keyword("feature"):
                    root = self.parse_feature_block()
                else:
                    root = self.parse_module_block()
            elif self.at_keyword("constraint"):
                self.parse_constraint(None)
            elif self.at_keyword("pragma"):
                self.parse_pragma()
            else:
                raise self._error(
                    f"expected feature declaration, found {self._describe(self.peek())}",
                    ("feature", "module", "constraint", "pragma"),
                )
        if root is None:
            raise self._error("expected feature declaration", ("feature",))

        self._fix_module_paths(root)
        return FeatureModel(
            root,
            constraints=self.constraints,
            pragmas=self.pragmas,
            modules=self.modules,
            source_file=self.file,
        )

    def _fix_module_paths(self, root: Feature) -> None:
        # feature ids are dotted paths known only once the tree is complete
        paths: dict[int, str] = {}

        def visit(feat: Feature, path: str) -> None:
            paths[id(feat)] = path
            for child in feat.children():
                visit(child, f"{path}.{child.name}")

        visit(root, root.name)
        for decl, feat in self._module_roots:
            decl.root_feature = paths.get(id(feat), feat.name)

    # -- features ---------------------------------------------------------

    def parse_feature_block(self) -> Feature:
        self.expect("name", "feature")
        return self.parse_feature_body()

    def parse_feature_body(self) -> Feature:
        name_tok = self.expect_name("feature name")
        feat = Feature(name=name_tok.text, span=name_tok.span)
        self.expect("op", "{")
        while not self.at("op", "}"):
            if self.at_keyword("attr"):
                feat.attributes.append(self.parse_attribute())
            elif self.at_keyword("mandatory") or self.at_keyword("optional"):
                kw = self.advance().text
                child = self.parse_child_member()
                rel = MandatoryRel(child) if kw == "mandatory" else OptionalRel(child)
                feat.child_relations.append(rel)
                self._skip_optional_semicolon()
            elif self.at_keyword("alternative"):
                self.advance()
                self.expect("op", "{")
                members: list[Feature] = []
                while not self.at("op", "}"):
                    members.append(self.parse_child_member())
                self.expect("op", "}")
                if len(members) < 2:
                    raise self._error("alternative group needs at least 2 members")
                feat.child_relations.append(AlternativeGroup(members))
                self._skip_optional_semicolon()
            else:
                raise self._error(
                    f"expected 'attr', 'mandatory', 'optional', 'alternative' or "
                    f"'}}', found {self._describe(self.peek())}",
                    ("attr", "mandatory", "optional", "alternative", "}"),
                )
        self.expect("op", "}")
        return feat

    def parse_child_member(self) -> Feature:
        if self.at_keyword("module"):
            return self.parse_module_block()
        return self.parse_feature_body()

    def _skip_optional_semicolon(self) -> None:
        if self.at("op", ";"):
            self.advance()

    def parse_attribute(self) -> Attribute:
        self.expect("name", "attr")
        name_tok = self.expect_name("attribute name")
        if self.at_keyword("abstract"):
            self.advance()
            self.expect("op", ";")
            # domain is the union of the child domains, computed on assembly
            return Attribute(name_tok.text, frozenset(), abstract=True, span=name_tok.span)
        self.expect("name", "in")
        self.expect("op", "{")
        values: set[int] = set()
        while True:
            if self.at("op", "["):
                self.advance()
                lo = self.parse_int()
                self.expect("op", "..")
                hi = self.parse_int()
                self.expect("op", "]")
                if lo > hi:
                    raise self._error(f"empty range [{lo}..{hi}]")
                values.update(range(lo, hi + 1))
            else:
                values.add(self.parse_int())
            if self.at("op", ","):
                self.advance()
                continue
            break
        self.expect("op", "}")
        self.expect("op", ";")
        return Attribute(name_tok.text, frozenset(values), span=name_tok.span)

    def parse_int(self) -> int:
        negative = False
        if self.at("op", "-"):
            self.advance()
            negative = True
        tok = self.expect("int")
        value = int(tok.text)
        return -value if negative else value

    # -- modules ----------------------------------------------------------

    def parse_module_block(self) -> Feature:
        """Parse ``module Name { refs feature ... constraints/pragmas }``;
        returns the module's root feature."""
        self.expect("name", "module")
        name_tok = self.expect_name("module name")
        decl = ModuleDecl(id=name_tok.text, span=name_tok.span)
        self.modules.append(decl)  # pre-order: outer module registers first
        self.expect("op", "{")
        while self.at_keyword("ref"):
            self.advance()
            feat_tok = self.expect_name("feature name")
            attr_name = None
            if self.at("op", ":"):
                self.advance()
                attr_name = self.expect_name("attribute name").text
            self.expect("op", ";")
            decl.references.append(
                ModuleRef(feat_tok.text, attr_name, span=feat_tok.span)
            )
        feat = self.parse_feature_block()
        while self.at_keyword("constraint") or self.at_keyword("pragma"):
            if self.at_keyword("constraint"):
                self.parse_constraint(decl.id)
            else:
                self.parse_pragma()
        self.expect("op", "}")
        self._module_roots.append((decl, feat))
        return feat

    # -- constraints and pragmas -------------------------------------------

    def parse_constraint(self, module: str | None) -> None:
        kw = self.expect("name", "constraint")
        self.expect("op", "(")
        name_tok = self.expect_name("constraint name")
        self.expect("op", ",")
        expression = self.parse_expr()
        self.expect("op", ")")
        self.expect("op", ".")
        self._require_boolean(expression)
        self.constraints.append(
            CrossTreeConstraint(name_tok.text, expression, module=module, span=kw.span)
        )

    def parse_pragma(self) -> None:
        kw = self.expect("name", "pragma")
        self.expect("op", "(")
        feat_tok = self.expect_name("feature name")
        attr_name: str | None = None
        value: int | None = None
        if self.at("op", ":"):
            self.advance()
            attr_name = self.expect_name("attribute name").text
            self.expect("op", "=")
            value = self.parse_int()
        self.expect("op", ",")
        prop_tok = self.expect_name("anomaly property")
        if prop_tok.text not in _PROPERTIES:
            options = ", ".join(sorted(_PROPERTIES))
            raise self._error(
                f"unknown anomaly property {prop_tok.text!r} (one of: {options})"
            )
        self.expect("op", ")")
        self.expect("op", ".")
        self.pragmas.append(
            Pragma(
                feature_name=feat_tok.text,
                property=_PROPERTIES[prop_tok.text],
                attr_name=attr_name,
                value=value,
                span=kw.span,
            )
        )

    # -- expressions --------------------------------------------------------

    def parse_expr(self) -> E.Expr:
        return self.parse_iff()

    def parse_iff(self) -> E.Expr:
        left = self.parse_implies()
        while self.at("op", "<==>"):
            span = self.advance().span
            right = self.parse_implies()
            node = E.Iff(left, right)
            node.span = span
            left = node
        return left

    def parse_implies(self) -> E.Expr:
        left = self.parse_or()
        if self.at("op", "==>"):
            span = self.advance().span
            right = self.parse_implies()  # right-associative
            node = E.Implies(left, right)
            node.span = span
            return node
        return left

    def parse_or(self) -> E.Expr:
        left = self.parse_and()
        while self.at("op", "\\/"):
            span = self.advance().span
            right = self.parse_and()
            node = E.Or(left, right)
            node.span = span
            left = node
        return left

    def parse_and(self) -> E.Expr:
        left = self.parse_not()
        while self.at("op", "/\\"):
            span = self.advance().span
            right = self.parse_not()
            node = E.And(left, right)
            node.span = span
            left = node
        return left

    def parse_not(self) -> E.Expr:
        if self.at_keyword("not"):
            span = self.advance().span
            node = E.Not(self.parse_not())
            node.span = span
            return node
        return self.parse_comparison()

    def parse_comparison(self) -> E.Expr:
        left = self.parse_additive()
        for op in E.CMP_OPS:
            if self.at("op", op):
                span = self.advance().span
                right = self.parse_additive()
                node = E.Cmp(op, left, right)
                node.span = span
                return node
        return left

    def parse_additive(self) -> E.Expr:
        left = self.parse_multiplicative()
        while self.at("op", "+") or self.at("op", "-"):
            op_tok = self.advance()
            right = self.parse_multiplicative()
            node = E.Arith(op_tok.text, left, right)
            node.span = op_tok.span
            left = node
        return left

    def parse_multiplicative(self) -> E.Expr:
        left = self.parse_unary()
        while self.at("op", "*") or self.at("op", "/"):
            op_tok = self.advance()
            right = self.parse_unary()
            node = E.Arith(op_tok.text, left, right)
            node.span = op_tok.span
            left = node
        return left

    def parse_unary(self) -> E.Expr:
        if self.at("op", "-"):
            span = self.advance().span
            child = self.parse_unary()
            if isinstance(child, E.IntLit):
                child.value = -child.value
                return child
            node = E.Arith("-", E.IntLit(0), child)
            node.span = span
            return node
        return self.parse_atom()

    def parse_atom(self) -> E.Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.advance()
            node = E.IntLit(int(tok.text))
            node.span = tok.span
            return node
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            inner = self.parse_expr()
            self.expect("op", ")")
            return inner
        if tok.kind == "name" and tok.text in ("exist", "nonexist"):
            self.advance()
            self.expect("op", "(")
            feat_tok = self.expect_name("feature name")
            self.expect("op", ")")
            cls = E.ExistRef if tok.text == "exist" else E.NonexistRef
            node = cls(feat_tok.text)
            node.span = feat_tok.span
            return node
        if tok.kind == "name" and tok.text not in _KEYWORDS:
            self.advance()
            if not self.at("op", ":"):
                raise self._error(
                    f"bare feature name {tok.text!r} in expression; use "
                    f"exist({tok.text}) / nonexist({tok.text}) or an attribute "
                    f"reference {tok.text}:attr"
                )
            self.advance()
            attr_tok = self.expect_name("attribute name")
            node = E.AttrRef(tok.text, attr_tok.text)
            node.span = tok.span
            return node
        raise self._error(
            f"expected expression, found {self._describe(tok)}",
            ("integer", "exist", "nonexist", "Feature:attr", "("),
        )

    def _require_boolean(self, expression: E.Expr) -> None:
        """Comparisons take arithmetic operands; boolean operators take
        boolean operands; the constraint itself must be boolean."""
        errors = self.errors

        def check(node: E.Expr, want_bool: bool) -> None:
            if want_bool and not E.is_boolean(node):
                errors.append(
                    ParseError(
                        node.span or self.peek().span,
                        f"expected a boolean term, found {E.render(node)!r}",
                    )
                )
                return
            if not want_bool and not E.is_arithmetic(node):
                errors.append(
                    ParseError(
                        node.span or self.peek().span,
                        f"expected an arithmetic term, found {E.render(node)!r}",
                    )
                )
                return
            if isinstance(node, (E.And, E.Or, E.Implies, E.Iff)):
                check(node.left, True)
                check(node.right, True)
            elif isinstance(node, E.Not):
                check(node.child, True)
            elif isinstance(node, (E.Cmp, E.Arith)):
                check(node.left, False)
                check(node.right, False)

        before = len(errors)
        check(expression, True)
        if len(errors) > before:
            raise ParseFailure(self.errors)


def _compute_abstract_domains(model: FeatureModel) -> None:
    for feat in model.features():
        for attr in feat.attributes:
            if not attr.abstract:
                continue
            union: set[int] = set()
            for rel in feat.child_relations:
                if not isinstance(rel, AlternativeGroup):
                    continue
                for child in rel.children:
                    child_attr = child.attribute(attr.name)
                    if child_attr is not None:
                        union |= child_attr.domain
            if union:
                attr.domain = frozenset(union)
            # structural problems are reported by validate()


def try_parse(
    text: str, path: str = "<afm>"
) -> tuple[FeatureModel | None, list[ParseError]]:
    """Parse AFM source; returns (model, []) or (None, errors)."""
    tokens, errors = _tokenize(text, path)
    if errors:
        return None, errors
    parser = _Parser(tokens, path)
    try:
        model = parser.parse_model()
    except ParseFailure as failure:
        return None, failure.errors
    _compute_abstract_domains(model)
    violations = model.validate()
    if violations:
        return None, [
            ParseError(v.span or SourceSpan.point(path, 1, 1), str(v))
            for v in violations
        ]
    return model, []


def parse(text: str, path: str = "<afm>") -> FeatureModel:
    """Parse AFM source into a validated model; raises ParseFailure."""
    model, errors = try_parse(text, path)
    if model is None:
        raise ParseFailure(errors)
    return model


def parse_file(path: str) -> FeatureModel:
    with open(path, encoding="utf-8") as handle:
        return parse(handle.read(), path)


# -- serialization ----------------------------------------------------------


def serialize(model: FeatureModel) -> str:
    """Render a model back to AFM text; parse(serialize(m)) is structurally
    equal to the original."""
    return _Writer(model).render()


class _Writer:
    def __init__(self, model: FeatureModel):
        self.model = model
        self.lines: list[str] = []
        self._modules_by_root: dict[str, ModuleDecl] = {
            m.root_feature: m for m in model.modules
        }

    def render(self) -> str:
        self._emit_member(self.model.root, 0, prefix="feature ")
        top_level = [c for c in self.model.constraints if c.module is None]
        if top_level or self.model.pragmas:
            self.lines.append("")
        for ctc in top_level:
            self.lines.append(_constraint_line(ctc))
        for pragma in self.model.pragmas:
            self.lines.append(_pragma_line(pragma))
        return "\n".join(self.lines) + "\n"

    def _emit_member(self, feat: Feature, indent: int, prefix: str) -> None:
        """Emit a feature, wrapped in its module block when it roots one."""
        pad = "  " * indent
        module = self._modules_by_root.get(feat.id)
        if module is None:
            self._emit_feature(feat, indent, prefix)
            return
        if prefix not in ("", "feature "):
            # relation keyword stands alone in front of a module block
            self.lines.append(f"{pad}{prefix.rstrip()}")
        self.lines.append(f"{pad}module {module.id} {{")
        for ref in module.references:
            target = ref.feature_name
            if ref.attr_name:
                target += f":{ref.attr_name}"
            self.lines.append(f"{pad}  ref {target};")
        self._emit_feature(feat, indent + 1, "feature ")
        for ctc in self.model.constraints:
            if ctc.module == module.id:
                self.lines.append(f"{pad}  {_constraint_line(ctc)}")
        self.lines.append(f"{pad}}}")

    def _emit_feature(self, feat: Feature, indent: int, prefix: str) -> None:
        pad = "  " * indent
        head = f"{prefix}{feat.name}"
        if not feat.attributes and not feat.child_relations:
            self.lines.append(f"{pad}{head} {{ }}")
            return
        self.lines.append(f"{pad}{head} {{")
        for attr in feat.attributes:
            self.lines.append(f"{pad}  {_attr_line(attr)}")
        for rel in feat.child_relations:
            if isinstance(rel, AlternativeGroup):
                self.lines.append(f"{pad}  alternative {{")
                for child in rel.children:
                    self._emit_member(child, indent + 2, prefix="")
                self.lines.append(f"{pad}  }}")
            else:
                word = "mandatory " if isinstance(rel, MandatoryRel) else "optional "
                self._emit_member(rel.child, indent + 1, prefix=word)
        self.lines.append(f"{pad}}}")


def _attr_line(attr: Attribute) -> str:
    if attr.abstract:
        return f"attr {attr.name} abstract;"
    return f"attr {attr.name} in {{{_render_domain(attr.domain)}}};"


def _constraint_line(ctc: CrossTreeConstraint) -> str:
    return f"constraint({ctc.name}, {E.render(ctc.expression)})."


def _pragma_line(pragma: Pragma) -> str:
    target = pragma.feature_name
    if pragma.attr_name is not None:
        target += f":{pragma.attr_name}={pragma.value}"
    return f"pragma({target}, {pragma.property.value})."


def _render_domain(domain: frozenset[int]) -> str:
    values = sorted(domain)
    parts: list[str] = []
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[j + 1] == values[j] + 1:
            j += 1
        if j - i >= 2:
            parts.append(f"[{values[i]}..{values[j]}]")
        else:
            parts.extend(str(v) for v in values[i : j + 1])
        i = j + 1
    return ", ".join(parts)


def models_equal(a: FeatureModel, b: FeatureModel) -> bool:
    """Structural equality, ignoring source spans."""

    def feats_equal(x: Feature, y: Feature) -> bool:
        if x.name != y.name:
            return False
        if len(x.attributes) != len(y.attributes):
            return False
        for ax, ay in zip(x.attributes, y.attributes):
            if (ax.name, ax.domain, ax.abstract) != (ay.name, ay.domain, ay.abstract):
                return False
        if len(x.child_relations) != len(y.child_relations):
            return False
        for rx, ry in zip(x.child_relations, y.child_relations):
            if type(rx) is not type(ry):
                return False
            if isinstance(rx, AlternativeGroup):
                assert isinstance(ry, AlternativeGroup)
                if len(rx.children) != len(ry.children):
                    return False
                if not all(feats_equal(cx, cy) for cx, cy in zip(rx.children, ry.children)):
                    return False
            else:
                if not feats_equal(rx.child, ry.child):  # type: ignore[union-attr]
                    return False
        return True

    if not feats_equal(a.root, b.root):
        return False
    if len(a.constraints) != len(b.constraints):
        return False
    for ca, cb in zip(a.constraints, b.constraints):
        if ca.name != cb.name or ca.module != cb.module:
            return False
        if not E.structurally_equal(ca.expression, cb.expression):
            return False
    if [(p.feature_name, p.attr_name, p.value, p.property) for p in a.pragmas] != [
        (p.feature_name, p.attr_name, p.value, p.property) for p in b.pragmas
    ]:
        return False
    mods_a = [(m.id, m.root_feature, [(r.feature_name, r.attr_name) for r in m.references]) for m in a.modules]
    mods_b = [(m.id, m.root_feature, [(r.feature_name, r.attr_name) for r in m.references]) for m in b.modules]
    return mods_a == mods_b
