"""In-memory representation of attributed feature models.

A model is a feature tree (mandatory / optional / alternative-group
relations), integer-valued attributes on features, cross-tree constraints
over existence and attribute values, optional module structure and
pragmas that mark anomalies as intentional.

Features are identified by their dotted path from the root
(``Robot.Tool.Drill``); sibling names must be unique so paths are too.
Cross-tree constraints reference features by bare name, which must be
unambiguous within the model.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator

from . import expr as E
from .span import SourceSpan


@dataclass
class Attribute:
    name: str
    domain: frozenset[int]
    abstract: bool = False
    span: SourceSpan | None = field(default=None, compare=False)


class RelationKind(enum.Enum):
    ROOT = "root"
    MANDATORY = "mandatory"
    OPTIONAL = "optional"
    ALTERNATIVE = "alternative"


@dataclass
class MandatoryRel:
    child: "Feature"


@dataclass
class OptionalRel:
    child: "Feature"


@dataclass
class AlternativeGroup:
    children: list["Feature"]


ChildRelation = MandatoryRel | OptionalRel | AlternativeGroup


@dataclass
class Feature:
    name: str
    attributes: list[Attribute] = field(default_factory=list)
    child_relations: list[ChildRelation] = field(default_factory=list)
    span: SourceSpan | None = field(default=None, compare=False)
    # filled in when the model is assembled
    id: str = field(default="", compare=False)
    module: str | None = field(default=None, compare=False)

    def children(self) -> Iterator["Feature"]:
        for rel in self.child_relations:
            if isinstance(rel, AlternativeGroup):
                yield from rel.children
            else:
                yield rel.child

    def attribute(self, name: str) -> Attribute | None:
        for attr in self.attributes:
            if attr.name == name:
                return attr
        return None


@dataclass
class CrossTreeConstraint:
    name: str
    expression: E.Expr
    module: str | None = field(default=None, compare=False)
    span: SourceSpan | None = field(default=None, compare=False)


class AnomalyKind(enum.Enum):
    VOID_MODEL = "VoidModel"
    DEAD_FEATURE = "DeadFeature"
    FALSE_OPTIONAL_FEATURE = "FalseOptionalFeature"
    DEAD_ATTRIBUTE_VALUE = "DeadAttributeValue"
    FALSE_OPTIONAL_ATTRIBUTE_VALUE = "FalseOptionalAttributeValue"


@dataclass
class Pragma:
    feature_name: str
    property: AnomalyKind
    attr_name: str | None = None
    value: int | None = None
    feature_id: str | None = field(default=None, compare=False)
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass
class ModuleRef:
    feature_name: str
    attr_name: str | None = None
    feature_id: str | None = field(default=None, compare=False)
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass
class ModuleDecl:
    id: str
    root_feature: str = field(default="", compare=False)  # feature id, set on assembly
    references: list[ModuleRef] = field(default_factory=list)
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass
class Violation:
    rule: str
    element: str
    message: str
    span: SourceSpan | None = None

    def __str__(self) -> str:
        where = f" ({self.span})" if self.span else ""
        return f"{self.rule}: {self.message}{where}"


class UnknownElementError(KeyError):
    """Raised when a feature or attribute id does not exist in the model."""


class FeatureModel:
    """A feature tree plus constraints, pragmas and module structure.

    Instances are immutable after construction; analyses may share them
    across threads freely.
    """

    def __init__(
        self,
        root: Feature,
        constraints: list[CrossTreeConstraint] | None = None,
        pragmas: list[Pragma] | None = None,
        modules: list[ModuleDecl] | None = None,
        source_file: str | None = None,
    ) -> None:
        self.root = root
        self.constraints = list(constraints or [])
        self.pragmas = list(pragmas or [])
        self.modules = list(modules or [])
        self.source_file = source_file
        self._features_by_id: dict[str, Feature] = {}
        self._features_by_name: dict[str, list[Feature]] = {}
        self._parent: dict[str, str] = {}
        self._relation: dict[str, RelationKind] = {}
        self._order: dict[str, int] = {}
        self._depth: dict[str, int] = {}
        self._assign_ids()

    def _assign_ids(self) -> None:
        counter = 0

        def visit(feat: Feature, path: str, depth: int) -> None:
            nonlocal counter
            feat.id = path
            feat.module = None
            self._features_by_id[path] = feat
            self._features_by_name.setdefault(feat.name, []).append(feat)
            self._order[path] = counter
            self._depth[path] = depth
            counter += 1
            for rel in feat.child_relations:
                if isinstance(rel, AlternativeGroup):
                    kind, kids = RelationKind.ALTERNATIVE, rel.children
                else:
                    kind = (
                        RelationKind.MANDATORY
                        if isinstance(rel, MandatoryRel)
                        else RelationKind.OPTIONAL
                    )
                    kids = [rel.child]
                for child in kids:
                    child_path = f"{path}.{child.name}"
                    self._parent[child_path] = path
                    self._relation[child_path] = kind
                    visit(child, child_path, depth + 1)

        self._relation[self.root.name] = RelationKind.ROOT
        visit(self.root, self.root.name, 0)
        # modules appear in document order, outer before inner: tag whole
        # subtrees and let inner modules overwrite their region
        for mod in self.modules:
            root_feat = self._features_by_id.get(mod.root_feature)
            if root_feat is None:
                continue
            stack = [root_feat]
            while stack:
                feat = stack.pop()
                feat.module = mod.id
                stack.extend(feat.children())

    # -- lookups ---------------------------------------------------------

    def features(self) -> list[Feature]:
        """All features in declaration (pre-order) order."""
        return sorted(self._features_by_id.values(), key=lambda f: self._order[f.id])

    def feature(self, feature_id: str) -> Feature:
        try:
            return self._features_by_id[feature_id]
        except KeyError:
            raise UnknownElementError(f"unknown feature id {feature_id!r}") from None

    def has_feature(self, feature_id: str) -> bool:
        return feature_id in self._features_by_id

    def resolve_feature(self, name: str) -> Feature | None:
        """Resolve a bare feature name or a dotted path; None if unknown/ambiguous."""
        if name in self._features_by_id:
            return self._features_by_id[name]
        matches = self._features_by_name.get(name, [])
        return matches[0] if len(matches) == 1 else None

    def resolution_error(self, name: str) -> str:
        matches = self._features_by_name.get(name, [])
        if len(matches) > 1:
            paths = ", ".join(sorted(f.id for f in matches))
            return f"ambiguous feature reference {name!r} (candidates: {paths})"
        return f"unknown feature {name!r}"

    def parent_id(self, feature_id: str) -> str | None:
        self.feature(feature_id)
        return self._parent.get(feature_id)

    def relation_kind(self, feature_id: str) -> RelationKind:
        self.feature(feature_id)
        return self._relation[feature_id]

    def declaration_index(self, feature_id: str) -> int:
        return self._order[feature_id]

    def depth(self, feature_id: str) -> int:
        return self._depth[feature_id]

    def subtree_ids(self, feature_id: str) -> list[str]:
        out: list[str] = []
        stack = [self.feature(feature_id)]
        while stack:
            feat = stack.pop()
            out.append(feat.id)
            stack.extend(feat.children())
        return sorted(out, key=lambda fid: self._order[fid])

    def attributes(self) -> list[tuple[Feature, Attribute]]:
        """All (feature, attribute) pairs in declaration order."""
        pairs: list[tuple[Feature, Attribute]] = []
        for feat in self.features():
            for attr in feat.attributes:
                pairs.append((feat, attr))
        return pairs

    def size(self) -> tuple[int, int, int]:
        """(feature count, attribute count, cross-tree constraint count)."""
        return (
            len(self._features_by_id),
            sum(len(f.attributes) for f in self._features_by_id.values()),
            len(self.constraints),
        )

    # -- structural queries ----------------------------------------------

    def variation_points(self) -> set[str]:
        """Feature ids whose presence can vary: optional features and
        alternative-group members."""
        return {
            fid
            for fid, kind in self._relation.items()
            if kind in (RelationKind.OPTIONAL, RelationKind.ALTERNATIVE)
        }

    def chain_head(self, feature_id: str) -> str:
        """Topmost feature sharing this feature's existence value.

        Walks up while the relation to the parent is mandatory; stops at
        the root, at optional features and at alternative-group members.
        """
        current = self.feature(feature_id).id
        while self._relation[current] is RelationKind.MANDATORY:
            current = self._parent[current]
        return current

    def mandatory_chain(self, head_id: str) -> list[str]:
        """The head plus every feature reachable from it via mandatory
        relations only."""
        out = [head_id]
        stack = [self.feature(head_id)]
        while stack:
            feat = stack.pop()
            for rel in feat.child_relations:
                if isinstance(rel, MandatoryRel):
                    out.append(rel.child.id)
                    stack.append(rel.child)
        return out

    # -- validation --------------------------------------------------------

    def validate(self) -> list[Violation]:
        """Check every structural invariant; empty list means valid."""
        violations: list[Violation] = []
        self._check_tree(violations)
        self._check_attributes(violations)
        self._check_constraints(violations)
        self._check_pragmas(violations)
        self._check_modules(violations)
        return violations

    def _check_tree(self, out: list[Violation]) -> None:
        for feat in self.features():
            names: set[str] = set()
            for child in feat.children():
                if child.name in names:
                    out.append(
                        Violation(
                            "DuplicateSiblingName",
                            feat.id,
                            f"feature {feat.name!r} has two children named {child.name!r}",
                            child.span,
                        )
                    )
                names.add(child.name)
            for rel in feat.child_relations:
                if isinstance(rel, AlternativeGroup) and len(rel.children) < 2:
                    out.append(
                        Violation(
                            "GroupTooSmall",
                            feat.id,
                            f"alternative group under {feat.name!r} has "
                            f"{len(rel.children)} member(s); at least 2 required",
                            feat.span,
                        )
                    )

    def _check_attributes(self, out: list[Violation]) -> None:
        for feat in self.features():
            seen: set[str] = set()
            for attr in feat.attributes:
                if attr.name in seen:
                    out.append(
                        Violation(
                            "DuplicateAttributeName",
                            feat.id,
                            f"feature {feat.name!r} declares attribute "
                            f"{attr.name!r} twice",
                            attr.span,
                        )
                    )
                seen.add(attr.name)
                if not attr.domain:
                    out.append(
                        Violation(
                            "EmptyDomain",
                            f"{feat.id}:{attr.name}",
                            f"attribute {feat.name}:{attr.name} has an empty domain",
                            attr.span,
                        )
                    )
                if attr.abstract:
                    self._check_abstract(feat, attr, out)

    def _check_abstract(self, feat: Feature, attr: Attribute, out: list[Violation]) -> None:
        groups = [r for r in feat.child_relations if isinstance(r, AlternativeGroup)]
        if not groups:
            out.append(
                Violation(
                    "AbstractWithoutGroup",
                    f"{feat.id}:{attr.name}",
                    f"abstract attribute {feat.name}:{attr.name} requires an "
                    "alternative group of children",
                    attr.span,
                )
            )
            return
        union: set[int] = set()
        for group in groups:
            for child in group.children:
                child_attr = child.attribute(attr.name)
                if child_attr is None:
                    out.append(
                        Violation(
                            "AbstractChildMissingAttribute",
                            f"{feat.id}:{attr.name}",
                            f"alternative child {child.name!r} does not declare "
                            f"attribute {attr.name!r}",
                            attr.span,
                        )
                    )
                else:
                    union |= child_attr.domain
        if union and frozenset(union) != attr.domain:
            out.append(
                Violation(
                    "AbstractDomainMismatch",
                    f"{feat.id}:{attr.name}",
                    f"abstract attribute {feat.name}:{attr.name} domain "
                    f"{sorted(attr.domain)} differs from the union of child "
                    f"domains {sorted(union)}",
                    attr.span,
                )
            )

    def _resolve_expr_refs(self, ctc: CrossTreeConstraint, out: list[Violation]) -> None:
        for node in E.walk(ctc.expression):
            if isinstance(node, (E.ExistRef, E.NonexistRef)):
                feat = self.resolve_feature(node.feature_name)
                if feat is None:
                    out.append(
                        Violation(
                            "UnresolvedReference",
                            ctc.name,
                            self.resolution_error(node.feature_name),
                            node.span or ctc.span,
                        )
                    )
                else:
                    node.feature_id = feat.id
            elif isinstance(node, E.AttrRef):
                feat = self.resolve_feature(node.feature_name)
                if feat is None:
                    out.append(
                        Violation(
                            "UnresolvedReference",
                            ctc.name,
                            self.resolution_error(node.feature_name),
                            node.span or ctc.span,
                        )
                    )
                elif feat.attribute(node.attr_name) is None:
                    out.append(
                        Violation(
                            "UnresolvedReference",
                            ctc.name,
                            f"feature {feat.name!r} has no attribute {node.attr_name!r}",
                            node.span or ctc.span,
                        )
                    )
                else:
                    node.feature_id = feat.id

    def _check_constraints(self, out: list[Violation]) -> None:
        seen: set[str] = set()
        for ctc in self.constraints:
            if ctc.name in seen:
                out.append(
                    Violation(
                        "DuplicateConstraintName",
                        ctc.name,
                        f"constraint name {ctc.name!r} declared twice",
                        ctc.span,
                    )
                )
            seen.add(ctc.name)
            self._resolve_expr_refs(ctc, out)

    def _check_pragmas(self, out: list[Violation]) -> None:
        for pragma in self.pragmas:
            feat = self.resolve_feature(pragma.feature_name)
            if feat is None:
                out.append(
                    Violation(
                        "UnresolvedReference",
                        pragma.feature_name,
                        self.resolution_error(pragma.feature_name),
                        pragma.span,
                    )
                )
                continue
            pragma.feature_id = feat.id
            if pragma.attr_name is not None:
                attr = feat.attribute(pragma.attr_name)
                if attr is None:
                    out.append(
                        Violation(
                            "UnresolvedReference",
                            f"{feat.id}:{pragma.attr_name}",
                            f"feature {feat.name!r} has no attribute "
                            f"{pragma.attr_name!r}",
                            pragma.span,
                        )
                    )
                elif pragma.value is not None and pragma.value not in attr.domain:
                    out.append(
                        Violation(
                            "BadPragmaTarget",
                            f"{feat.id}:{pragma.attr_name}",
                            f"value {pragma.value} is not in the domain of "
                            f"{feat.name}:{pragma.attr_name}",
                            pragma.span,
                        )
                    )
            feature_kinds = (AnomalyKind.DEAD_FEATURE, AnomalyKind.FALSE_OPTIONAL_FEATURE)
            if pragma.attr_name is None and pragma.property not in feature_kinds:
                out.append(
                    Violation(
                        "BadPragmaTarget",
                        pragma.feature_name,
                        f"{pragma.property.value} pragma needs an attribute-value "
                        "target (Feature:attr=value)",
                        pragma.span,
                    )
                )
            if pragma.attr_name is not None and pragma.property in feature_kinds:
                out.append(
                    Violation(
                        "BadPragmaTarget",
                        pragma.feature_name,
                        f"{pragma.property.value} pragma takes a feature target",
                        pragma.span,
                    )
                )

    def _check_modules(self, out: list[Violation]) -> None:
        seen: set[str] = set()
        for mod in self.modules:
            if mod.id in seen:
                out.append(
                    Violation(
                        "DuplicateModuleName",
                        mod.id,
                        f"module {mod.id!r} declared twice",
                        mod.span,
                    )
                )
            seen.add(mod.id)
            if not self.has_feature(mod.root_feature):
                out.append(
                    Violation(
                        "UnresolvedReference",
                        mod.id,
                        f"module {mod.id!r} root feature {mod.root_feature!r} "
                        "not found",
                        mod.span,
                    )
                )
                continue
            for ref in mod.references:
                feat = self.resolve_feature(ref.feature_name)
                if feat is None:
                    out.append(
                        Violation(
                            "UnresolvedReference",
                            mod.id,
                            self.resolution_error(ref.feature_name),
                            ref.span,
                        )
                    )
                    continue
                ref.feature_id = feat.id
                if feat.module != mod.id:
                    out.append(
                        Violation(
                            "RefOutsideModule",
                            mod.id,
                            f"module {mod.id!r} exposes {ref.feature_name!r} "
                            "which lies outside the module",
                            ref.span,
                        )
                    )
                elif ref.attr_name is not None and feat.attribute(ref.attr_name) is None:
                    out.append(
                        Violation(
                            "UnresolvedReference",
                            mod.id,
                            f"feature {feat.name!r} has no attribute {ref.attr_name!r}",
                            ref.span,
                        )
                    )


def validate(model: FeatureModel) -> list[Violation]:
    return model.validate()


def variation_points(model: FeatureModel) -> set[str]:
    return model.variation_points()


def chain_head(model: FeatureModel, feature_id: str) -> str:
    return model.chain_head(feature_id)
