"""Seeded synthetic model generation with optional planted anomalies.

Non-planted cross-tree constraints are entailed by the feature tree or by
the attribute domains, so they wire elements into the constraint graph
without changing the product set; every anomaly a generated model contains
comes from a plant and is recorded in the sidecar manifest.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field

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
    RelationKind,
)
from .parser import serialize


@dataclass
class GeneratorSpec:
    features: int = 20
    attributes: int = 8
    optional_ratio: float = 0.3
    alt_groups: int = 2
    alt_group_size: int = 3
    ctcs: int = 5
    modules: int = 0
    seed: int = 0
    plant_dead_features: int = 0
    plant_false_optional_features: int = 0
    plant_dead_values: int = 0
    plant_false_optional_values: int = 0
    # fraction of features eligible as benign constraint targets; the rest
    # stay constraint-free so reduction has something to remove
    ctc_pool_ratio: float = 0.4

    def validate(self) -> None:
        if self.features < 1:
            raise ValueError("features must be >= 1")
        if self.alt_group_size < 2:
            raise ValueError("alt_group_size must be >= 2")
        if self.alt_groups * self.alt_group_size > max(0, self.features - 1):
            raise ValueError("alternative groups do not fit into the feature budget")
        if not 0.0 <= self.optional_ratio <= 1.0:
            raise ValueError("optional_ratio must be within [0, 1]")
        for name in (
            "attributes",
            "ctcs",
            "modules",
            "plant_dead_features",
            "plant_false_optional_features",
            "plant_dead_values",
            "plant_false_optional_values",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class PlantedAnomaly:
    kind: str
    feature: str                 # feature id (dotted path)
    attribute: str | None = None
    value: int | None = None


@dataclass
class Manifest:
    seed: int
    planted: list[PlantedAnomaly] = field(default_factory=list)
    expected_anomalies: list[PlantedAnomaly] = field(default_factory=list)

    def expected_keys(self) -> set[tuple]:
        return {
            (AnomalyKind(e.kind), e.feature, e.attribute, e.value)
            for e in self.expected_anomalies
        }

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


@dataclass
class GeneratedModel:
    model: FeatureModel
    text: str
    manifest: Manifest


def _attr_ref(feat: Feature, attr: Attribute) -> E.AttrRef:
    return E.AttrRef(feat.name, attr.name)


class _Builder:
    def __init__(self, spec: GeneratorSpec):
        spec.validate()
        self.spec = spec
        self.rng = random.Random(spec.seed)
        self.features: list[Feature] = []
        self.parent_of: dict[str, Feature | None] = {}
        self.relation_of: dict[str, RelationKind] = {}
        self.group_of: dict[str, AlternativeGroup] = {}
        self.constraints: list[CrossTreeConstraint] = []
        self.attr_counter = 0
        self.ctc_counter = 0

    # -- tree -----------------------------------------------------------------

    def build_tree(self) -> Feature:
        spec = self.spec
        root = Feature("Root")
        self.features.append(root)
        self.parent_of[root.name] = None
        self.relation_of[root.name] = RelationKind.ROOT
        counter = 1

        def new_feature() -> Feature:
            nonlocal counter
            feat = Feature(f"F{counter}")
            counter += 1
            self.features.append(feat)
            return feat

        singles = spec.features - 1 - spec.alt_groups * spec.alt_group_size
        for _ in range(singles):
            parent = self.rng.choice(self.features)
            child = new_feature()
            self.parent_of[child.name] = parent
            if self.rng.random() < spec.optional_ratio:
                parent.child_relations.append(OptionalRel(child))
                self.relation_of[child.name] = RelationKind.OPTIONAL
            else:
                parent.child_relations.append(MandatoryRel(child))
                self.relation_of[child.name] = RelationKind.MANDATORY
        for _ in range(spec.alt_groups):
            parent = self.rng.choice(self.features)
            members = [new_feature() for _ in range(spec.alt_group_size)]
            group = AlternativeGroup(members)
            parent.child_relations.append(group)
            for member in members:
                self.parent_of[member.name] = parent
                self.relation_of[member.name] = RelationKind.ALTERNATIVE
                self.group_of[member.name] = group
        return root

    # -- attributes -------------------------------------------------------------

    def _new_domain(self, size: int | None = None) -> frozenset[int]:
        size = size or self.rng.randint(2, 4)
        base = self.rng.randrange(0, 40)
        values = self.rng.sample(range(base, base + 20), size)
        return frozenset(values)

    def _next_attr_name(self) -> str:
        self.attr_counter += 1
        return f"a{self.attr_counter}"

    def add_attributes(self) -> None:
        budget = self.spec.attributes
        groups = [
            (feat, rel)
            for feat in self.features
            for rel in feat.child_relations
            if isinstance(rel, AlternativeGroup)
        ]
        self.rng.shuffle(groups)
        for feat, rel in groups:
            cost = len(rel.children) + 1
            if budget < cost or self.rng.random() >= 0.5:
                continue
            name = self._next_attr_name()
            union: set[int] = set()
            for child in rel.children:
                domain = self._new_domain()
                union |= domain
                child.attributes.append(Attribute(name, domain))
            feat.attributes.append(Attribute(name, frozenset(union), abstract=True))
            budget -= cost
        while budget > 0:
            feat = self.rng.choice(self.features)
            feat.attributes.append(Attribute(self._next_attr_name(), self._new_domain()))
            budget -= 1

    # -- benign constraints -------------------------------------------------------

    def _ancestors(self, feat: Feature) -> list[Feature]:
        out = []
        parent = self.parent_of[feat.name]
        while parent is not None:
            out.append(parent)
            parent = self.parent_of[parent.name]
        return out

    def _add_ctc(self, expression: E.Expr, module: str | None) -> CrossTreeConstraint:
        self.ctc_counter += 1
        ctc = CrossTreeConstraint(f"ctc{self.ctc_counter}", expression, module=module)
        self.constraints.append(ctc)
        return ctc

    def add_benign_ctcs(self, module_of: dict[str, str | None]) -> None:
        if len(self.features) < 2:
            return
        pool_size = max(2, int(len(self.features) * self.spec.ctc_pool_ratio))
        pool = self.rng.sample(self.features, min(pool_size, len(self.features)))
        non_root = [f for f in pool if f.name != "Root"] or [self.features[1]]
        attred = [(f, a) for f in pool for a in f.attributes if not a.abstract]
        for _ in range(self.spec.ctcs):
            pattern = self.rng.randrange(0, 4 if attred else 2)
            if pattern == 0:
                feat = self.rng.choice(non_root)
                target = self.rng.choice(self._ancestors(feat))
                node: E.Expr = E.Implies(E.ExistRef(feat.name), E.ExistRef(target.name))
            elif pattern == 1:
                a, b = self.rng.choice(pool), self.rng.choice(pool)
                node = E.Implies(
                    E.Or(E.ExistRef(a.name), E.ExistRef(b.name)),
                    E.ExistRef("Root"),
                )
            elif pattern == 2:
                feat, attr = self.rng.choice(attred)
                node = E.Cmp(">=", _attr_ref(feat, attr), E.IntLit(min(attr.domain)))
            else:
                f1, a1 = self.rng.choice(attred)
                f2, a2 = self.rng.choice(attred)
                node = E.Cmp(
                    "=<",
                    E.Arith("+", _attr_ref(f1, a1), _attr_ref(f2, a2)),
                    E.IntLit(max(a1.domain) + max(a2.domain)),
                )
            anchor = next(iter(E.feature_refs(node)), None)
            anchor_name = anchor.feature_name if anchor else next(E.attr_refs(node)).feature_name
            self._add_ctc(node, module_of.get(anchor_name))

    # -- plants ---------------------------------------------------------------------

    def _is_leaf(self, feat: Feature) -> bool:
        return not feat.child_relations

    def _mandatory_ancestry(self, feat: Feature) -> bool:
        parent = self.parent_of[feat.name]
        while parent is not None:
            if self.relation_of[parent.name] is not RelationKind.MANDATORY and (
                self.relation_of[parent.name] is not RelationKind.ROOT
            ):
                return False
            parent = self.parent_of[parent.name]
        return True

    def plant(self, module_of: dict[str, str | None], manifest: Manifest) -> None:
        spec = self.spec
        rng = self.rng
        used: set[str] = set()
        pathify = self._path

        def leaf_vps() -> list[Feature]:
            out = []
            for feat in self.features:
                if feat.name in used or not self._is_leaf(feat) or feat.attributes:
                    continue
                kind = self.relation_of[feat.name]
                if kind is RelationKind.OPTIONAL:
                    out.append(feat)
                elif kind is RelationKind.ALTERNATIVE:
                    if len(self.group_of[feat.name].children) >= 3:
                        out.append(feat)
            return out

        for index in range(spec.plant_dead_features):
            candidates = leaf_vps()
            if not candidates:
                break
            feat = rng.choice(candidates)
            used.add(feat.name)
            if feat.name in self.group_of:
                # one plant per group: a second dead member could leave the
                # last sibling forced into every product
                for sibling in self.group_of[feat.name].children:
                    used.add(sibling.name)
            module = module_of.get(feat.name)
            if index % 2 == 0 or not self._plantable_attrs(module_of, module, used):
                self._add_ctc(
                    E.Implies(E.ExistRef(feat.name), E.ExistRef("Root")), module
                )
                self._add_ctc(
                    E.Implies(E.ExistRef(feat.name), E.NonexistRef("Root")), module
                )
            else:
                host, attr = rng.choice(self._plantable_attrs(module_of, module, used))
                used.add(host.name)
                self._add_ctc(
                    E.Implies(
                        E.ExistRef(feat.name),
                        E.Cmp(">=", _attr_ref(host, attr), E.IntLit(max(attr.domain) + 1)),
                    ),
                    module,
                )
                self._add_ctc(
                    E.Implies(E.ExistRef(feat.name), E.ExistRef(host.name)), module
                )
            manifest.planted.append(PlantedAnomaly("DeadFeature", pathify(feat)))
            manifest.expected_anomalies.append(
                PlantedAnomaly("DeadFeature", pathify(feat))
            )

        for _ in range(spec.plant_false_optional_features):
            candidates = [
                feat
                for feat in leaf_vps()
                if self.relation_of[feat.name] is RelationKind.OPTIONAL
                and self._mandatory_ancestry(feat)
            ]
            if not candidates:
                break
            feat = rng.choice(candidates)
            used.add(feat.name)
            self._add_ctc(E.ExistRef(feat.name), module_of.get(feat.name))
            manifest.planted.append(
                PlantedAnomaly("FalseOptionalFeature", pathify(feat))
            )
            manifest.expected_anomalies.append(
                PlantedAnomaly("FalseOptionalFeature", pathify(feat))
            )

        for _ in range(spec.plant_dead_values):
            candidates = [
                (feat, attr)
                for feat, attr in self._plantable_attrs(module_of, None, used)
                if len(attr.domain) >= 3
            ]
            if not candidates:
                break
            feat, attr = rng.choice(candidates)
            used.add(feat.name)
            value = rng.choice(sorted(attr.domain))
            self._add_ctc(
                E.Cmp("\\=", _attr_ref(feat, attr), E.IntLit(value)),
                module_of.get(feat.name),
            )
            manifest.planted.append(
                PlantedAnomaly("DeadAttributeValue", pathify(feat), attr.name, value)
            )
            manifest.expected_anomalies.append(
                PlantedAnomaly("DeadAttributeValue", pathify(feat), attr.name, value)
            )

        for _ in range(spec.plant_false_optional_values):
            candidates = self._plantable_attrs(module_of, None, used)
            if not candidates:
                break
            feat, attr = rng.choice(candidates)
            used.add(feat.name)
            value = rng.choice(sorted(attr.domain))
            self._add_ctc(
                E.Cmp("=", _attr_ref(feat, attr), E.IntLit(value)),
                module_of.get(feat.name),
            )
            manifest.planted.append(
                PlantedAnomaly(
                    "FalseOptionalAttributeValue", pathify(feat), attr.name, value
                )
            )
            manifest.expected_anomalies.append(
                PlantedAnomaly(
                    "FalseOptionalAttributeValue", pathify(feat), attr.name, value
                )
            )
            for other in sorted(attr.domain):
                if other != value:
                    manifest.expected_anomalies.append(
                        PlantedAnomaly(
                            "DeadAttributeValue", pathify(feat), attr.name, other
                        )
                    )

    def _plantable_attrs(
        self,
        module_of: dict[str, str | None],
        module: str | None,
        used: set[str],
    ) -> list[tuple[Feature, Attribute]]:
        out = []
        abstract_names = {
            (child.name, attr.name)
            for feat in self.features
            for rel in feat.child_relations
            if isinstance(rel, AlternativeGroup)
            for attr in feat.attributes
            if attr.abstract
            for child in rel.children
        }
        for feat in self.features:
            if feat.name in used:
                continue
            if module is not None and module_of.get(feat.name) != module:
                continue
            for attr in feat.attributes:
                if attr.abstract or (feat.name, attr.name) in abstract_names:
                    continue
                out.append((feat, attr))
        return out

    # -- modules -----------------------------------------------------------------

    def _path(self, feat: Feature) -> str:
        parts = [feat.name]
        parent = self.parent_of[feat.name]
        while parent is not None:
            parts.append(parent.name)
            parent = self.parent_of[parent.name]
        return ".".join(reversed(parts))

    def _depth(self, feat: Feature) -> int:
        depth = 0
        parent = self.parent_of[feat.name]
        while parent is not None:
            depth += 1
            parent = self.parent_of[parent.name]
        return depth

    def pick_modules(self) -> tuple[list[ModuleDecl], dict[str, str | None]]:
        spec = self.spec
        module_of: dict[str, str | None] = {f.name: None for f in self.features}
        if spec.modules <= 0:
            return [], module_of
        candidates = [f for f in self.features if self.parent_of[f.name] is not None]
        self.rng.shuffle(candidates)
        chosen = candidates[: spec.modules]
        # outer (shallower) modules first so inner ones override their region
        chosen.sort(key=lambda f: (self._depth(f), f.name))
        decls = []
        for i, feat in enumerate(chosen):
            decls.append(
                ModuleDecl(
                    f"M{i + 1}",
                    root_feature=self._path(feat),
                    references=[ModuleRef(feat.name)],
                )
            )
        for decl, feat in zip(decls, chosen):
            stack = [feat]
            while stack:
                current = stack.pop()
                module_of[current.name] = decl.id
                stack.extend(current.children())
        return decls, module_of


def generate(spec: GeneratorSpec) -> GeneratedModel:
    """Deterministic model synthesis; equal specs yield identical text."""
    builder = _Builder(spec)
    root = builder.build_tree()
    builder.add_attributes()
    decls, module_of = builder.pick_modules()
    manifest = Manifest(seed=spec.seed)
    builder.add_benign_ctcs(module_of)
    builder.plant(module_of, manifest)

    model = FeatureModel(
        root,
        constraints=builder.constraints,
        pragmas=[],
        modules=decls,
        source_file=None,
    )
    violations = model.validate()
    if violations:  # pragma: no cover - generator invariant
        raise AssertionError(f"generated model invalid: {violations[:3]}")
    text = serialize(model)
    return GeneratedModel(model, text, manifest)
