"""Brute-force oracles for tests and acceptance checks.

Everything here trades speed for obviousness: products are enumerated by
walking the feature tree and filtering total assignments through plain
constraint evaluation, never through the solver's propagation machinery.
Minimal-conflict enumeration tries candidate subsets by increasing size.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .compiler import (
    AlternativeGroup,
    CompiledConstraint,
    Csp,
    MandatoryRel,
    OptionalRel,
    compile_model,
    evaluate,
)
from .model import AnomalyKind, Feature, FeatureModel
from . import solver

AnomalyKey = tuple[AnomalyKind, str | None, str | None, int | None]


def _merge_product(parts: list[list[dict[str, int]]]) -> list[dict[str, int]]:
    out: list[dict[str, int]] = []
    for combo in itertools.product(*parts):
        merged: dict[str, int] = {}
        for piece in combo:
            merged.update(piece)
        out.append(merged)
    return out


def _feature_configs(feat: Feature, present: int) -> list[dict[str, int]]:
    """Tree-valid presence assignments for the subtree under feat."""
    parts: list[list[dict[str, int]]] = [[{feat.id: present}]]
    for rel in feat.child_relations:
        if isinstance(rel, MandatoryRel):
            parts.append(_feature_configs(rel.child, present))
        elif isinstance(rel, OptionalRel):
            choices = _feature_configs(rel.child, 0)
            if present:
                choices = choices + _feature_configs(rel.child, 1)
            parts.append(choices)
        else:
            assert isinstance(rel, AlternativeGroup)
            if present:
                combos: list[dict[str, int]] = []
                for chosen in rel.children:
                    member_parts = [
                        _feature_configs(c, 1 if c is chosen else 0)
                        for c in rel.children
                    ]
                    combos.extend(_merge_product(member_parts))
            else:
                combos = _merge_product(
                    [_feature_configs(c, 0) for c in rel.children]
                )
            parts.append(combos)
    return _merge_product(parts)


def enumerate_products(model: FeatureModel, csp: Csp | None = None) -> list[tuple[int, ...]]:
    """All solutions of the model's CSP as value tuples (variable order of
    the compiled CSP).  Exponential; intended for small models."""
    csp = csp or compile_model(model)
    nil = csp.nil
    configs = _feature_configs(model.root, 0) + _feature_configs(model.root, 1)

    products: list[tuple[int, ...]] = []
    attr_vars = [
        (var.index, var.feature_id, var.attr_name)
        for var in csp.variables
        if var.attr_name is not None
    ]
    for config in configs:
        base = [0] * len(csp.variables)
        for fid, value in config.items():
            base[csp.feature_var[fid]] = value
        value_choices: list[list[int]] = []
        for index, fid, attr_name in attr_vars:
            if config[fid] == 0:
                value_choices.append([nil])
            else:
                attr = model.feature(fid).attribute(attr_name)
                value_choices.append(sorted(attr.domain))
        for combo in itertools.product(*value_choices):
            values = list(base)
            for (index, _, _), value in zip(attr_vars, combo):
                values[index] = value
            if all(evaluate(c.node, values) for c in csp.constraints):
                products.append(tuple(values))
    return products


@dataclass
class Classification:
    void: bool
    anomalies: set[AnomalyKey]
    product_count: int


def classify_anomalies(model: FeatureModel, csp: Csp | None = None) -> Classification:
    """Ground-truth anomaly classification from exhaustive enumeration.

    A value is false-optional only when its attribute has at least two
    values; a single-valued attribute leaves nothing optional to vary.
    """
    csp = csp or compile_model(model)
    products = enumerate_products(model, csp)
    if not products:
        return Classification(True, {(AnomalyKind.VOID_MODEL, None, None, None)}, 0)

    anomalies: set[AnomalyKey] = set()
    vps = model.variation_points()
    for feat in model.features():
        fvar = csp.feature_var[feat.id]
        selected = [p for p in products if p[fvar] == 1]
        if not selected:
            anomalies.add((AnomalyKind.DEAD_FEATURE, feat.id, None, None))
        if feat.id in vps and len(selected) == len(products):
            anomalies.add((AnomalyKind.FALSE_OPTIONAL_FEATURE, feat.id, None, None))
    for feat, attr in model.attributes():
        avar = csp.attr_var[(feat.id, attr.name)]
        fvar = csp.feature_var[feat.id]
        with_feature = [p for p in products if p[fvar] == 1]
        for value in sorted(attr.domain):
            if not any(p[avar] == value for p in products):
                anomalies.add(
                    (AnomalyKind.DEAD_ATTRIBUTE_VALUE, feat.id, attr.name, value)
                )
            if len(attr.domain) >= 2 and all(p[avar] == value for p in with_feature):
                anomalies.add(
                    (
                        AnomalyKind.FALSE_OPTIONAL_ATTRIBUTE_VALUE,
                        feat.id,
                        attr.name,
                        value,
                    )
                )
    return Classification(False, anomalies, len(products))


def subset_consistent(
    csp: Csp,
    background: Sequence[CompiledConstraint],
    constraint_ids: Iterable[int],
) -> bool:
    ok, _ = solver.check(csp, assumptions=background, active=list(constraint_ids))
    return ok


def enumerate_minimal_conflicts(
    csp: Csp,
    background: Sequence[CompiledConstraint],
    candidates: Sequence[CompiledConstraint],
    max_size: int | None = None,
) -> list[frozenset[int]]:
    """All inclusion-minimal conflicting candidate subsets, by exhaustive
    subset search of increasing size (capped by max_size when the 2^n
    sweep would be too slow; every returned set is exactly minimal)."""
    n = len(candidates)
    limit = n if max_size is None else min(max_size, n)
    if n > 20:
        raise ValueError("exhaustive conflict enumeration capped at 20 candidates")
    if not subset_consistent(csp, background, ()):
        return [frozenset()]
    found: list[frozenset[int]] = []
    ids = [c.id for c in candidates]
    for size in range(1, limit + 1):
        for combo in itertools.combinations(range(n), size):
            combo_set = frozenset(combo)
            if any(prior <= combo_set for prior in found):
                continue
            if not subset_consistent(csp, background, (ids[i] for i in combo)):
                found.append(combo_set)
    return found


def conflict_is_minimal(
    csp: Csp,
    background: Sequence[CompiledConstraint],
    conflict_ids: Sequence[int],
) -> tuple[bool, bool]:
    """(inconsistent, minimal): direct verification of a conflict set."""
    inconsistent = not subset_consistent(csp, background, conflict_ids)
    minimal = all(
        subset_consistent(
            csp, background, (cid for cid in conflict_ids if cid != dropped)
        )
        for dropped in conflict_ids
    )
    return inconsistent, minimal
