"""Anomaly detection: void model, dead / false-optional features and
attribute values.

Two paths: detect_naive checks every feature and every attribute value
against the full model, one solver call each; detect reduces the model
first, restricts feature checks to variation points, prunes candidate
checks against every witness product, and steers the labeling value order
so witnesses eliminate as many remaining candidates as possible.

A value is a false-optional candidate only when its attribute offers at
least two values; with a single value there is nothing optional to vary
(and every singleton would otherwise be reported on every model).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .compiler import (
    Csp,
    assume_attr_eq,
    assume_attr_ne,
    assume_feature,
    compile_model,
    reduce_model,
)
from .model import AlternativeGroup, AnomalyKind, FeatureModel, RelationKind
from .solver import (
    LabelingOptions,
    Solution,
    SolveStats,
    ValueOrder,
    check,
)


@dataclass(frozen=True)
class Anomaly:
    kind: AnomalyKind
    feature: str | None = None       # feature id
    attribute: str | None = None
    value: int | None = None
    suppressed: bool = False

    def key(self) -> tuple:
        return (self.kind, self.feature, self.attribute, self.value)

    def describe(self, model: FeatureModel | None = None) -> str:
        if self.kind is AnomalyKind.VOID_MODEL:
            return "VoidModel"
        name = self.feature
        if model is not None and self.feature and model.has_feature(self.feature):
            name = model.feature(self.feature).name
        if self.attribute is None:
            text = f"{self.kind.value}({name})"
        else:
            text = f"{self.kind.value}({name}:{self.attribute} = {self.value})"
        return f"{text} [suppressed]" if self.suppressed else text


@dataclass
class AnomalyReport:
    anomalies: list[Anomaly]
    stats: SolveStats
    reduced_size: tuple[int, int, int]  # features, attributes, compiled constraints
    checks_performed: int
    checks_pruned: int
    nil: int
    # candidate partition right after the void-check witness comparison
    check_dead_after_void: frozenset[str] = frozenset()
    check_false_opt_after_void: frozenset[str] = frozenset()
    checked_features: tuple[str, ...] = ()

    @property
    def candidate_checks(self) -> int:
        return self.checks_performed + self.checks_pruned

    @property
    def void(self) -> bool:
        return any(a.kind is AnomalyKind.VOID_MODEL for a in self.anomalies)

    def anomaly_keys(self) -> set[tuple]:
        return {a.key() for a in self.anomalies}

    def unsuppressed(self) -> list[Anomaly]:
        return [a for a in self.anomalies if not a.suppressed]


def default_thread_count() -> int:
    raw = os.environ.get("AFM_DOCTOR_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def check_void(
    model: FeatureModel,
    options: LabelingOptions | None = None,
    stats: SolveStats | None = None,
) -> tuple[bool, Solution | None]:
    """True plus a witness product iff the model represents any product."""
    csp = compile_model(model)
    return check(csp, (), options, stats=stats)


def _sort_key(model: FeatureModel):
    kind_order = {
        AnomalyKind.VOID_MODEL: 0,
        AnomalyKind.DEAD_FEATURE: 1,
        AnomalyKind.FALSE_OPTIONAL_FEATURE: 2,
        AnomalyKind.DEAD_ATTRIBUTE_VALUE: 3,
        AnomalyKind.FALSE_OPTIONAL_ATTRIBUTE_VALUE: 4,
    }

    def key(anomaly: Anomaly):
        decl = (
            model.declaration_index(anomaly.feature)
            if anomaly.feature and model.has_feature(anomaly.feature)
            else -1
        )
        return (
            decl,
            anomaly.attribute or "",
            anomaly.value if anomaly.value is not None else 0,
            kind_order[anomaly.kind],
        )

    return key


def _apply_pragmas(model: FeatureModel, anomalies: list[Anomaly]) -> list[Anomaly]:
    suppressed: set[tuple] = set()
    for pragma in model.pragmas:
        feat = model.resolve_feature(pragma.feature_name)
        if feat is None:
            continue
        suppressed.add((pragma.property, feat.id, pragma.attr_name, pragma.value))
    if not suppressed:
        return anomalies
    return [
        replace(a, suppressed=True)
        if (a.kind, a.feature, a.attribute, a.value) in suppressed
        else a
        for a in anomalies
    ]


def _value_candidates(
    model: FeatureModel,
) -> tuple[list[tuple[str, str, int]], list[tuple[str, str, int]]]:
    dead: list[tuple[str, str, int]] = []
    false_opt: list[tuple[str, str, int]] = []
    for feat, attr in model.attributes():
        for value in sorted(attr.domain):
            dead.append((feat.id, attr.name, value))
            if len(attr.domain) >= 2:
                false_opt.append((feat.id, attr.name, value))
    return dead, false_opt


def detect_naive(
    model: FeatureModel,
    options: LabelingOptions | None = None,
) -> AnomalyReport:
    """Check every feature and attribute value on the unreduced model."""
    csp = compile_model(model)
    stats = SolveStats()
    performed = 0

    consistent, _ = check(csp, (), options, stats=stats)
    performed += 1
    size = model.size()
    reduced_size = (size[0], size[1], len(csp.constraints))
    if not consistent:
        return AnomalyReport(
            [Anomaly(AnomalyKind.VOID_MODEL)],
            stats,
            reduced_size,
            performed,
            0,
            csp.nil,
        )

    anomalies: list[Anomaly] = []
    vps = model.variation_points()
    checked: list[str] = []
    for feat in model.features():
        checked.append(feat.id)
        ok, _ = check(csp, (assume_feature(csp, feat.id, 1),), options, stats=stats)
        performed += 1
        if not ok:
            anomalies.append(Anomaly(AnomalyKind.DEAD_FEATURE, feat.id))
        if feat.id in vps:
            ok, _ = check(csp, (assume_feature(csp, feat.id, 0),), options, stats=stats)
            performed += 1
            if not ok:
                anomalies.append(Anomaly(AnomalyKind.FALSE_OPTIONAL_FEATURE, feat.id))

    dead_vals, fo_vals = _value_candidates(model)
    for fid, attr, value in dead_vals:
        ok, _ = check(csp, (assume_attr_eq(csp, fid, attr, value),), options, stats=stats)
        performed += 1
        if not ok:
            anomalies.append(Anomaly(AnomalyKind.DEAD_ATTRIBUTE_VALUE, fid, attr, value))
    for fid, attr, value in fo_vals:
        assumptions = (
            assume_attr_ne(csp, fid, attr, value),
            assume_feature(csp, fid, 1),
        )
        ok, _ = check(csp, assumptions, options, stats=stats)
        performed += 1
        if not ok:
            anomalies.append(
                Anomaly(AnomalyKind.FALSE_OPTIONAL_ATTRIBUTE_VALUE, fid, attr, value)
            )

    anomalies = _apply_pragmas(model, anomalies)
    anomalies.sort(key=_sort_key(model))
    return AnomalyReport(
        anomalies,
        stats,
        reduced_size,
        performed,
        0,
        csp.nil,
        checked_features=tuple(checked),
    )


@dataclass
class _ValueTaskResult:
    anomalies: list[Anomaly]
    performed: int
    pruned: int
    stats: SolveStats


def _check_attribute_values(
    csp: Csp,
    fid: str,
    attr: str,
    dead_values: list[int],
    fo_values: list[int],
    options: LabelingOptions | None,
) -> _ValueTaskResult:
    """Dead / false-optional checks for one attribute; the latest witness
    of this attribute's own checks prunes its remaining candidates."""
    stats = SolveStats()
    anomalies: list[Anomaly] = []
    performed = 0
    pruned = 0
    dead_pending = list(dead_values)
    fo_pending = list(fo_values)

    avar = csp.attr_var[(fid, attr)]
    fvar = csp.feature_var[fid]

    def prune_with(witness: Solution) -> None:
        nonlocal pruned, fo_pending
        observed = witness[avar]
        if observed in dead_pending:
            dead_pending.remove(observed)
            pruned += 1
        if witness[fvar] == 1:
            remaining = [v for v in fo_pending if v != observed]
            pruned += len(fo_pending) - len(remaining)
            fo_pending = remaining

    while dead_pending:
        value = dead_pending.pop(0)
        ok, witness = check(
            csp, (assume_attr_eq(csp, fid, attr, value),), options, stats=stats
        )
        performed += 1
        if not ok:
            anomalies.append(Anomaly(AnomalyKind.DEAD_ATTRIBUTE_VALUE, fid, attr, value))
        else:
            prune_with(witness)
    while fo_pending:
        value = fo_pending.pop(0)
        assumptions = (
            assume_attr_ne(csp, fid, attr, value),
            assume_feature(csp, fid, 1),
        )
        ok, witness = check(csp, assumptions, options, stats=stats)
        performed += 1
        if not ok:
            anomalies.append(
                Anomaly(AnomalyKind.FALSE_OPTIONAL_ATTRIBUTE_VALUE, fid, attr, value)
            )
        else:
            prune_with(witness)
    return _ValueTaskResult(anomalies, performed, pruned, stats)


def detect(
    model: FeatureModel,
    options: LabelingOptions | None = None,
    *,
    use_reduction: bool = True,
    threads: int | None = None,
) -> AnomalyReport:
    """Efficient detection pipeline: reduction, void check, witness-pruned
    variation-point checks with value-order steering, then attribute-value
    checks on the surviving attributes.  Reports chain-head anomalies only;
    expand_aftereffects() derives the consequences."""
    threads = threads if threads is not None else default_thread_count()
    base_options = options or LabelingOptions()
    reduced = reduce_model(model) if use_reduction else model
    csp = compile_model(reduced)
    stats = SolveStats()
    performed = 0
    pruned = 0

    size = reduced.size()
    reduced_size = (size[0], size[1], len(csp.constraints))

    consistent, witness = check(csp, (), base_options, stats=stats)
    performed += 1
    if not consistent:
        return AnomalyReport(
            [Anomaly(AnomalyKind.VOID_MODEL)],
            stats,
            reduced_size,
            performed,
            pruned,
            csp.nil,
        )

    decl = reduced.declaration_index
    vps = sorted(reduced.variation_points(), key=decl)
    check_dead = set(vps)
    check_false_opt = set(vps)
    # the void witness settles half of the candidate checks: a selected
    # feature cannot be dead, a deselected one cannot be false-optional
    for fid in vps:
        if witness.feature_selected(fid):
            check_dead.discard(fid)
        else:
            check_false_opt.discard(fid)
        pruned += 1
    dead_snapshot = frozenset(check_dead)
    fo_snapshot = frozenset(check_false_opt)

    witness_pool: list[Solution] = [witness]
    anomalies: list[Anomaly] = []
    checked: list[str] = []

    def prune_sets(product: Solution) -> None:
        nonlocal pruned
        for fid in list(check_dead):
            if product.feature_selected(fid):
                check_dead.discard(fid)
                pruned += 1
        for fid in list(check_false_opt):
            if not product.feature_selected(fid):
                check_false_opt.discard(fid)
                pruned += 1

    # dead checks, alternative-group members first; while dead candidates
    # remain their variables are labeled highest-value-first so each witness
    # selects as many candidates as possible
    alt_first = sorted(
        vps,
        key=lambda fid: (
            0 if reduced.relation_kind(fid) is RelationKind.ALTERNATIVE else 1,
            decl(fid),
        ),
    )
    for fid in alt_first:
        if fid not in check_dead:
            continue
        overrides = {
            csp.feature_var[g]: ValueOrder.DOWN_FIRST for g in check_dead
        }
        ok, product = check(
            csp,
            (assume_feature(csp, fid, 1),),
            base_options,
            stats=stats,
            value_order_overrides=overrides,
        )
        performed += 1
        checked.append(fid)
        check_dead.discard(fid)
        if not ok:
            anomalies.append(Anomaly(AnomalyKind.DEAD_FEATURE, fid))
            if fid in check_false_opt:
                # the model is not void, so a dead feature is deselectable
                check_false_opt.discard(fid)
                pruned += 1
        else:
            witness_pool.append(product)
            prune_sets(product)

    # false-optional checks with the smallest-value-first order so witnesses
    # deselect as many remaining candidates as possible
    fo_options = base_options.with_feature_value_order(ValueOrder.UP_FIRST)
    for fid in vps:
        if fid not in check_false_opt:
            continue
        ok, product = check(
            csp, (assume_feature(csp, fid, 0),), fo_options, stats=stats
        )
        performed += 1
        checked.append(fid)
        check_false_opt.discard(fid)
        if not ok:
            anomalies.append(Anomaly(AnomalyKind.FALSE_OPTIONAL_FEATURE, fid))
        else:
            witness_pool.append(product)
            prune_sets(product)

    # attribute-value checks on the surviving attributes, smallest domains
    # first; candidates already decided by some witness are never checked
    attrs = sorted(
        reduced.attributes(), key=lambda pair: (len(pair[1].domain), decl(pair[0].id))
    )
    tasks: list[tuple[str, str, list[int], list[int]]] = []
    for feat, attr in attrs:
        avar = csp.attr_var[(feat.id, attr.name)]
        fvar = csp.feature_var[feat.id]
        dead_values = []
        for value in sorted(attr.domain):
            if any(w[avar] == value for w in witness_pool):
                pruned += 1
            else:
                dead_values.append(value)
        fo_values = []
        if len(attr.domain) >= 2:
            for value in sorted(attr.domain):
                if any(w[fvar] == 1 and w[avar] != value for w in witness_pool):
                    pruned += 1
                else:
                    fo_values.append(value)
        if dead_values or fo_values:
            tasks.append((feat.id, attr.name, dead_values, fo_values))

    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(
                    lambda t: _check_attribute_values(
                        csp, t[0], t[1], t[2], t[3], base_options
                    ),
                    tasks,
                )
            )
    else:
        results = [
            _check_attribute_values(csp, fid, attr, dvals, fvals, base_options)
            for fid, attr, dvals, fvals in tasks
        ]
    for result in results:
        anomalies.extend(result.anomalies)
        performed += result.performed
        pruned += result.pruned
        stats.merge(result.stats)

    anomalies = _apply_pragmas(model, anomalies)
    anomalies.sort(key=_sort_key(model))
    return AnomalyReport(
        anomalies,
        stats,
        reduced_size,
        performed,
        pruned,
        csp.nil,
        check_dead_after_void=dead_snapshot,
        check_false_opt_after_void=fo_snapshot,
        checked_features=tuple(checked),
    )


def expand_aftereffects(model: FeatureModel, report: AnomalyReport) -> AnomalyReport:
    """Close a chain-head report over its consequences so the result equals
    detect_naive's anomaly set.

    Two closures: (1) every feature in a dead feature's subtree is dead,
    and every attribute value on a dead subtree is both unattainable and
    (vacuously) present in all products containing its feature; (2) an
    abstract attribute value whose carrier children are all dead is dead,
    and when only one value of a live abstract attribute survives, that
    value is present in every product containing the feature."""
    if report.void:
        return report
    keys = {a.key() for a in report.anomalies}
    extra: list[Anomaly] = []

    def add(anomaly: Anomaly) -> None:
        if anomaly.key() not in keys:
            keys.add(anomaly.key())
            extra.append(anomaly)

    dead_heads = [
        a.feature
        for a in report.anomalies
        if a.kind is AnomalyKind.DEAD_FEATURE and a.feature
    ]
    dead_all: set[str] = set()
    for head in dead_heads:
        if model.has_feature(head):
            dead_all.update(model.subtree_ids(head))
    for fid in sorted(dead_all, key=model.declaration_index):
        add(Anomaly(AnomalyKind.DEAD_FEATURE, fid))
        feat = model.feature(fid)
        for attr in feat.attributes:
            for value in sorted(attr.domain):
                add(Anomaly(AnomalyKind.DEAD_ATTRIBUTE_VALUE, fid, attr.name, value))
                if len(attr.domain) >= 2:
                    add(
                        Anomaly(
                            AnomalyKind.FALSE_OPTIONAL_ATTRIBUTE_VALUE,
                            fid,
                            attr.name,
                            value,
                        )
                    )

    # abstract attribute values live or die with their carrier children
    for feat in model.features():
        if feat.id in dead_all:
            continue
        for attr in feat.attributes:
            if not attr.abstract:
                continue
            carriers: dict[int, list[str]] = {}
            for rel in feat.child_relations:
                if not isinstance(rel, AlternativeGroup):
                    continue
                for child in rel.children:
                    child_attr = child.attribute(attr.name)
                    if child_attr is None:
                        continue
                    for value in child_attr.domain:
                        carriers.setdefault(value, []).append(child.id)
            dead_values = {
                value
                for value, owners in carriers.items()
                if all(owner in dead_all for owner in owners)
            }
            for value in sorted(dead_values):
                add(Anomaly(AnomalyKind.DEAD_ATTRIBUTE_VALUE, feat.id, attr.name, value))
            remaining = sorted(attr.domain - dead_values)
            if len(remaining) == 1 and len(attr.domain) >= 2:
                add(
                    Anomaly(
                        AnomalyKind.FALSE_OPTIONAL_ATTRIBUTE_VALUE,
                        feat.id,
                        attr.name,
                        remaining[0],
                    )
                )

    merged = _apply_pragmas(model, list(report.anomalies) + extra)
    merged.sort(key=_sort_key(model))
    return replace(report, anomalies=merged)
