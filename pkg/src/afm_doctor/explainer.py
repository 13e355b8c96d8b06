"""Minimal conflict extraction for detected anomalies.

quickxplain() returns one inclusion-minimal conflicting subset of an
ordered candidate sequence (earlier candidates are preferred).  explain()
drives it from an anomaly: Simple mode runs a single pass over all native
constraints; Cascading mode first searches over constraint groups (module
contents as one conjunction each) and then over the natives of the
conflicting groups only.
"""

from __future__ import annotations

from dataclasses import dataclass

from .compiler import (
    CompiledConstraint,
    Csp,
    CtcOrigin,
    TreeRelation,
    assume_attr_eq,
    assume_attr_ne,
    assume_feature,
    compile_model,
)
from .detector import Anomaly
from .model import AnomalyKind, FeatureModel
from .solver import LabelingOptions, SolveStats, check


@dataclass(frozen=True)
class QxStats:
    n: int       # candidates offered
    k: int       # conflict size returned
    checks: int  # consistency checks spent


@dataclass
class ConflictSet:
    constraints: list[CompiledConstraint]
    background: list[CompiledConstraint]
    stats: QxStats                  # totals over all passes
    passes: tuple[QxStats, ...] = ()

    def constraint_ids(self) -> list[int]:
        return [c.id for c in self.constraints]

    def describe(self) -> list[str]:
        lines = [f"{c.text}   (check assumption)" for c in self.background]
        lines += [f"{c.text}   ({_origin_text(c)})" for c in self.constraints]
        return lines


@dataclass
class ConstraintGroup:
    id: str
    members: list[CompiledConstraint]


class AnomalyNotReproducible(ValueError):
    """The anomaly's check assumption is consistent with the model; the
    model was probably edited after detection."""


def _origin_text(con: CompiledConstraint) -> str:
    if isinstance(con.origin, CtcOrigin):
        return f"constraint {con.origin.name}"
    if isinstance(con.origin, TreeRelation):
        return f"{con.origin.kind} relation"
    return "assumption"


class _Checker:
    def __init__(
        self,
        csp: Csp,
        background: list[CompiledConstraint],
        options: LabelingOptions | None,
        stats: SolveStats,
    ):
        self.csp = csp
        self.background = background
        self.options = options
        self.stats = stats
        self.checks = 0

    def consistent(self, constraint_ids: list[int]) -> bool:
        self.checks += 1
        ok, _ = check(
            self.csp,
            assumptions=self.background,
            options=self.options,
            active=constraint_ids,
            stats=self.stats,
        )
        return ok


def _qx_pass(
    checker: _Checker,
    items: list[list[int]],
    known_inconsistent: bool,
) -> list[int] | None:
    """Junker's QUICKXPLAIN over items (each a set of constraint ids taken
    as one candidate); returns preferred-minimal item indices or None when
    background plus all items is consistent."""
    all_ids = [cid for item in items for cid in item]
    if not known_inconsistent and checker.consistent(all_ids):
        return None
    if not items:
        return []

    def ids_of(indices: list[int]) -> list[int]:
        return [cid for i in indices for cid in items[i]]

    def qx(prefix: list[int], delta_nonempty: bool, candidates: list[int]) -> list[int]:
        if delta_nonempty and not checker.consistent(ids_of(prefix)):
            return []  # the conflict lies entirely in the prefix
        if len(candidates) == 1:
            return list(candidates)
        half = len(candidates) // 2
        first, second = candidates[:half], candidates[half:]
        delta2 = qx(prefix + first, bool(first), second)
        delta1 = qx(prefix + delta2, bool(delta2), first)
        return delta1 + delta2

    conflict = qx([], bool(checker.background), list(range(len(items))))
    return sorted(conflict)


def quickxplain(
    csp: Csp,
    background: list[CompiledConstraint],
    candidates: list[CompiledConstraint],
    options: LabelingOptions | None = None,
    stats: SolveStats | None = None,
    *,
    known_inconsistent: bool = False,
) -> ConflictSet | None:
    """One preferred minimal conflict among candidates (ordered most
    preferred first), or None when background plus candidates is
    consistent.  Conflict sets keep candidate order."""
    stats = stats if stats is not None else SolveStats()
    checker = _Checker(csp, background, options, stats)
    picked = _qx_pass(checker, [[c.id] for c in candidates], known_inconsistent)
    if picked is None:
        return None
    chosen = [candidates[i] for i in picked]
    qx_stats = QxStats(n=len(candidates), k=len(chosen), checks=checker.checks)
    return ConflictSet(chosen, list(background), qx_stats, passes=(qx_stats,))


# -- constraint grouping -----------------------------------------------------


def group_constraints(csp: Csp, model: FeatureModel) -> list[ConstraintGroup]:
    """Partition constraints for the cascaded search: one group per module
    when the model declares modules, otherwise clusters of connected
    cross-tree constraints with the feature-tree constraints attached to
    the cluster of their nearest constrained ancestor."""
    if model.modules:
        order: dict[str | None, int] = {m.id: i for i, m in enumerate(model.modules)}
        buckets: dict[str | None, list[CompiledConstraint]] = {}
        for con in csp.constraints:
            buckets.setdefault(con.module, []).append(con)
        groups = []
        for module_id in sorted(
            buckets, key=lambda mid: (order.get(mid, len(order)), str(mid))
        ):
            groups.append(
                ConstraintGroup(module_id if module_id else "(top)", buckets[module_id])
            )
        return groups
    return _cluster_groups(csp, model)


def _ctc_closure_vars(csp: Csp, model: FeatureModel, con: CompiledConstraint) -> set[int]:
    """Variables a cross-tree constraint reaches: its own, each attribute's
    feature, the members of each abstract attribute, and every feature's
    mandatory chain head.  Shared closure variables merge clusters."""
    pending = list(con.variables)
    seen: set[int] = set()
    while pending:
        var_index = pending.pop()
        if var_index in seen:
            continue
        seen.add(var_index)
        var = csp.variables[var_index]
        if var.attr_name is None:
            head = model.chain_head(var.feature_id)
            pending.append(csp.feature_var[head])
            continue
        pending.append(csp.feature_var[var.feature_id])
        feat = model.feature(var.feature_id)
        attr = feat.attribute(var.attr_name)
        if attr is not None and attr.abstract:
            for child in feat.children():
                child_attr = child.attribute(var.attr_name)
                if child_attr is not None:
                    pending.append(csp.attr_var[(child.id, var.attr_name)])
    return seen


def _cluster_groups(csp: Csp, model: FeatureModel) -> list[ConstraintGroup]:
    ctcs = [c for c in csp.constraints if isinstance(c.origin, CtcOrigin)]
    closures = {c.id: _ctc_closure_vars(csp, model, c) for c in ctcs}

    parent: dict[int, int] = {c.id: c.id for c in ctcs}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    var_owner: dict[int, int] = {}
    for con in ctcs:
        for var_index in closures[con.id]:
            if var_index in var_owner:
                union(con.id, var_owner[var_index])
            else:
                var_owner[var_index] = con.id

    cluster_of_var: dict[int, int] = {
        var_index: find(owner) for var_index, owner in var_owner.items()
    }

    clusters: dict[int, list[CompiledConstraint]] = {}
    for con in ctcs:
        clusters.setdefault(find(con.id), []).append(con)

    residual: list[CompiledConstraint] = []
    for con in csp.constraints:
        if isinstance(con.origin, CtcOrigin):
            continue
        cluster = None
        fid: str | None = con.anchor
        while fid is not None:
            fvar = csp.feature_var[fid]
            if fvar in cluster_of_var:
                cluster = cluster_of_var[fvar]
                break
            hit = None
            for attr in model.feature(fid).attributes:
                avar = csp.attr_var[(fid, attr.name)]
                if avar in cluster_of_var:
                    hit = cluster_of_var[avar]
                    break
            if hit is not None:
                cluster = hit
                break
            fid = model.parent_id(fid)
        if cluster is not None:
            clusters[cluster].append(con)
        else:
            residual.append(con)

    groups = [
        ConstraintGroup(f"cluster{i + 1}", sorted(members, key=lambda c: c.id))
        for i, (_, members) in enumerate(sorted(clusters.items()))
    ]
    if residual:
        groups.append(ConstraintGroup("(rest)", residual))
    return groups


# -- anomaly explanation -------------------------------------------------------


def background_for(csp: Csp, anomaly: Anomaly) -> list[CompiledConstraint]:
    kind = anomaly.kind
    if kind is AnomalyKind.VOID_MODEL:
        return []
    if kind is AnomalyKind.DEAD_FEATURE:
        return [assume_feature(csp, anomaly.feature, 1)]
    if kind is AnomalyKind.FALSE_OPTIONAL_FEATURE:
        return [assume_feature(csp, anomaly.feature, 0)]
    if kind is AnomalyKind.DEAD_ATTRIBUTE_VALUE:
        return [assume_attr_eq(csp, anomaly.feature, anomaly.attribute, anomaly.value)]
    assert kind is AnomalyKind.FALSE_OPTIONAL_ATTRIBUTE_VALUE
    return [
        assume_attr_ne(csp, anomaly.feature, anomaly.attribute, anomaly.value),
        assume_feature(csp, anomaly.feature, 1),
    ]


def candidate_order(csp: Csp, model: FeatureModel) -> list[CompiledConstraint]:
    """Cross-tree constraints first (declaration order), then feature-tree
    constraints bottom-up; the conflict search prefers earlier candidates,
    which centers explanations on the editable constraints."""
    ctcs = [c for c in csp.constraints if isinstance(c.origin, CtcOrigin)]
    tree = [c for c in csp.constraints if not isinstance(c.origin, CtcOrigin)]
    tree.sort(
        key=lambda c: (-model.depth(c.anchor) if c.anchor else 0, c.id)
    )
    return ctcs + tree


SIMPLE = "simple"
CASCADING = "cascading"


def explain(
    model: FeatureModel,
    anomaly: Anomaly,
    mode: str = SIMPLE,
    options: LabelingOptions | None = None,
    csp: Csp | None = None,
    stats: SolveStats | None = None,
) -> ConflictSet:
    """Minimal conflicting constraint set explaining a detected anomaly.

    Raises AnomalyNotReproducible when the anomaly's assumption is
    consistent with the model.
    """
    if mode not in (SIMPLE, CASCADING):
        raise ValueError(f"unknown explanation mode {mode!r}")
    csp = csp or compile_model(model)
    stats = stats if stats is not None else SolveStats()
    background = background_for(csp, anomaly)
    candidates = candidate_order(csp, model)

    if mode == SIMPLE:
        conflict = quickxplain(csp, background, candidates, options, stats)
        if conflict is None:
            raise AnomalyNotReproducible(anomaly.describe(model))
        return conflict

    groups = group_constraints(csp, model)
    checker = _Checker(csp, background, options, stats)
    picked = _qx_pass(checker, [[c.id for c in g.members] for g in groups], False)
    if picked is None:
        raise AnomalyNotReproducible(anomaly.describe(model))
    first_pass = QxStats(n=len(groups), k=len(picked), checks=checker.checks)

    member_ids = {
        c.id for i in picked for c in groups[i].members
    }
    natives = [c for c in candidates if c.id in member_ids]
    second = quickxplain(
        csp, background, natives, options, stats, known_inconsistent=True
    )
    assert second is not None  # the conflicting groups contain a conflict
    total = QxStats(
        n=second.stats.n,
        k=second.stats.k,
        checks=first_pass.checks + second.stats.checks,
    )
    return ConflictSet(
        second.constraints,
        list(background),
        total,
        passes=(first_pass, second.stats),
    )
