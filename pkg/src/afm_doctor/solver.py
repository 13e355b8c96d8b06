"""Finite-domain solver: propagation to a fixpoint plus backtracking search.

Consistency level: arc consistency for binary comparison and implication
forms, bounds-with-exact-endgame filtering for linear sums, membership
filtering for the element form.  Propagation is sound (never removes a
value that appears in a solution); labeling makes the search complete.

A solver run owns its mutable state (working domains, trail, queue); the
underlying Csp is never mutated, so independent runs over one Csp can
execute concurrently.

Domains are plain ``set[int]`` ("DomainSet"): sparse, exact membership,
min/max/removal/iteration, empty representable.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .compiler import (
    EQ,
    LE,
    NE,
    AndOp,
    BoolConst,
    CompiledConstraint,
    Csp,
    FEATURE,
    IffOp,
    ImpliesOp,
    LinCmp,
    Membership,
    NotOp,
    OrOp,
    TBin,
    TConst,
    TVar,
    TermCmp,
    evaluate,
)

DomainSet = set  # set[int]

TRUE, FALSE, UNKNOWN = 1, 0, -1

INCONSISTENT = None  # propagate() result for an emptied domain


class VarOrder(enum.Enum):
    SMALLEST_DOMAIN_FIRST = "smallest-domain"
    MOST_CONSTRAINED_FIRST = "most-constrained"
    DECLARATION_ORDER = "declaration"


class ValueOrder(enum.Enum):
    UP_FIRST = "up"
    DOWN_FIRST = "down"


class Branching(enum.Enum):
    ENUMERATE = "enumerate"
    BISECT = "bisect"


@dataclass(frozen=True)
class ClassOptions:
    var_order: VarOrder = VarOrder.SMALLEST_DOMAIN_FIRST
    value_order: ValueOrder = ValueOrder.UP_FIRST
    branching: Branching = Branching.ENUMERATE


@dataclass(frozen=True)
class LabelingOptions:
    """Search strategy; feature and attribute variables are configured
    separately and feature variables are always labeled first."""

    features: ClassOptions = ClassOptions(
        VarOrder.MOST_CONSTRAINED_FIRST, ValueOrder.UP_FIRST, Branching.ENUMERATE
    )
    attributes: ClassOptions = ClassOptions(
        VarOrder.SMALLEST_DOMAIN_FIRST, ValueOrder.UP_FIRST, Branching.BISECT
    )

    def with_feature_value_order(self, order: ValueOrder) -> "LabelingOptions":
        return replace(self, features=replace(self.features, value_order=order))


DEFAULT_OPTIONS = LabelingOptions()


@dataclass
class SolveStats:
    propagation_steps: int = 0
    backtracks: int = 0
    consistency_checks: int = 0

    def merge(self, other: "SolveStats") -> None:
        self.propagation_steps += other.propagation_steps
        self.backtracks += other.backtracks
        self.consistency_checks += other.consistency_checks


class Solution:
    """Total assignment; satisfies every constraint of the checked CSP."""

    __slots__ = ("csp", "values")

    def __init__(self, csp: Csp, values: tuple[int, ...]):
        self.csp = csp
        self.values = values

    def __getitem__(self, index: int) -> int:
        return self.values[index]

    def feature_selected(self, feature_id: str) -> bool:
        return self.values[self.csp.feature_var[feature_id]] == 1

    def attr_value(self, feature_id: str, attr_name: str) -> int:
        return self.values[self.csp.attr_var[(feature_id, attr_name)]]

    def as_dict(self) -> dict[str, int]:
        return {
            var.name: self.values[var.index] for var in self.csp.variables
        }

    def satisfies(self, constraints: Iterable[CompiledConstraint]) -> bool:
        return all(evaluate(c.node, self.values) for c in constraints)


@dataclass
class SolveResult:
    solution: Solution | None
    stats: SolveStats

    @property
    def consistent(self) -> bool:
        return self.solution is not None


class _Run:
    """Mutable state of one solve/check call."""

    def __init__(
        self,
        csp: Csp,
        options: LabelingOptions,
        stats: SolveStats,
        assumptions: Sequence[CompiledConstraint] = (),
        active: Iterable[int] | None = None,
        value_order_overrides: Mapping[int, ValueOrder] | None = None,
    ):
        self.csp = csp
        self.options = options
        self.stats = stats
        self.overrides = value_order_overrides or {}

        n_base = len(csp.constraints)
        self.nodes = [c.node for c in csp.constraints] + [a.node for a in assumptions]
        total = n_base + len(assumptions)
        if active is None:
            self.active = bytearray(b"\x01" * total)
            active_base: Iterable[int] = range(n_base)
        else:
            self.active = bytearray(total)
            active_base = sorted(active)
            for cid in active_base:
                self.active[cid] = 1
        for i in range(n_base, total):
            self.active[i] = 1

        self.extra_watchers: dict[int, list[int]] = {}
        touched: set[int] = set()
        if active is None:
            for con in csp.constraints:
                touched |= con.variables
        else:
            for cid in active_base:
                touched |= csp.constraints[cid].variables
        for i, assumption in enumerate(assumptions):
            touched |= assumption.variables
            for v in assumption.variables:
                self.extra_watchers.setdefault(v, []).append(n_base + i)
        self.touched = touched

        self.doms: list[set[int]] = [set(d) for d in csp.domains]
        self.lens = [len(d) for d in self.doms]
        self.mins = [min(d) if d else 0 for d in self.doms]
        self.maxs = [max(d) if d else 0 for d in self.doms]

        self.trail: list[tuple[int, int]] = []
        self.queue: deque[int] = deque()
        self.inq = bytearray(total)
        self.failed = False

        self.initial_ids = list(active_base) + list(range(n_base, total))

        fcand = sorted(
            v for v in touched if csp.variables[v].kind == FEATURE
        )
        acand = sorted(
            v for v in touched if csp.variables[v].kind != FEATURE
        )
        if options.features.var_order is VarOrder.MOST_CONSTRAINED_FIRST:
            fcand.sort(key=lambda v: (-csp.degree[v], v))
        if options.attributes.var_order is VarOrder.MOST_CONSTRAINED_FIRST:
            acand.sort(key=lambda v: (-csp.degree[v], v))
        self.fcand = fcand
        self.acand = acand
        self.fptr = 0
        self.aptr = 0

    # -- domain updates ---------------------------------------------------

    def _remove(self, var: int, value: int) -> bool:
        dom = self.doms[var]
        dom.discard(value)
        self.trail.append((var, value))
        size = len(dom)
        self.lens[var] = size
        if size == 0:
            return False
        if value == self.mins[var]:
            self.mins[var] = min(dom)
        if value == self.maxs[var]:
            self.maxs[var] = max(dom)
        inq = self.inq
        queue = self.queue
        active = self.active
        for cid in self.csp.watchers[var]:
            if active[cid] and not inq[cid]:
                inq[cid] = 1
                queue.append(cid)
        for cid in self.extra_watchers.get(var, ()):
            if not inq[cid]:
                inq[cid] = 1
                queue.append(cid)
        return True

    def _remove_many(self, var: int, values: list[int]) -> bool:
        for value in values:
            if not self._remove(var, value):
                return False
        return True

    def _undo_to(self, mark: int) -> None:
        trail = self.trail
        doms = self.doms
        while len(trail) > mark:
            var, value = trail.pop()
            doms[var].add(value)
            self.lens[var] += 1
            if value < self.mins[var]:
                self.mins[var] = value
            if value > self.maxs[var]:
                self.maxs[var] = value

    # -- three-valued evaluation -------------------------------------------

    def _lin_bounds(self, cmp: LinCmp) -> tuple[int, int]:
        lo = hi = cmp.const
        mins = self.mins
        maxs = self.maxs
        for coef, var in cmp.terms:
            if coef > 0:
                lo += coef * mins[var]
                hi += coef * maxs[var]
            else:
                lo += coef * maxs[var]
                hi += coef * mins[var]
        return lo, hi

    def _eval(self, node) -> int:
        t = type(node)
        if t is LinCmp:
            lo, hi = self._lin_bounds(node)
            if node.op == LE:
                if hi <= 0:
                    return TRUE
                if lo > 0:
                    return FALSE
                return UNKNOWN
            if node.op == EQ:
                if lo == 0 and hi == 0:
                    return TRUE
                if lo > 0 or hi < 0:
                    return FALSE
                return UNKNOWN
            # NE
            if lo == 0 and hi == 0:
                return FALSE
            if lo > 0 or hi < 0:
                return TRUE
            return UNKNOWN
        if t is ImpliesOp:
            left = self._eval(node.left)
            if left == FALSE:
                return TRUE
            right = self._eval(node.right)
            if right == TRUE:
                return TRUE
            if left == TRUE and right == FALSE:
                return FALSE
            return UNKNOWN
        if t is AndOp:
            result = TRUE
            for child in node.children:
                value = self._eval(child)
                if value == FALSE:
                    return FALSE
                if value == UNKNOWN:
                    result = UNKNOWN
            return result
        if t is OrOp:
            result = FALSE
            for child in node.children:
                value = self._eval(child)
                if value == TRUE:
                    return TRUE
                if value == UNKNOWN:
                    result = UNKNOWN
            return result
        if t is NotOp:
            value = self._eval(node.child)
            return UNKNOWN if value == UNKNOWN else (TRUE if value == FALSE else FALSE)
        if t is IffOp:
            left = self._eval(node.left)
            right = self._eval(node.right)
            if left == UNKNOWN or right == UNKNOWN:
                return UNKNOWN
            return TRUE if left == right else FALSE
        if t is Membership:
            tdom = self.doms[node.target]
            intersecting = [s for s in node.sources if not tdom.isdisjoint(self.doms[s])]
            if not intersecting:
                return FALSE
            if len(tdom) == 1:
                tv = self.mins[node.target]
                for s in node.sources:
                    dom = self.doms[s]
                    if len(dom) == 1 and tv in dom:
                        return TRUE
                if all(tv not in self.doms[s] for s in node.sources):
                    return FALSE
            return UNKNOWN
        if t is TermCmp:
            return self._eval_termcmp(node)
        if t is BoolConst:
            return TRUE if node.value else FALSE
        raise TypeError(f"unknown node {t.__name__}")

    def _term_bounds(self, term) -> tuple[int, int] | None:
        t = type(term)
        if t is TConst:
            return term.value, term.value
        if t is TVar:
            return self.mins[term.index], self.maxs[term.index]
        left = self._term_bounds(term.left)
        right = self._term_bounds(term.right)
        if left is None or right is None:
            return None
        a, b = left
        c, d = right
        op = term.op
        if op == "+":
            return a + c, b + d
        if op == "-":
            return a - d, b - c
        if op == "*":
            products = (a * c, a * d, b * c, b * d)
            return min(products), max(products)
        # truncating division; undecidable when the divisor may be zero
        if c <= 0 <= d:
            return None
        quotients = []
        for num in (a, b):
            for den in (c, d):
                q = abs(num) // abs(den)
                quotients.append(q if (num >= 0) == (den >= 0) else -q)
        return min(quotients), max(quotients)

    _CMP_TESTS = {
        "=": (lambda lo1, hi1, lo2, hi2: lo1 == hi1 == lo2 == hi2,
              lambda lo1, hi1, lo2, hi2: hi1 < lo2 or lo1 > hi2),
        "\\=": (lambda lo1, hi1, lo2, hi2: hi1 < lo2 or lo1 > hi2,
                lambda lo1, hi1, lo2, hi2: lo1 == hi1 == lo2 == hi2),
        "<": (lambda lo1, hi1, lo2, hi2: hi1 < lo2,
              lambda lo1, hi1, lo2, hi2: lo1 >= hi2),
        "=<": (lambda lo1, hi1, lo2, hi2: hi1 <= lo2,
               lambda lo1, hi1, lo2, hi2: lo1 > hi2),
        ">": (lambda lo1, hi1, lo2, hi2: lo1 > hi2,
              lambda lo1, hi1, lo2, hi2: hi1 <= lo2),
        ">=": (lambda lo1, hi1, lo2, hi2: lo1 >= hi2,
               lambda lo1, hi1, lo2, hi2: hi1 < lo2),
    }

    def _eval_termcmp(self, node: TermCmp) -> int:
        left = self._term_bounds(node.left)
        right = self._term_bounds(node.right)
        if left is None or right is None:
            return UNKNOWN
        is_true, is_false = self._CMP_TESTS[node.op]
        if is_true(*left, *right):
            return TRUE
        if is_false(*left, *right):
            return FALSE
        return UNKNOWN

    # -- enforcement ---------------------------------------------------------

    def _enforce(self, node, want: bool) -> bool:
        t = type(node)
        if t is LinCmp:
            return self._enforce_lin(node, want)
        if t is ImpliesOp:
            if want:
                left = self._eval(node.left)
                if left == TRUE:
                    return self._enforce(node.right, True)
                if left == FALSE:
                    return True
                if self._eval(node.right) == FALSE:
                    return self._enforce(node.left, False)
                return True
            return self._enforce(node.left, True) and self._enforce(node.right, False)
        if t is AndOp:
            if want:
                return all(self._enforce(child, True) for child in node.children)
            unknown = None
            count = 0
            for child in node.children:
                value = self._eval(child)
                if value == FALSE:
                    return True
                if value == UNKNOWN:
                    unknown = child
                    count += 1
            if count == 0:
                return False  # all children true, negation violated
            if count == 1:
                return self._enforce(unknown, False)
            return True
        if t is OrOp:
            if not want:
                return all(self._enforce(child, False) for child in node.children)
            unknown = None
            count = 0
            for child in node.children:
                value = self._eval(child)
                if value == TRUE:
                    return True
                if value == UNKNOWN:
                    unknown = child
                    count += 1
            if count == 0:
                return False
            if count == 1:
                return self._enforce(unknown, True)
            return True
        if t is NotOp:
            return self._enforce(node.child, not want)
        if t is IffOp:
            left = self._eval(node.left)
            right = self._eval(node.right)
            if left != UNKNOWN:
                return self._enforce(node.right, (left == TRUE) == want)
            if right != UNKNOWN:
                return self._enforce(node.left, (right == TRUE) == want)
            return True
        if t is Membership:
            return self._enforce_membership(node, want)
        if t is TermCmp:
            return self._enforce_termcmp(node, want)
        if t is BoolConst:
            return node.value == want
        raise TypeError(f"unknown node {t.__name__}")

    def _enforce_lin(self, node: LinCmp, want: bool) -> bool:
        op = node.op
        terms = node.terms
        const = node.const
        if not want:
            if op == EQ:
                op = NE
            elif op == NE:
                op = EQ
            else:  # not(e <= 0)  <=>  -e + 1 <= 0
                op = LE
                terms = tuple((-c, v) for c, v in terms)
                const = 1 - const
        if op == LE:
            return self._prune_le(terms, const)
        if op == EQ:
            return self._enforce_eq(terms, const)
        return self._enforce_ne(terms, const)

    def _prune_le(self, terms, const: int) -> bool:
        # sum(coef*var) + const <= 0
        mins = self.mins
        maxs = self.maxs
        lo = const
        for coef, var in terms:
            lo += coef * (mins[var] if coef > 0 else maxs[var])
        if lo > 0:
            return False
        for coef, var in terms:
            contrib = coef * (mins[var] if coef > 0 else maxs[var])
            bound = contrib - lo  # feasible: coef * value <= bound
            if coef > 0:
                upper = bound // coef
                if maxs[var] > upper:
                    doomed = [v for v in self.doms[var] if v > upper]
                    if not self._remove_many(var, doomed):
                        return False
            else:
                lower = -(bound // -coef)
                if mins[var] < lower:
                    doomed = [v for v in self.doms[var] if v < lower]
                    if not self._remove_many(var, doomed):
                        return False
        return True

    def _enforce_eq(self, terms, const: int) -> bool:
        lens = self.lens
        if len(terms) == 1:
            coef, var = terms[0]
            if (-const) % coef != 0:
                return False
            value = -const // coef
            if value not in self.doms[var]:
                return False
            if lens[var] > 1:
                return self._remove_many(
                    var, [v for v in self.doms[var] if v != value]
                )
            return True
        if (
            len(terms) == 2
            and const == 0
            and terms[0][0] + terms[1][0] == 0
            and abs(terms[0][0]) == 1
        ):
            # x = y: arc consistency by set intersection
            x = terms[0][1]
            y = terms[1][1]
            common = self.doms[x] & self.doms[y]
            if not common:
                return False
            if not self._remove_many(x, [v for v in self.doms[x] if v not in common]):
                return False
            return self._remove_many(y, [v for v in self.doms[y] if v not in common])
        unfixed = [tv for tv in terms if lens[tv[1]] > 1]
        if not unfixed:
            total = const + sum(c * self.mins[v] for c, v in terms)
            return total == 0
        if len(unfixed) == 1:
            coef, var = unfixed[0]
            residual = const + sum(
                c * self.mins[v] for c, v in terms if v != var
            )
            # coef * value + residual == 0
            if (-residual) % coef != 0:
                return False
            value = -residual // coef
            if value not in self.doms[var]:
                return False
            return self._remove_many(var, [v for v in self.doms[var] if v != value])
        if not self._prune_le(terms, const):
            return False
        return self._prune_le(tuple((-c, v) for c, v in terms), -const)

    def _enforce_ne(self, terms, const: int) -> bool:
        lens = self.lens
        unfixed = [tv for tv in terms if lens[tv[1]] > 1]
        if not unfixed:
            total = const + sum(c * self.mins[v] for c, v in terms)
            return total != 0
        if len(unfixed) == 1:
            coef, var = unfixed[0]
            residual = const + sum(c * self.mins[v] for c, v in terms if v != var)
            if (-residual) % coef == 0:
                value = -residual // coef
                if value in self.doms[var]:
                    return self._remove(var, value)
        return True

    def _enforce_membership(self, node: Membership, want: bool) -> bool:
        target = node.target
        doms = self.doms
        if want:
            union: set[int] = set()
            for s in node.sources:
                union |= doms[s]
            doomed = [v for v in doms[target] if v not in union]
            if doomed and not self._remove_many(target, doomed):
                return False
            tdom = doms[target]
            viable = [s for s in node.sources if not tdom.isdisjoint(doms[s])]
            if not viable:
                return False
            if len(viable) == 1:
                s = viable[0]
                common = tdom & doms[s]
                if not self._remove_many(
                    target, [v for v in doms[target] if v not in common]
                ):
                    return False
                return self._remove_many(s, [v for v in doms[s] if v not in common])
            return True
        # negation: every source differs from target
        if self.lens[target] == 1:
            tv = self.mins[target]
            for s in node.sources:
                if tv in doms[s]:
                    if self.lens[s] == 1:
                        return False
                    if not self._remove(s, tv):
                        return False
        for s in node.sources:
            if self.lens[s] == 1:
                sv = self.mins[s]
                if sv in doms[target]:
                    if self.lens[target] == 1:
                        return False
                    if not self._remove(target, sv):
                        return False
        return True

    def _enforce_termcmp(self, node: TermCmp, want: bool) -> bool:
        value = self._eval_termcmp(node)
        if value != UNKNOWN:
            return (value == TRUE) == want
        variables = sorted(
            {v for v in _termcmp_vars(node)}, key=lambda v: (self.lens[v], v)
        )
        unfixed = [v for v in variables if self.lens[v] > 1]
        if len(unfixed) == 1 and self.lens[unfixed[0]] <= 64:
            var = unfixed[0]
            values = [0] * len(self.csp.variables)
            for v in variables:
                values[v] = self.mins[v]
            doomed = []
            for candidate in self.doms[var]:
                values[var] = candidate
                if evaluate(node, values) != want:
                    doomed.append(candidate)
            if doomed:
                return self._remove_many(var, doomed)
        return True

    # -- propagation and search ------------------------------------------------

    def enqueue_all(self) -> None:
        for cid in self.initial_ids:
            if not self.inq[cid]:
                self.inq[cid] = 1
                self.queue.append(cid)

    def enqueue_var(self, var: int) -> None:
        inq = self.inq
        queue = self.queue
        active = self.active
        for cid in self.csp.watchers[var]:
            if active[cid] and not inq[cid]:
                inq[cid] = 1
                queue.append(cid)
        for cid in self.extra_watchers.get(var, ()):
            if not inq[cid]:
                inq[cid] = 1
                queue.append(cid)

    def propagate(self) -> bool:
        queue = self.queue
        inq = self.inq
        nodes = self.nodes
        stats = self.stats
        while queue:
            cid = queue.popleft()
            inq[cid] = 0
            stats.propagation_steps += 1
            if not self._enforce(nodes[cid], True):
                while queue:
                    inq[queue.popleft()] = 0
                return False
        return True

    def _select(self) -> int | None:
        lens = self.lens
        cand = self.fcand
        ptr = self.fptr
        n = len(cand)
        while ptr < n and lens[cand[ptr]] == 1:
            ptr += 1
        self.fptr = ptr
        if ptr < n:
            # every unassigned feature variable has domain size 2, so the
            # first unassigned one is correct for all variable orders
            return cand[ptr]
        cand = self.acand
        ptr = self.aptr
        n = len(cand)
        while ptr < n and lens[cand[ptr]] == 1:
            ptr += 1
        self.aptr = ptr
        if ptr >= n:
            return None
        if self.options.attributes.var_order is not VarOrder.SMALLEST_DOMAIN_FIRST:
            return cand[ptr]
        best = cand[ptr]
        best_size = lens[best]
        if best_size == 2:
            return best
        for i in range(ptr + 1, n):
            var = cand[i]
            size = lens[var]
            if size == 1:
                continue
            if size == 2:
                return var
            if size < best_size:
                best, best_size = var, size
        return best

    def _branches(self, var: int) -> list[tuple[str, int]]:
        opts = (
            self.options.features
            if self.csp.variables[var].kind == FEATURE
            else self.options.attributes
        )
        order = self.overrides.get(var, opts.value_order)
        down = order is ValueOrder.DOWN_FIRST
        if opts.branching is Branching.ENUMERATE or self.lens[var] == 2:
            values = sorted(self.doms[var], reverse=down)
            return [("=", v) for v in values]
        mid = (self.mins[var] + self.maxs[var]) // 2
        halves = [("<=", mid), (">", mid)]
        return list(reversed(halves)) if down else halves

    def _apply(self, var: int, branch: tuple[str, int]) -> bool:
        op, value = branch
        if op == "=":
            doomed = [v for v in self.doms[var] if v != value]
        elif op == "<=":
            doomed = [v for v in self.doms[var] if v > value]
        else:
            doomed = [v for v in self.doms[var] if v <= value]
        return self._remove_many(var, doomed)

    def search(self) -> Solution | None:
        self.enqueue_all()
        if not self.propagate():
            return None
        # frame: [var, branches, next_index, trail_mark, fptr, aptr]
        frames: list[list] = []
        while True:
            var = self._select()
            if var is None:
                return self._solution()
            branches = self._branches(var)
            frames.append([var, branches, 1, len(self.trail), self.fptr, self.aptr])
            if self._apply(var, branches[0]) and self.propagate():
                continue
            # the branch just applied failed: retract, try siblings, and
            # unwind frames whose branches are exhausted
            recovered = False
            while frames and not recovered:
                self.stats.backtracks += 1
                frame = frames[-1]
                self._undo_to(frame[3])
                self.fptr = frame[4]
                self.aptr = frame[5]
                while frame[2] < len(frame[1]):
                    branch = frame[1][frame[2]]
                    frame[2] += 1
                    if self._apply(frame[0], branch) and self.propagate():
                        recovered = True
                        break
                    self.stats.backtracks += 1
                    self._undo_to(frame[3])
                if not recovered:
                    frames.pop()
            if not recovered:
                return None

    def _solution(self) -> Solution:
        values = []
        touched = self.touched
        mins = self.mins
        for var in range(len(self.csp.variables)):
            if var in touched:
                values.append(mins[var])
            else:
                values.append(min(self.csp.domains[var]))
        return Solution(self.csp, tuple(values))


def _termcmp_vars(node: TermCmp):
    stack = [node.left, node.right]
    while stack:
        term = stack.pop()
        t = type(term)
        if t is TVar:
            yield term.index
        elif t is TBin:
            stack.append(term.left)
            stack.append(term.right)


def solve(
    csp: Csp,
    options: LabelingOptions | None = None,
    *,
    assumptions: Sequence[CompiledConstraint] = (),
    active: Iterable[int] | None = None,
    stats: SolveStats | None = None,
    value_order_overrides: Mapping[int, ValueOrder] | None = None,
) -> SolveResult:
    """Find one solution of csp (optionally restricted to the ``active``
    constraint ids, extended by ``assumptions``); sound and complete."""
    stats = stats if stats is not None else SolveStats()
    stats.consistency_checks += 1
    run = _Run(
        csp,
        options or DEFAULT_OPTIONS,
        stats,
        assumptions=assumptions,
        active=active,
        value_order_overrides=value_order_overrides,
    )
    solution = run.search()
    if solution is not None:
        assert solution.satisfies(
            csp.constraints[cid]
            for cid in run.initial_ids
            if cid < len(csp.constraints)
        ), "labeling produced an assignment violating a constraint"
        assert all(evaluate(a.node, solution.values) for a in assumptions)
    return SolveResult(solution, stats)


def check(
    csp: Csp,
    assumptions: Sequence[CompiledConstraint] = (),
    options: LabelingOptions | None = None,
    *,
    active: Iterable[int] | None = None,
    stats: SolveStats | None = None,
    value_order_overrides: Mapping[int, ValueOrder] | None = None,
) -> tuple[bool, Solution | None]:
    """Consistency of csp plus temporary assumption constraints."""
    result = solve(
        csp,
        options,
        assumptions=assumptions,
        active=active,
        stats=stats,
        value_order_overrides=value_order_overrides,
    )
    return result.consistent, result.solution


def propagate(
    csp: Csp,
    domains: Sequence[set[int]] | None = None,
    *,
    assumptions: Sequence[CompiledConstraint] = (),
    stats: SolveStats | None = None,
) -> list[set[int]] | None:
    """Propagate all constraints over working domains to a fixpoint.

    Returns the pruned domains, or INCONSISTENT (None) when a domain
    empties.  Never removes a value that appears in a solution.
    """
    run = _Run(csp, DEFAULT_OPTIONS, stats if stats is not None else SolveStats(),
               assumptions=assumptions)
    if domains is not None:
        if len(domains) != len(csp.domains):
            raise ValueError("working domains must cover every variable")
        for var, dom in enumerate(domains):
            run.doms[var] = set(dom)
            if not dom:
                return INCONSISTENT
            run.lens[var] = len(dom)
            run.mins[var] = min(dom)
            run.maxs[var] = max(dom)
    run.enqueue_all()
    if not run.propagate():
        return INCONSISTENT
    return [set(d) for d in run.doms]
