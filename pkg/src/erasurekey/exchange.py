"""Minimum-transmission cooperative data exchange.

Each node holds a subset of a packet universe and every node must end up
with everything.  The integer program minimizes the total number of coded
transmissions subject to, for every nonempty proper subset of nodes, the
nodes inside it collectively transmitting at least as many packets as are
missed by everyone outside it.

The solver enumerates all 2^n - 2 subset constraints directly and runs a
depth-first branch and bound in variable order, seeded with the LP
relaxation: exploring values in increasing order makes the first optimum
found the lexicographically smallest one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from erasurekey.field import get_field, cauchy_from_labels

MAX_NODES = 20


class InfeasibleExchangeError(ValueError):
    """Some packet is known to no node, so no plan can complete everyone."""


@dataclass
class ExchangeInstance:
    n_nodes: int
    n_packets: int
    known: list[frozenset[int]]   # per-node packet indices

    def __post_init__(self):
        if not 1 <= self.n_nodes <= MAX_NODES:
            raise ValueError(f"node count must be in 1..{MAX_NODES}")
        if len(self.known) != self.n_nodes:
            raise ValueError("need one known-set per node")
        self.known = [frozenset(int(p) for p in s) for s in self.known]
        for s in self.known:
            if any(p < 0 or p >= self.n_packets for p in s):
                raise ValueError("known packet index outside the universe")

    def to_jsonable(self) -> dict:
        return {"n_nodes": self.n_nodes, "n_packets": self.n_packets,
                "known": [sorted(s) for s in self.known]}

    @classmethod
    def from_jsonable(cls, obj: dict) -> "ExchangeInstance":
        return cls(int(obj["n_nodes"]), int(obj["n_packets"]),
                   [frozenset(s) for s in obj["known"]])


@dataclass
class ExchangePlan:
    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def to_jsonable(self) -> dict:
        return {"counts": list(self.counts), "total": self.total}


def subset_constraints(inst: ExchangeInstance) -> list[tuple[int, int]]:
    """(member_bitmask, demand) for every nonempty proper node subset.

    demand = packets missed by every node outside the subset; only those
    nodes' transmissions can supply them.
    """
    n = inst.n_nodes
    universe = (1 << inst.n_packets) - 1
    have = [sum(1 << p for p in s) for s in inst.known]
    if n == 1:
        if have[0] != universe:
            raise InfeasibleExchangeError("a packet is known to no node")
        return []
    union_all = 0
    for h in have:
        union_all |= h
    if union_all != universe:
        raise InfeasibleExchangeError("a packet is known to no node")
    out = []
    for mask in range(1, (1 << n) - 1):
        outside_union = 0
        for i in range(n):
            if not mask >> i & 1:
                outside_union |= have[i]
        demand = inst.n_packets - bin(outside_union).count("1")
        if demand > 0:
            out.append((mask, demand))
    return out


def _lp_relaxation(n: int, constraints) -> tuple[float, np.ndarray]:
    if not constraints:
        return 0.0, np.zeros(n)
    a_ub = np.zeros((len(constraints), n))
    b_ub = np.zeros(len(constraints))
    for row, (mask, demand) in enumerate(constraints):
        for i in range(n):
            if mask >> i & 1:
                a_ub[row, i] = -1.0
        b_ub[row] = -float(demand)
    res = linprog(c=np.ones(n), A_ub=a_ub, b_ub=b_ub, bounds=[(0, None)] * n,
                  method="highs")
    if not res.success:
        raise InfeasibleExchangeError("LP relaxation infeasible")
    return float(res.fun), np.asarray(res.x)


def _prune_dominated(constraints) -> list[tuple[int, int]]:
    """Drop constraints implied by a subset with at least the same demand."""
    ordered = sorted(constraints, key=lambda t: (bin(t[0]).count("1"), -t[1]))
    kept: list[tuple[int, int]] = []
    for mask, demand in ordered:
        if not any(km & mask == km and kd >= demand for km, kd in kept):
            kept.append((mask, demand))
    return kept


def _lp_completion_bound(shifted_rows: list[tuple[int, int]], n_free: int) -> float | None:
    """LP minimum of the free variables' total covering the residual demands.

    Rows are (free-variable bitmask, residual); a positive residual with no
    free support is unsatisfiable and yields None.
    """
    rows = [(fm, r) for fm, r in shifted_rows if r > 0]
    if not rows:
        return 0.0
    if any(fm == 0 for fm, _ in rows):
        return None
    a_ub = np.zeros((len(rows), n_free))
    b_ub = np.zeros(len(rows))
    for row, (fm, r) in enumerate(rows):
        for i in range(n_free):
            if fm >> i & 1:
                a_ub[row, i] = -1.0
        b_ub[row] = -float(r)
    res = linprog(c=np.ones(n_free), A_ub=a_ub, b_ub=b_ub,
                  bounds=[(0, None)] * n_free, method="highs")
    if not res.success:
        return None
    return float(res.fun)


def _packing_bound(residuals, free_masks) -> int:
    """Lower bound on what the free variables must still transmit in total.

    Constraints whose free-variable supports are disjoint must be paid for
    separately, so a greedy packing of them (largest residual first) is a
    valid bound; it dominates the single largest residual.
    """
    order = sorted((r for r in zip(residuals, free_masks) if r[0] > 0),
                   key=lambda t: -t[0])
    taken = 0
    bound = 0
    for residual, mask in order:
        if mask & taken == 0:
            bound += residual
            taken |= mask
    return bound


def _lexmin_with_total(n: int, constraints, total: int) -> tuple[int, ...] | None:
    """Lexicographically smallest nonnegative vector with the exact total
    satisfying every covering constraint, or None if the budget is short.

    Covering constraints are upward-monotone, so a feasible plan with this
    exact total exists iff the optimum is at most `total`.
    """
    masks = [m for m, _ in constraints]
    counts = [0] * n

    def dfs(pos: int, budget: int, residuals: list[int]) -> bool:
        free_shift_masks = [m >> pos for m in masks]
        if pos == n:
            return budget == 0 and all(r <= 0 for r in residuals)
        # constraints fully decided except this variable pin its minimum
        forced = 0
        for r, fm in zip(residuals, free_shift_masks):
            if r > 0:
                if fm == 0:
                    return False
                if fm == 1:
                    forced = max(forced, r)
        if forced > budget:
            return False
        if pos == n - 1:
            # the last variable must spend the rest of the budget exactly
            counts[pos] = budget
            ok = all(r - (budget if m >> pos & 1 else 0) <= 0
                     for r, m in zip(residuals, masks))
            if ok:
                return True
            counts[pos] = 0
            return False
        # transmitting more than the worst residual this variable touches is
        # pure budget burning, which the last variable can do instead; the
        # lexicographic minimum therefore never exceeds this cap here
        useful = max((r for r, m in zip(residuals, masks) if r > 0 and m >> pos & 1),
                     default=0)
        for value in range(forced, min(useful, budget) + 1):
            counts[pos] = value
            rest = budget - value
            nxt = [r - value if m >> pos & 1 else r for r, m in zip(residuals, masks)]
            shifted = [m >> (pos + 1) for m in masks]
            if _packing_bound(nxt, shifted) > rest:
                continue
            lp = _lp_completion_bound(list(zip(shifted, nxt)), n - pos - 1)
            if lp is None or int(np.ceil(lp - 1e-9)) > rest:
                continue
            if dfs(pos + 1, rest, nxt):
                return True
        counts[pos] = 0
        return False

    if dfs(0, total, [d for _, d in constraints]):
        return tuple(counts)
    return None


def solve_exchange(inst: ExchangeInstance) -> ExchangePlan:
    """Minimum-total integer plan, lexicographically smallest among optima.

    Branch and bound: the LP relaxation's ceiling seeds the total, and a
    depth-first search in variable order with exact-budget totals explores
    candidate vectors in lexicographic order, so the first solution found
    at the optimal total is the lexicographically smallest optimum.
    """
    n = inst.n_nodes
    constraints = _prune_dominated(subset_constraints(inst))
    if not constraints:
        return ExchangePlan(tuple([0] * n))
    lp_value, _ = _lp_relaxation(n, constraints)
    lower = int(np.ceil(lp_value - 1e-9))
    for total in range(lower, n * inst.n_packets + 1):
        vec = _lexmin_with_total(n, constraints, total)
        if vec is not None:
            return ExchangePlan(vec)
    raise InfeasibleExchangeError("no integer plan satisfies the subset constraints")


def brute_force_exchange(inst: ExchangeInstance) -> ExchangePlan:
    """Exhaustive reference: all count vectors with total at most n_packets.

    A plan where every packet is sent by the lowest-indexed node knowing it
    always works, so the optimum never exceeds the universe size.
    """
    n = inst.n_nodes
    constraints = subset_constraints(inst)
    best = None

    def feasible(vec) -> bool:
        return all(sum(vec[i] for i in range(n) if mask >> i & 1) >= demand
                   for mask, demand in constraints)

    def rec(pos, remaining, vec):
        nonlocal best
        if pos == n:
            if feasible(vec) and (best is None or sum(vec) < sum(best)
                                  or (sum(vec) == sum(best) and tuple(vec) < best)):
                best = tuple(vec)
            return
        for value in range(remaining + 1):
            vec.append(value)
            rec(pos + 1, remaining - value, vec)
            vec.pop()

    rec(0, inst.n_packets, [])
    if best is None:
        raise InfeasibleExchangeError("no plan within the search budget")
    return ExchangePlan(best)


def plan_coefficients(inst: ExchangeInstance, plan: ExchangePlan, field_order: int = 8):
    """Deterministic coded rows for a plan: per-node Cauchy combinations.

    Node i's rows live on its known columns; row labels are allocated
    globally past the packet-index labels so no two transmissions anywhere
    share a label.
    """
    gf = get_field(field_order)
    if inst.n_packets + plan.total > gf.q:
        raise ValueError("field too small for these Cauchy labels; raise field_order")
    rows = np.zeros((plan.total, inst.n_packets), dtype=gf.dtype)
    slot = 0
    for i, k in enumerate(plan.counts):
        if k == 0:
            continue
        cols = np.asarray(sorted(inst.known[i]), dtype=np.int64)
        labels = np.arange(inst.n_packets + slot, inst.n_packets + slot + k, dtype=np.int64)
        rows[slot:slot + k, cols] = cauchy_from_labels(gf, labels, cols)
        slot += k
    return gf, rows


def verify_plan_decodable(inst: ExchangeInstance, plan: ExchangePlan,
                          field_order: int = 8) -> bool:
    """Simulate the coded broadcasts and check every node reaches full rank."""
    gf, rows = plan_coefficients(inst, plan, field_order)
    m = inst.n_packets
    for i in range(inst.n_nodes):
        mine = np.asarray(sorted(inst.known[i]), dtype=np.int64)
        units = np.zeros((mine.size, m), dtype=gf.dtype)
        units[np.arange(mine.size), mine] = 1
        stacked = np.vstack([units, rows]) if rows.size else units
        if gf.rank(stacked) != m:
            return False
    return True
