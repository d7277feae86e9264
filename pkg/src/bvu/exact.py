"""Brute-force solvers for BVU, KU and MKU.

Subsets are visited depth-first in lexicographic order of their sorted id
tuples, carrying the Poisson-binomial pmf incrementally.  Values within a
relative ``VALUE_BAND`` of each other count as ties, which are broken by
lower cost, then by the lexicographically smaller id tuple.  The band is
relative so that tiny but nonzero objectives still beat zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from bvu.model import (BribeSolution, ElectionInstance, Item, KuInstance, MkuInstance, bribe_cost,
                       evaluate_win_prob)
from bvu.probdist import pb_tail

VALUE_BAND = 1e-12


class SizeLimitExceeded(ValueError):
    pass


@dataclass(frozen=True)
class ExactConfig:
    max_items: int = 22
    prune_by_budget: bool = True

    def __post_init__(self):
        if self.max_items < 1:
            raise ValueError("max_items must be >= 1")


def better(a: tuple[float, float, tuple[int, ...]], b: tuple[float, float, tuple[int, ...]] | None) -> bool:
    """Is candidate ``a`` = (value, cost, ids) strictly preferable to ``b``?"""
    if b is None:
        return True
    band = VALUE_BAND * max(abs(a[0]), abs(b[0]))
    if a[0] > b[0] + band:
        return True
    if a[0] < b[0] - band:
        return False
    if a[1] != b[1]:
        return a[1] < b[1]
    return a[2] < b[2]


def _search(items: Sequence[Item], group_of: Sequence[int], n_groups: int, capacity: float,
            evaluate: Callable[[list[int], list[float]], float | None],
            dead: Callable[[list[int]], bool] | None, prune_by_budget: bool):
    best = None
    counts = [0] * n_groups
    chosen: list[int] = []
    n = len(items)

    def visit(start: int, pmf: list[float], cost: float) -> None:
        nonlocal best
        if cost <= capacity:
            val = evaluate(counts, pmf)
            if val is not None:
                cand = (val, cost, tuple(chosen))
                if better(cand, best):
                    best = cand
        for i in range(start, n):
            it = items[i]
            new_cost = cost + it.size
            if prune_by_budget and new_cost > capacity:
                continue
            g = group_of[i]
            counts[g] += 1
            if dead is None or not dead(counts):
                p = it.prob
                q = 1.0 - p
                new = [pmf[0] * q]
                new.extend(pmf[h] * q + pmf[h - 1] * p for h in range(1, len(pmf)))
                new.append(pmf[-1] * p)
                chosen.append(it.id)
                visit(i + 1, new, new_cost)
                chosen.pop()
            counts[g] -= 1

    visit(0, [1.0], 0.0)
    return best


def _tail(pmf: list[float], k: int) -> float:
    if k <= 0:
        return 1.0
    if k >= len(pmf):
        return 0.0
    return sum(pmf[k:])


def solve_bvu_exact(instance: ElectionInstance, cfg: ExactConfig = ExactConfig()) -> BribeSolution:
    voters = instance.bribable()
    if len(voters) > cfg.max_items:
        raise SizeLimitExceeded(f"{len(voters)} bribable voters exceed max_items={cfg.max_items}")
    sizes = instance.sizes
    designated = sizes[-1]
    rivals = instance.m - 1
    items = [Item(v.id, v.price, v.success_prob) for v in voters]
    group_of = [v.group - 1 for v in voters]

    def evaluate(counts, pmf):
        lead = max(sizes[j] - counts[j] - designated for j in range(rivals))
        return _tail(pmf, max(lead, -1) + 1)

    best = _search(items, group_of, rivals, instance.budget, evaluate, None, cfg.prune_by_budget)
    chosen = best[2]
    return BribeSolution(chosen, bribe_cost(instance, chosen), evaluate_win_prob(instance, chosen), "exact")


def solve_ku_exact(instance: KuInstance, cfg: ExactConfig = ExactConfig()) -> BribeSolution:
    if len(instance.items) > cfg.max_items:
        raise SizeLimitExceeded(f"{len(instance.items)} items exceed max_items={cfg.max_items}")
    items = list(instance.items)
    r = instance.r

    def evaluate(counts, pmf):
        return _tail(pmf, r + 1 - counts[0])

    best = _search(items, [0] * len(items), 1, instance.capacity, evaluate, None, cfg.prune_by_budget)
    chosen = tuple(sorted(best[2]))
    by_id = {it.id: it for it in items}
    probs = [by_id[i].prob for i in chosen]
    cost = float(sum(by_id[i].size for i in chosen))
    return BribeSolution(chosen, cost, pb_tail(probs, r + 1 - len(chosen)), "exact-ku")


def mku_value(instance: MkuInstance, chosen: Sequence[int]) -> float:
    by_id = {it.id: it for it in instance.items}
    return pb_tail([by_id[i].prob for i in sorted(set(chosen))], instance.k)


def solve_mku_exact(instance: MkuInstance, cfg: ExactConfig = ExactConfig()) -> BribeSolution | None:
    """Optimal MKU selection, or ``None`` when no subset meets capacity and quotas."""
    items = list(instance.items)
    if len(items) > cfg.max_items:
        raise SizeLimitExceeded(f"{len(items)} items exceed max_items={cfg.max_items}")
    if instance.quota_violations():
        return None
    group_of = [j for j, g in enumerate(instance.groups) for _ in g]
    quotas = instance.quotas
    j0 = instance.j0 - 1
    k = instance.k

    def dead(counts):
        return counts[j0] > quotas[j0]

    def evaluate(counts, pmf):
        if counts[j0] != quotas[j0]:
            return None
        for j, quota in enumerate(quotas):
            if counts[j] < quota:
                return None
        return _tail(pmf, k)

    best = _search(items, group_of, instance.m, instance.capacity, evaluate, dead, cfg.prune_by_budget)
    if best is None:
        return None
    chosen = tuple(sorted(best[2]))
    by_id = {it.id: it for it in items}
    cost = float(sum(by_id[i].size for i in chosen))
    return BribeSolution(chosen, cost, mku_value(instance, chosen), "exact-mku")
