"""Additive-epsilon approximation for BVU via the multi-block knapsack (MKU).

Items with success probability above 1 - eps**2 are *big*, the rest *small*.

Case 1 (some group holds at least 2k big items in the optimum) is covered by a
greedy that takes the 2k cheapest big items of that group and fills quotas
with the cheapest remaining items.  Markov's inequality puts its failure
probability below 2 eps**2.

Case 2 (every group holds at most 2k-1 big items) enumerates per-group counts
of big and small items.  Big items are bucketed on a geometric grid and the
cheapest items of each bucket are taken; small items come from two dynamic
programs, one over rounded pmf prefixes and one over rounded first and second
moments.  Per-group selections are combined across groups.

Every candidate is scored with its exact objective, so the reported value is
always truthful even when enumeration caps cut the search short.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from bvu.exact import better
from bvu.model import (BribeSolution, ElectionInstance, Item, MkuInstance, bribe_cost, evaluate_win_prob,
                       validate)
from bvu.probdist import pb_tail
from bvu.reductions import bvu_to_mku, enumerate_guesses

# tolerance (in grid units) so exact grid points are not bumped up by float noise
_GRID_SLACK = 1e-9


class StateSpaceOverflow(RuntimeError):
    pass


class EnumerationBudgetExceeded(RuntimeError):
    def __init__(self, message: str, partial: list):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class ApproxConfig:
    epsilon: float = 0.25
    max_branch_enumerations: int = 1_000_000
    zeta_cap: int = 64
    grid_cells: int = 4096
    theoretical_mode: bool = False
    max_states: int = 200_000

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 0.25:
            raise ValueError(f"epsilon must lie in (0, 0.25], got {self.epsilon}")
        for name in ("max_branch_enumerations", "zeta_cap", "grid_cells", "max_states"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def eps(self) -> float:
        """Working epsilon: the largest 1/integer not above ``epsilon``."""
        return 1.0 / math.ceil(1.0 / self.epsilon - 1e-12)


@dataclass(frozen=True)
class SolverParams:
    eps: float
    big_threshold: float
    delta: float
    eta_cells: int
    zeta: int
    width_p: float
    width_var: float
    coarsened: bool


def solver_params(instance: MkuInstance, cfg: ApproxConfig) -> SolverParams:
    eps = cfg.eps
    m = instance.m
    n = max(1, len(instance.items))
    k = max(1, instance.k)
    eta = eps / (m * n * n)
    zeta = math.ceil((m / eps) ** 5)
    width = eps / (4 * m * n)
    width_p = width_var = width
    coarsened = False
    if not cfg.theoretical_mode:
        if 1.0 / eta > cfg.grid_cells:
            eta = 1.0 / cfg.grid_cells
            coarsened = True
        if zeta > cfg.zeta_cap:
            zeta = cfg.zeta_cap
            coarsened = coarsened or zeta < k
        width_p = max(width, n / cfg.grid_cells)
        width_var = max(width, 0.25 * n / cfg.grid_cells)
        coarsened = coarsened or width_p > width or width_var > width
    return SolverParams(eps, 1.0 - eps * eps, eps / (m * k), math.ceil(1.0 / eta - 1e-9),
                        zeta, width_p, width_var, coarsened)


def classify_items(items: Sequence[Item], epsilon: float) -> tuple[list[Item], list[Item]]:
    threshold = 1.0 - epsilon * epsilon
    big = [it for it in items if it.prob > threshold]
    small = [it for it in items if not it.prob > threshold]
    return big, small


def _cheapest(items: Sequence[Item]) -> list[Item]:
    return sorted(items, key=lambda it: (it.size, it.id))


# ---------------------------------------------------------------------------
# Case 1


class Candidate(NamedTuple):
    ids: tuple[int, ...]
    cost: float
    value: float
    tag: str


def case1_greedy(instance: MkuInstance, j_star: int, epsilon: float) -> Candidate | None:
    k = max(instance.k, 0)
    big, _ = classify_items(instance.groups[j_star - 1], epsilon)
    if len(big) < 2 * k:
        return None
    if j_star == instance.j0 and 2 * k > instance.quotas[instance.j0 - 1]:
        return None
    picked = {it.id for it in _cheapest(big)[:2 * k]}
    for j, group in enumerate(instance.groups[:-1], start=1):
        need = instance.quotas[j - 1] - sum(1 for it in group if it.id in picked)
        if need <= 0:
            continue
        rest = [it for it in _cheapest(group) if it.id not in picked]
        if len(rest) < need:
            return None
        picked.update(it.id for it in rest[:need])
    by_id = {it.id: it for it in instance.items}
    ids = tuple(sorted(picked))
    cost = float(sum(by_id[i].size for i in ids))
    if cost > instance.capacity:
        return None
    value = pb_tail([by_id[i].prob for i in ids], instance.k)
    return Candidate(ids, cost, value, f"case1-greedy(j*={j_star})")


# ---------------------------------------------------------------------------
# Big items


@dataclass(frozen=True)
class BigItemGrid:
    base: float
    delta: float
    levels: tuple[float, ...]

    @classmethod
    def build(cls, epsilon: float, delta: float) -> "BigItemGrid":
        base = 1.0 - epsilon * epsilon
        levels = [base]
        while levels[-1] * (1.0 + delta) < 1.0:
            levels.append(levels[-1] * (1.0 + delta))
        return cls(base, delta, tuple(levels))

    @property
    def beta(self) -> int:
        return len(self.levels) - 1

    def class_of(self, p: float) -> int:
        """Index of the largest level <= p (p must exceed ``base``)."""
        if p < self.base:
            raise ValueError(f"{p} is below the big-item threshold {self.base}")
        s = min(self.beta, int(math.log(p / self.base) / math.log1p(self.delta)))
        while s > 0 and self.levels[s] > p:
            s -= 1
        while s < self.beta and self.levels[s + 1] <= p:
            s += 1
        return s

    def rounded(self, p: float) -> float:
        return self.levels[self.class_of(p)]


def _compositions(total: int, caps: Sequence[int]):
    if not caps:
        if total == 0:
            yield ()
        return
    head, rest = caps[0], caps[1:]
    room = sum(rest)
    for c in range(min(total, head), -1, -1):
        if total - c <= room:
            for tail in _compositions(total - c, rest):
                yield (c,) + tail


def select_big_items(block: Sequence[Item], target_count: int, grid: BigItemGrid,
                     budget: int | None = None) -> list[tuple[int, ...]]:
    """One subset per way of spreading ``target_count`` over the grid classes.

    Within a class the cheapest items (ties by id) are taken.  Raises
    ``EnumerationBudgetExceeded`` (with the subsets built so far) once more
    than ``budget`` compositions would be produced.
    """
    if target_count > len(block):
        return []
    classes: dict[int, list[Item]] = {}
    for it in block:
        classes.setdefault(grid.class_of(it.prob), []).append(it)
    order = sorted(classes)
    sorted_classes = [_cheapest(classes[s]) for s in order]
    out = []
    for comp in _compositions(target_count, [len(c) for c in sorted_classes]):
        if budget is not None and len(out) >= budget:
            raise EnumerationBudgetExceeded(f"more than {budget} big-item compositions", out)
        ids = sorted(it.id for cls_items, c in zip(sorted_classes, comp) for it in cls_items[:c])
        out.append(tuple(ids))
    return out


# ---------------------------------------------------------------------------
# Small items: shared pieces


@dataclass(frozen=True)
class DistVector:
    values: tuple[float, ...]
    count: int
    cost: float


@dataclass(frozen=True)
class MomentState:
    count: int
    sum_p: float
    sum_var: float
    cost: float


class Witness(NamedTuple):
    ids: tuple[int, ...]
    state: object


def _unwind(node) -> tuple[int, ...]:
    ids = []
    while node is not None:
        ids.append(node[0])
        node = node[1]
    return tuple(sorted(ids))


def pareto_indices(costs: Sequence[float], vectors: np.ndarray, tiebreak: Sequence) -> list[int]:
    """Indices not dominated under (lower cost, componentwise larger vector).

    A point is dropped when an earlier-kept point has cost <= and every
    component >=.  Survivors are returned in (cost, -sum, tiebreak) order.
    """
    n = len(costs)
    if n == 0:
        return []
    vectors = np.asarray(vectors, dtype=float).reshape(n, -1)
    sums = vectors.sum(axis=1)
    order = sorted(range(n), key=lambda i: (costs[i], -sums[i], tiebreak[i]))
    kept = []
    kept_vecs = np.empty_like(vectors)
    for i in order:
        v = vectors[i]
        if kept and np.any(np.all(kept_vecs[:len(kept)] >= v, axis=1)):
            continue
        kept_vecs[len(kept)] = v
        kept.append(i)
    return kept


# ---------------------------------------------------------------------------
# Small items: distribution-vector DP


def _prune_by_count(states: dict, smaller_is_better_key) -> dict:
    by_count: dict[int, list] = {}
    for key, val in states.items():
        by_count.setdefault(key[0], []).append((key, val))
    out = {}
    for entries in by_count.values():
        costs = [val[0] for _, val in entries]
        vecs = np.array([smaller_is_better_key(key) for key, _ in entries], dtype=float)
        for i in pareto_indices(costs, -vecs, [key for key, _ in entries]):
            out[entries[i][0]] = entries[i][1]
    return out


def _cap_states(states: dict, max_states: int) -> dict:
    ranked = sorted(states.items(), key=lambda kv: (kv[1][0], kv[0]))
    return dict(ranked[:max_states])


@functools.lru_cache(maxsize=512)
def _run_dist_dp(block: tuple[Item, ...], zeta: int, cells: int, capacity: float, max_states: int,
                 truncate: bool):
    start = (0, (cells,) + (0,) * (zeta - 1))
    states = {start: (0.0, None)}
    truncated = False
    for it in block:
        p = it.prob
        q = 1.0 - p
        new_states = dict(states)
        for (count, u), (cost, node) in states.items():
            new_cost = cost + it.size
            if new_cost > capacity:
                continue
            nu = [min(cells, math.ceil(u[0] * q - _GRID_SLACK))]
            for h in range(1, zeta):
                nu.append(min(cells, math.ceil(u[h] * q + u[h - 1] * p - _GRID_SLACK)))
            key = (count + 1, tuple(nu))
            old = new_states.get(key)
            if old is None or new_cost < old[0]:
                new_states[key] = (new_cost, (it.id, node))
        states = _prune_by_count(new_states, lambda key: key[1])
        if len(states) > max_states:
            if not truncate:
                raise StateSpaceOverflow(f"distribution DP exceeded {max_states} states")
            states = _cap_states(states, max_states)
            truncated = True
    by_count: dict[int, list[Witness]] = {}
    for (count, u), (cost, node) in sorted(states.items(), key=lambda kv: (kv[0][0], kv[1][0], kv[0][1])):
        state = DistVector(tuple(x / cells for x in u), count, cost)
        by_count.setdefault(count, []).append(Witness(_unwind(node), state))
    return by_count, truncated


def small_items_dist_dp(block: Sequence[Item], target_count: int, zeta: int, eta: float,
                        capacity_hint: float = math.inf, max_states: int | None = None) -> list[Witness]:
    """Witness subsets of ``target_count`` small items, one per undominated rounded pmf prefix.

    A state is (count, u_0..u_{zeta-1}) where u_h over-approximates
    Pr(successes = h) on the grid {0, eta, 2 eta, ..., 1}; values are rounded
    up after every take.  Raises ``StateSpaceOverflow`` past ``max_states``.
    """
    if zeta < 1 or eta <= 0:
        raise ValueError("need zeta >= 1 and eta > 0")
    cells = math.ceil(1.0 / eta - 1e-9)
    by_count, _ = _run_dist_dp(tuple(block), zeta, cells, float(capacity_hint),
                               max_states or 1 << 62, False)
    return by_count.get(target_count, [])


# ---------------------------------------------------------------------------
# Small items: moment DP


@functools.lru_cache(maxsize=512)
def _run_moment_dp(block: tuple[Item, ...], width_p: float, width_var: float, capacity: float,
                   max_states: int, truncate: bool):
    # key -> (cost, exact sum p, exact sum p(1-p), node)
    states = {(0, 0, 0): (0.0, 0.0, 0.0, None)}
    truncated = False
    for it in block:
        p = it.prob
        var = p * (1.0 - p)
        new_states = dict(states)
        for key, (cost, sp, sv, node) in states.items():
            new_cost = cost + it.size
            if new_cost > capacity:
                continue
            nsp, nsv = sp + p, sv + var
            nkey = (key[0] + 1, round(nsp / width_p), round(nsv / width_var))
            old = new_states.get(nkey)
            if old is None or new_cost < old[0]:
                new_states[nkey] = (new_cost, nsp, nsv, (it.id, node))
        states = new_states
        if len(states) > max_states:
            if not truncate:
                raise StateSpaceOverflow(f"moment DP exceeded {max_states} states")
            states = _cap_states(states, max_states)
            truncated = True
    by_count: dict[int, list[Witness]] = {}
    for key, (cost, sp, sv, node) in sorted(states.items(), key=lambda kv: (kv[0], kv[1][0])):
        state = MomentState(key[0], key[1] * width_p, key[2] * width_var, cost)
        by_count.setdefault(key[0], []).append(Witness(_unwind(node), state))
    return by_count, truncated


def small_items_moment_dp(block: Sequence[Item], target_count: int, width_p: float, width_var: float,
                          capacity_hint: float = math.inf, max_states: int | None = None) -> list[Witness]:
    """Cheapest subset of ``target_count`` items for every reachable rounded
    (sum p, sum p(1-p)) cell, with nearest rounding."""
    if width_p <= 0 or width_var <= 0:
        raise ValueError("grid widths must be positive")
    by_count, _ = _run_moment_dp(tuple(block), float(width_p), float(width_var), float(capacity_hint),
                                 max_states or 1 << 62, False)
    return by_count.get(target_count, [])


# ---------------------------------------------------------------------------
# MKU solver


def _capped_pmf(probs: Sequence[float], k: int) -> np.ndarray:
    """pmf of min(successes, k)."""
    pmf = np.zeros(k + 1)
    pmf[0] = 1.0
    for p in probs:
        spill = pmf[k] + pmf[k - 1] * p
        pmf[1:k] = pmf[1:k] * (1.0 - p) + pmf[0:k - 1] * p
        pmf[0] *= 1.0 - p
        pmf[k] = spill
    return pmf


def _tails(pmfs: np.ndarray) -> np.ndarray:
    """Pr(X >= h) for h = 1..k from capped pmfs (rows)."""
    return pmfs[:, ::-1].cumsum(axis=1)[:, ::-1][:, 1:]


def _convolve_capped(a: np.ndarray, b: np.ndarray, k: int) -> np.ndarray:
    """All pairwise capped convolutions: rows of a x rows of b -> (len a * len b, k+1)."""
    outer = a[:, None, :, None] * b[None, :, None, :]
    out = np.zeros((a.shape[0], b.shape[0], k + 1))
    for i in range(k + 1):
        for j in range(k + 1):
            out[:, :, min(i + j, k)] += outer[:, :, i, j]
    return out.reshape(-1, k + 1)


class _Pool(NamedTuple):
    ids: list[tuple[int, ...]]
    costs: list[float]
    pmfs: np.ndarray
    tags: list[str]


def _prune_pool(pool: _Pool) -> _Pool:
    keep = pareto_indices(pool.costs, _tails(pool.pmfs), pool.ids)
    return _Pool([pool.ids[i] for i in keep], [pool.costs[i] for i in keep], pool.pmfs[keep],
                 [pool.tags[i] for i in keep])


class _Budget:
    def __init__(self, limit: int):
        self.left = limit
        self.truncated = False

    def take(self, n: int) -> int:
        granted = min(n, self.left)
        self.left -= granted
        if granted < n:
            self.truncated = True
        return granted


def _group_pool(group: Sequence[Item], lo: int, hi: int, instance: MkuInstance, params: SolverParams,
                cfg: ApproxConfig, budget: _Budget) -> tuple[_Pool, bool]:
    k = instance.k
    truncated = False
    big, small = classify_items(group, params.eps)
    grid = BigItemGrid.build(params.eps, params.delta)
    zeta = max(1, min(params.zeta, k))
    small_t = tuple(sorted(small, key=lambda it: it.id))
    capacity = float(instance.capacity)
    truncate = not cfg.theoretical_mode
    dist, t1 = _run_dist_dp(small_t, zeta, params.eta_cells, capacity, cfg.max_states, truncate)
    moments, t2 = _run_moment_dp(small_t, params.width_p, params.width_var, capacity, cfg.max_states, truncate)
    truncated = t1 or t2
    by_id = {it.id: it for it in group}

    ids_out, costs, pmfs, tags = [], [], [], []
    seen = set()
    for b in range(0, min(2 * k - 1, len(big)) + 1):
        try:
            bigs = select_big_items(big, b, grid, budget.left)
        except EnumerationBudgetExceeded as exc:
            bigs = exc.partial
            budget.truncated = True
        for s in range(max(0, lo - b), min(len(small), hi - b) + 1):
            smalls = {}
            for src, table in (("dist", dist), ("moment", moments)):
                for w in table.get(s, []):
                    smalls.setdefault(w.ids, src)
            for big_ids in bigs:
                for small_ids, src in smalls.items():
                    if not budget.take(1):
                        break
                    ids = tuple(sorted(big_ids + small_ids))
                    if ids in seen:
                        continue
                    cost = float(sum(by_id[i].size for i in ids))
                    if cost > capacity:
                        continue
                    seen.add(ids)
                    ids_out.append(ids)
                    costs.append(cost)
                    pmfs.append(_capped_pmf([by_id[i].prob for i in ids], k))
                    tags.append(f"b={b},s={s},{src}")
    pool = _Pool(ids_out, costs, np.array(pmfs).reshape(-1, k + 1), tags)
    return _prune_pool(pool), truncated


def _assemble(pools: list[_Pool], capacity: float, k: int, budget: _Budget) -> _Pool:
    acc = _Pool([()], [0.0], _capped_pmf([], k)[None, :], [""])
    for gi, pool in enumerate(pools):
        if not pool.ids:
            return _Pool([], [], np.zeros((0, k + 1)), [])
        rows = len(acc.ids)
        if rows * len(pool.ids) > budget.left:
            rows = max(1, budget.left // len(pool.ids))
            budget.truncated = True
        budget.take(rows * len(pool.ids))
        conv = _convolve_capped(acc.pmfs[:rows], pool.pmfs, k)
        ids, costs, keep, tags = [], [], [], []
        for a in range(rows):
            for g in range(len(pool.ids)):
                cost = acc.costs[a] + pool.costs[g]
                if cost > capacity:
                    continue
                keep.append(a * len(pool.ids) + g)
                ids.append(tuple(sorted(acc.ids[a] + pool.ids[g])))
                costs.append(cost)
                tags.append(f"{acc.tags[a]}|g{gi + 1}:{pool.tags[g]}" if acc.tags[a] else f"g{gi + 1}:{pool.tags[g]}")
        acc = _prune_pool(_Pool(ids, costs, conv[keep].reshape(-1, k + 1), tags))
    return acc


def _quota_fill(instance: MkuInstance) -> tuple[int, ...] | None:
    picked = []
    for j, group in enumerate(instance.groups[:-1], start=1):
        picked.extend(it.id for it in _cheapest(group)[:instance.quotas[j - 1]])
    return tuple(sorted(picked))


def solve_mku_approx(instance: MkuInstance, cfg: ApproxConfig = ApproxConfig()) -> BribeSolution | None:
    """Best candidate over both cases, or ``None`` when no candidate is feasible."""
    if instance.quota_violations():
        return None
    by_id = {it.id: it for it in instance.items}
    k = instance.k
    if k <= 0:
        ids = _quota_fill(instance)
        cost = float(sum(by_id[i].size for i in ids))
        if cost > instance.capacity:
            return None
        return BribeSolution(ids, cost, 1.0, "quota-fill(k<=0)")

    params = solver_params(instance, cfg)
    budget = _Budget(cfg.max_branch_enumerations)
    best = None
    best_tag = ""
    for j_star in range(1, instance.m + 1):
        cand = case1_greedy(instance, j_star, params.eps)
        if cand is not None and better((cand.value, cand.cost, cand.ids), best):
            best, best_tag = (cand.value, cand.cost, cand.ids), cand.tag

    truncated = params.coarsened
    pools = []
    for j, group in enumerate(instance.groups, start=1):
        if j < instance.m:
            lo = instance.quotas[j - 1]
            hi = lo if j == instance.j0 else len(group)
        else:
            lo, hi = 0, len(group)
        pool, t = _group_pool(group, lo, hi, instance, params, cfg, budget)
        truncated = truncated or t
        pools.append(pool)
    assembled = _assemble(pools, instance.capacity, k, budget)
    truncated = truncated or budget.truncated
    values = assembled.pmfs[:, k] if assembled.ids else []
    for i, ids in enumerate(assembled.ids):
        cand = (float(values[i]), assembled.costs[i], ids)
        if better(cand, best):
            best, best_tag = cand, f"case2({assembled.tags[i]})"
    if best is None:
        return None
    ids = best[2]
    cost = float(sum(by_id[i].size for i in ids))
    return BribeSolution(ids, cost, pb_tail([by_id[i].prob for i in ids], k), best_tag, truncated)


def solve_bvu_approx(instance: ElectionInstance, cfg: ApproxConfig = ApproxConfig()) -> BribeSolution:
    """Run the MKU solver for every (alpha, j0) guess and keep the best exact win probability."""
    problems = validate(instance)
    if problems:
        raise ValueError("invalid instance: " + "; ".join(problems))
    best = (0.0, 0.0, ())
    best_tag = "empty"
    truncated = False
    for guess in enumerate_guesses(instance):
        mku = bvu_to_mku(instance, guess)
        if mku is None:
            continue
        sol = solve_mku_approx(mku, cfg)
        if sol is None:
            continue
        truncated = truncated or sol.truncated
        cand = (evaluate_win_prob(instance, sol.chosen), bribe_cost(instance, sol.chosen), sol.chosen)
        if better(cand, best):
            best = cand
            best_tag = f"alpha={guess.alpha},j0={guess.j0};{sol.branch_tag}"
    chosen = best[2]
    return BribeSolution(chosen, bribe_cost(instance, chosen), evaluate_win_prob(instance, chosen), best_tag,
                         truncated, {"epsilon": cfg.eps})
