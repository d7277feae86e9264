"""Domain types for plurality elections with uncertain bribed votes.

Candidates are numbered 1..m.  Candidate 1 wins absent bribery and candidate m
is the designated candidate.  Voter ids are 0-based and assigned in group order
(all of V_1 first, then V_2, ...).

A bribed voter always leaves its original candidate; its vote reaches the
designated candidate only with probability ``success_prob``.  The designated
candidate must strictly beat every rival, so ties go against it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from bvu.probdist import pb_tail


@dataclass(frozen=True)
class Voter:
    id: int
    group: int
    price: float
    success_prob: float


class Item(NamedTuple):
    """A knapsack item: an id (voter id when derived from an election), a size and a success probability."""

    id: int
    size: float
    prob: float


@dataclass(frozen=True)
class ElectionInstance:
    groups: tuple[tuple[Voter, ...], ...]
    budget: float

    @classmethod
    def from_groups(cls, groups: Sequence[Sequence[tuple[float, float]]], budget: float) -> "ElectionInstance":
        """Build an instance from ``(price, prob)`` pairs per candidate, assigning ids in group order."""
        built = []
        next_id = 0
        for j, group in enumerate(groups, start=1):
            voters = []
            for price, prob in group:
                voters.append(Voter(next_id, j, float(price), float(prob)))
                next_id += 1
            built.append(tuple(voters))
        return cls(tuple(built), float(budget))

    @property
    def m(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.groups)

    @property
    def r(self) -> int:
        return len(self.groups[0]) - len(self.groups[-1])

    @property
    def voters(self) -> tuple[Voter, ...]:
        return tuple(v for g in self.groups for v in g)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    def bribable(self) -> tuple[Voter, ...]:
        return tuple(v for g in self.groups[:-1] for v in g)

    def voter(self, vid: int) -> Voter:
        voters = self.voters
        if not 0 <= vid < len(voters):
            raise ValueError(f"voter id {vid} out of range 0..{len(voters) - 1}")
        return voters[vid]


@dataclass(frozen=True)
class KuInstance:
    capacity: float
    items: tuple[Item, ...]
    r: int


@dataclass(frozen=True)
class MkuInstance:
    """Knapsack with per-group cardinality quotas.

    ``groups`` has m entries; ``quotas`` has m-1 entries (the last group carries
    no quota).  The selection must take at least ``quotas[j-1]`` items from
    group j, and exactly ``quotas[j0-1]`` from group ``j0``.  The objective is
    Pr(number of successes >= k).
    """

    capacity: float
    groups: tuple[tuple[Item, ...], ...]
    quotas: tuple[int, ...]
    j0: int
    k: int

    @property
    def m(self) -> int:
        return len(self.groups)

    @property
    def items(self) -> tuple[Item, ...]:
        return tuple(it for g in self.groups for it in g)

    def quota_violations(self) -> list[str]:
        """Quota/size mismatches that make the instance infeasible (not invalid)."""
        bad = []
        for j, (quota, group) in enumerate(zip(self.quotas, self.groups), start=1):
            if quota > len(group):
                bad.append(f"quota {quota} exceeds group {j} size {len(group)}")
        return bad

    def is_feasible_selection(self, chosen: Iterable[int]) -> bool:
        chosen = set(chosen)
        cost = 0.0
        for j, group in enumerate(self.groups, start=1):
            count = sum(1 for it in group if it.id in chosen)
            cost += sum(it.size for it in group if it.id in chosen)
            if j < self.m:
                quota = self.quotas[j - 1]
                if j == self.j0 and count != quota:
                    return False
                if count < quota:
                    return False
        known = {it.id for it in self.items}
        return chosen <= known and cost <= self.capacity


@dataclass(frozen=True)
class BribeSolution:
    chosen: tuple[int, ...]
    cost: float
    win_prob: float
    branch_tag: str = "exact"
    truncated: bool = False
    meta: dict = field(default_factory=dict, compare=False)


def validate(instance: ElectionInstance) -> list[str]:
    """Return human-readable invariant violations; empty when the instance is valid."""
    problems = []
    if instance.m < 2:
        problems.append(f"need at least 2 candidates, got {instance.m}")
        return problems
    sizes = instance.sizes
    if any(sizes[0] <= s for s in sizes[1:]):
        rivals = [j for j, s in enumerate(sizes[1:], start=2) if sizes[0] <= s]
        problems.append(f"c1 not strict winner (groups {rivals} have >= {sizes[0]} voters)")
    if instance.budget < 0:
        problems.append(f"negative budget {instance.budget}")
    expected = 0
    for j, group in enumerate(instance.groups, start=1):
        for v in group:
            if v.id != expected:
                problems.append(f"voter id {v.id} out of order (expected {expected})")
            if v.group != j:
                problems.append(f"voter {v.id} tagged group {v.group} but stored in group {j}")
            if not 0.0 <= v.success_prob <= 1.0:
                problems.append(f"success_prob out of [0,1] at voter {v.id}")
            if not v.price >= 0.0:
                problems.append(f"negative price at voter {v.id}")
            expected += 1
    return problems


def _group_counts(instance: ElectionInstance, bribed: Iterable[int]) -> tuple[list[int], list[float]]:
    n = instance.n
    last_group_start = n - instance.sizes[-1]
    counts = [0] * instance.m
    probs = []
    seen = set()
    voters = instance.voters
    for vid in bribed:
        if not 0 <= vid < n:
            raise ValueError(f"voter id {vid} out of range 0..{n - 1}")
        if vid >= last_group_start:
            raise ValueError(f"voter {vid} supports the designated candidate and cannot be bribed")
        if vid in seen:
            continue
        seen.add(vid)
        v = voters[vid]
        counts[v.group - 1] += 1
        probs.append(v.success_prob)
    return counts, probs


def xi_from_counts(sizes: Sequence[int], counts: Sequence[int]) -> int:
    designated = sizes[-1]
    deficit = max(sizes[j] - counts[j] - designated for j in range(len(sizes) - 1))
    return max(deficit, -1)


def xi(instance: ElectionInstance, bribed: Iterable[int]) -> int:
    """Largest rival lead over the designated candidate after bribery, clamped at -1.

    The designated candidate needs ``xi + 1`` counted bribed votes to win.
    """
    counts, _ = _group_counts(instance, bribed)
    return xi_from_counts(instance.sizes, counts)


def evaluate_win_prob(instance: ElectionInstance, bribed: Iterable[int]) -> float:
    counts, probs = _group_counts(instance, bribed)
    need = xi_from_counts(instance.sizes, counts) + 1
    return pb_tail(probs, need)


def bribe_cost(instance: ElectionInstance, bribed: Iterable[int]) -> float:
    voters = instance.voters
    return float(sum(voters[i].price for i in sorted(set(bribed))))
