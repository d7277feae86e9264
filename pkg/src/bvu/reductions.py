"""Instance transformations.

* two-candidate elections to knapsack-with-uncertainty (KU);
* any election plus a guess (alpha, j0) of the final rival lead to the
  multi-block knapsack (MKU) whose feasible sets have exactly that lead;
* d-sum instances to KU gadgets whose optimum separates YES from NO.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

from bvu.model import ElectionInstance, Item, KuInstance, MkuInstance

# 2**-e is an exact normal double for e <= 1022.
MAX_EXACT_EXPONENT = 1022


class PrecisionLoss(ValueError):
    """The gadget probabilities would not be exactly representable."""


@dataclass(frozen=True)
class DSumInstance:
    xs: tuple[int, ...]
    t: int
    d: int

    def __post_init__(self):
        if any(int(x) != x or x < 1 for x in self.xs):
            raise ValueError("d-sum values must be positive integers")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if len(self.xs) < self.d:
            raise ValueError(f"need at least d={self.d} values, got {len(self.xs)}")

    @property
    def s(self) -> int:
        return len(self.xs)


@dataclass(frozen=True)
class MkuGuess:
    alpha: int
    j0: int


@dataclass(frozen=True)
class GapCertificate:
    yes_lower: float
    no_upper: float


def bvu_to_ku(instance: ElectionInstance) -> KuInstance:
    if instance.m != 2:
        raise ValueError(f"KU reduction needs exactly 2 candidates, got {instance.m}")
    items = tuple(Item(v.id, v.price, v.success_prob) for v in instance.groups[0])
    return KuInstance(instance.budget, items, instance.r)


def ku_value(ku: KuInstance, chosen: Sequence[int]) -> float:
    from bvu.probdist import pb_tail

    by_id = {it.id: it for it in ku.items}
    chosen = sorted(set(chosen))
    probs = [by_id[i].prob for i in chosen]
    return pb_tail(probs, ku.r + 1 - len(chosen))


def enumerate_guesses(instance: ElectionInstance) -> list[MkuGuess]:
    return [MkuGuess(alpha, j0)
            for alpha in range(-1, instance.r + 1)
            for j0 in range(1, instance.m)]


def bvu_to_mku(instance: ElectionInstance, guess: MkuGuess) -> MkuInstance | None:
    """MKU instance for the guess, or ``None`` when no bribe set can realise it.

    A guess is unrealisable when group j0 cannot end exactly ``alpha`` votes
    ahead of the designated candidate, or when a quota exceeds its group.
    """
    if not -1 <= guess.alpha <= instance.r:
        raise ValueError(f"alpha={guess.alpha} outside -1..{instance.r}")
    if not 1 <= guess.j0 <= instance.m - 1:
        raise ValueError(f"j0={guess.j0} outside 1..{instance.m - 1}")
    sizes = instance.sizes
    designated = sizes[-1]
    raw = [sizes[j] - designated - guess.alpha for j in range(instance.m - 1)]
    quotas = tuple(max(x, 0) for x in raw)
    if raw[guess.j0 - 1] < 0:
        return None
    if any(q > s for q, s in zip(quotas, sizes)):
        return None
    groups = tuple(
        tuple(Item(v.id, v.price, v.success_prob) for v in g) if j < instance.m - 1 else ()
        for j, g in enumerate(instance.groups)
    )
    return MkuInstance(instance.budget, groups, quotas, guess.j0, guess.alpha + 1)


def gadget_omega(alpha_target: float) -> int:
    if alpha_target < 1:
        raise ValueError("alpha_target must be >= 1")
    return math.ceil(math.log2(alpha_target)) + 1


def dsum_to_ku(dsum: DSumInstance, alpha_target: float) -> tuple[KuInstance, GapCertificate]:
    omega = gadget_omega(alpha_target)
    worst = max(dsum.xs) * omega
    if worst > MAX_EXACT_EXPONENT:
        raise PrecisionLoss(f"2**-{worst} is not exactly representable; use smaller values or alpha_target")
    if omega * (dsum.t + 1) > MAX_EXACT_EXPONENT:
        raise PrecisionLoss(f"gap bound 2**-{omega * (dsum.t + 1)} is not exactly representable")
    big_m = dsum.s * omega * sum(dsum.xs)
    items = tuple(Item(i, float(big_m - omega * x), 2.0 ** (-omega * x)) for i, x in enumerate(dsum.xs))
    ku = KuInstance(float(dsum.d * big_m - omega * dsum.t), items, 2 * dsum.d - 1)
    cert = GapCertificate(2.0 ** (-omega * dsum.t), 2.0 ** (-omega * (dsum.t + 1)))
    return ku, cert


def dsum_solve(dsum: DSumInstance) -> tuple[int, ...] | None:
    """Exhaustive d-subset search; returns the first index tuple summing to t."""
    for combo in itertools.combinations(range(dsum.s), dsum.d):
        if sum(dsum.xs[i] for i in combo) == dsum.t:
            return combo
    return None


def ku_as_election(ku: KuInstance) -> ElectionInstance:
    """Wrap a KU instance as a two-candidate election with the same objective.

    Unaffordable zero-probability dummies pad V_1 when there are fewer than r
    items.  Item ids are the positions of the returned V_1 voters.
    """
    pairs = [(it.size, it.prob) for it in ku.items]
    padding = max(0, ku.r - len(pairs))
    dummy_price = float(ku.capacity) + 1.0
    pairs.extend([(dummy_price, 0.0)] * padding)
    designated = len(pairs) - ku.r
    return ElectionInstance.from_groups([pairs, [(0.0, 0.0)] * designated], ku.capacity)
