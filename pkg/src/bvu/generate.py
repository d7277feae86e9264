"""Seeded instance generators.

All randomness goes through ``numpy.random.default_rng(seed)`` (PCG64), which
is bit-reproducible across platforms.  Prices are small integers and
probabilities are rounded to four decimals so instance files stay readable.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from bvu.model import ElectionInstance, validate
from bvu.reductions import DSumInstance, dsum_solve, dsum_to_ku, ku_as_election


def random_instance(sizes: Sequence[int], seed: int, price_range=(1, 10), prob_range=(0.05, 0.95),
                    budget_frac: float = 0.4) -> ElectionInstance:
    if len(sizes) < 2:
        raise ValueError("need at least two groups")
    if any(s >= sizes[0] for s in sizes[1:]):
        raise ValueError(f"group 1 must be strictly largest, got sizes {list(sizes)}")
    lo_p, hi_p = prob_range
    if not 0.0 <= lo_p <= hi_p <= 1.0:
        raise ValueError(f"bad probability range {prob_range}")
    lo_q, hi_q = price_range
    if not 0 <= lo_q <= hi_q:
        raise ValueError(f"bad price range {price_range}")
    rng = np.random.default_rng(seed)
    groups = []
    for s in sizes:
        prices = rng.integers(lo_q, hi_q + 1, size=s)
        probs = np.round(rng.uniform(lo_p, hi_p, size=s), 4)
        groups.append([(float(q), float(p)) for q, p in zip(prices, probs)])
    bribable = sum(q for g in groups[:-1] for q, _ in g)
    budget = float(np.floor(bribable * budget_frac))
    return ElectionInstance.from_groups(groups, budget)


def dsum_gadget_instance(xs: Sequence[int], d: int, t: int, alpha_target: float) -> tuple[ElectionInstance, dict]:
    """Two-candidate election wrapping the d-sum knapsack gadget, with its gap certificate."""
    dsum = DSumInstance(tuple(int(x) for x in xs), int(t), int(d))
    ku, cert = dsum_to_ku(dsum, alpha_target)
    inst = ku_as_election(ku)
    witness = dsum_solve(dsum)
    meta = {
        "generator": "dsum-gadget",
        "dsum": {"xs": list(dsum.xs), "d": dsum.d, "t": dsum.t, "alpha_target": alpha_target},
        "gap_certificate": {"yes_lower": cert.yes_lower, "no_upper": cert.no_upper},
        "dsum_answer": "yes" if witness is not None else "no",
    }
    return inst, meta


def case1_friendly_instance(k: int, n_big: int, seed: int, m: int = 2) -> ElectionInstance:
    """Instance whose best bribe takes 2k cheap near-certain voters.

    With r = 3k - 1 and budget covering exactly the 2k cheapest big voters, the
    designated candidate then needs k successes out of 2k, which the big
    voters deliver with probability well above 0.75.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if n_big < 2 * k:
        raise ValueError(f"need at least 2k={2 * k} big voters, got {n_big}")
    if m not in (2, 3):
        raise ValueError("case1-friendly supports m = 2 or 3")
    rng = np.random.default_rng(seed)
    r = 3 * k - 1
    n_filler = max(2, r - n_big)
    big = [(float(rng.integers(1, 4)), float(np.round(rng.uniform(0.95, 0.999), 4))) for _ in range(n_big)]
    filler = [(float(rng.integers(50, 100)), float(np.round(rng.uniform(0.1, 0.6), 4))) for _ in range(n_filler)]
    v1 = big + filler
    designated = len(v1) - r
    budget = float(sum(sorted(q for q, _ in big)[:2 * k]))
    groups = [v1]
    if m == 3:
        groups.append([(float(rng.integers(50, 100)), 0.5)] * designated)
    groups.append([(1.0, 0.5)] * designated)
    inst = ElectionInstance.from_groups(groups, budget)
    assert not validate(inst), validate(inst)
    return inst
