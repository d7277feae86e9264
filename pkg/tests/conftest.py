import itertools
import random

import pytest

from bvu.model import ElectionInstance

ACCEPTANCE_LINES = []


def brute_pmf(probs):
    """pmf by enumerating all 2^n outcomes."""
    pmf = [0.0] * (len(probs) + 1)
    for outcome in itertools.product((0, 1), repeat=len(probs)):
        w = 1.0
        for bit, p in zip(outcome, probs):
            w *= p if bit else 1.0 - p
        pmf[sum(outcome)] += w
    return pmf


def brute_tail(probs, k):
    return sum(brute_pmf(probs)[max(k, 0):]) if k <= len(probs) else 0.0


def brute_win_prob(instance, bribed):
    """Play the election out for every counted/not-counted outcome of the bribed voters."""
    bribed = sorted(set(bribed))
    voters = instance.voters
    total = 0.0
    for outcome in itertools.product((0, 1), repeat=len(bribed)):
        votes = [len(g) for g in instance.groups]
        w = 1.0
        for bit, vid in zip(outcome, bribed):
            v = voters[vid]
            votes[v.group - 1] -= 1
            if bit:
                votes[-1] += 1
                w *= v.success_prob
            else:
                w *= 1.0 - v.success_prob
        if all(votes[-1] > votes[j] for j in range(instance.m - 1)):
            total += w
    return total


def brute_bvu_opt(instance):
    """Best win probability over all affordable bribe sets (combinations, no pruning tricks)."""
    bribable = [v.id for v in instance.bribable()]
    best = 0.0
    for size in range(len(bribable) + 1):
        for combo in itertools.combinations(bribable, size):
            if sum(instance.voters[i].price for i in combo) <= instance.budget:
                best = max(best, brute_win_prob(instance, combo))
    return best


def random_election(rng: random.Random, max_bribable=10, max_m=3, max_r=4, min_r=1, integer_prices=True):
    """Random valid election with at most ``max_bribable`` bribable voters."""
    while True:
        m = rng.randint(2, max_m)
        designated = rng.randint(0, 4)
        r = rng.randint(min_r, max_r)
        first = designated + r
        mids = [rng.randint(0, first - 1) for _ in range(m - 2)]
        if first + sum(mids) <= max_bribable and first >= 1:
            break
    sizes = [first] + mids + [designated]
    groups = []
    for s in sizes:
        group = []
        for _ in range(s):
            price = rng.randint(1, 9) if integer_prices else round(rng.uniform(0.5, 9.0), 3)
            u = rng.random()
            prob = round(rng.uniform(0.94, 1.0), 4) if u < 0.25 else round(rng.random(), 4)
            group.append((price, prob))
        groups.append(group)
    bribable_total = sum(q for g in groups[:-1] for q, _ in g)
    budget = round(bribable_total * rng.uniform(0.0, 0.8))
    return ElectionInstance.from_groups(groups, budget)


@pytest.fixture
def rng():
    return random.Random(20261016)


def record(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
