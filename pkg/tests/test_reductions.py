import itertools
import random

import pytest

from bvu.exact import solve_ku_exact, solve_mku_exact, mku_value
from bvu.model import ElectionInstance, KuInstance, Item, bribe_cost, evaluate_win_prob, xi
from bvu.reductions import (DSumInstance, MkuGuess, PrecisionLoss, bvu_to_ku, bvu_to_mku, dsum_solve, dsum_to_ku,
                            enumerate_guesses, gadget_omega, ku_as_election, ku_value)

from conftest import random_election


def affordable_subsets(instance):
    ids = [v.id for v in instance.bribable()]
    for size in range(len(ids) + 1):
        for combo in itertools.combinations(ids, size):
            if bribe_cost(instance, combo) <= instance.budget:
                yield combo


def test_bvu_to_ku_example():
    inst = ElectionInstance.from_groups([[(1, 0.4), (2, 0.5), (3, 0.6)], [(1, 0.5)]], 10)
    ku = bvu_to_ku(inst)
    assert ku.capacity == 10 and ku.r == 2 and len(ku.items) == 3
    assert ku.items[1] == Item(1, 2.0, 0.5)
    assert ku_value(ku, [0, 1, 2]) == 1.0 == evaluate_win_prob(inst, [0, 1, 2])


def test_bvu_to_ku_rejects_three_candidates():
    inst = ElectionInstance.from_groups([[(1, 0.5)] * 3, [(1, 0.5)], []], 1)
    with pytest.raises(ValueError):
        bvu_to_ku(inst)


def test_ku_round_trip_all_subsets():
    rng = random.Random(1)
    for _ in range(30):
        inst = random_election(rng, max_bribable=10, max_m=2)
        ku = bvu_to_ku(inst)
        for combo in affordable_subsets(inst):
            assert abs(ku_value(ku, combo) - evaluate_win_prob(inst, combo)) <= 1e-12


def test_bvu_to_mku_examples():
    inst = ElectionInstance.from_groups([[(1, 0.5)] * 3, [(1, 0.5)]], 5)
    mku = bvu_to_mku(inst, MkuGuess(0, 1))
    assert mku.quotas == (2,) and mku.k == 1 and mku.j0 == 1
    assert mku.groups[-1] == ()
    top = bvu_to_mku(inst, MkuGuess(inst.r, 1))
    assert top.quotas == (0,) and top.k == inst.r + 1
    low = bvu_to_mku(inst, MkuGuess(-1, 1))
    assert low.quotas == (3,) and low.k == 0


def test_bvu_to_mku_alpha_r_quotas_vanish_for_smaller_groups():
    inst = ElectionInstance.from_groups([[(1, 0.5)] * 5, [(1, 0.5)] * 3, [(1, 0.5)] * 2, [(1, .5)]], 9)
    mku = bvu_to_mku(inst, MkuGuess(inst.r, 1))
    assert mku.quotas == (0, 0, 0)
    # j0=2 cannot end exactly r ahead: marked infeasible
    assert bvu_to_mku(inst, MkuGuess(inst.r, 2)) is None


def test_bvu_to_mku_rejects_out_of_range():
    inst = ElectionInstance.from_groups([[(1, 0.5)] * 3, [(1, 0.5)]], 5)
    for guess in (MkuGuess(inst.r + 1, 1), MkuGuess(-2, 1), MkuGuess(0, 2), MkuGuess(0, 0)):
        with pytest.raises(ValueError):
            bvu_to_mku(inst, guess)


def test_enumerate_guesses_examples():
    inst = ElectionInstance.from_groups([[(1, 0.5)] * 2, [(1, 0.5)]], 5)
    assert [(g.alpha, g.j0) for g in enumerate_guesses(inst)] == [(-1, 1), (0, 1), (1, 1)]
    inst3 = ElectionInstance.from_groups([[(1, 0.5)] * 3, [(1, 0.5)], [(1, 0.5)]], 5)
    guesses = enumerate_guesses(inst3)
    assert len(guesses) == 8
    assert guesses == sorted(guesses, key=lambda g: (g.alpha, g.j0))


def test_guess_soundness_exhaustive():
    rng = random.Random(2)
    for _ in range(40):
        inst = random_election(rng, max_bribable=10, max_m=3)
        sizes, designated = inst.sizes, inst.sizes[-1]
        for combo in affordable_subsets(inst):
            alpha = xi(inst, combo)
            counts = [sum(1 for i in combo if inst.voters[i].group == j + 1) for j in range(inst.m - 1)]
            matching = [j + 1 for j in range(inst.m - 1) if sizes[j] - counts[j] - designated == alpha]
            if alpha == -1:
                # the clamp hides larger margins; the certain-win guess still applies when some group hits -1
                if not matching:
                    continue
            assert matching
            for j0 in matching:
                mku = bvu_to_mku(inst, MkuGuess(alpha, j0))
                assert mku is not None
                assert mku.is_feasible_selection(combo)
                assert abs(mku_value(mku, combo) - evaluate_win_prob(inst, combo)) <= 1e-12


def test_mku_feasible_sets_have_guessed_lead_or_better():
    # any set feasible for guess alpha needs at most alpha+1 successes
    rng = random.Random(3)
    for _ in range(30):
        inst = random_election(rng, max_bribable=9, max_m=3)
        for guess in enumerate_guesses(inst):
            mku = bvu_to_mku(inst, guess)
            if mku is None:
                continue
            for combo in affordable_subsets(inst):
                if mku.is_feasible_selection(combo):
                    assert xi(inst, combo) <= max(guess.alpha, -1)
                    assert evaluate_win_prob(inst, combo) >= mku_value(mku, combo) - 1e-12


def test_dsum_to_ku_example():
    ku, cert = dsum_to_ku(DSumInstance((1, 2, 3, 4), 5, 2), 2)
    assert gadget_omega(2) == 2
    assert [it.prob for it in ku.items] == [2.0 ** -2, 2.0 ** -4, 2.0 ** -6, 2.0 ** -8]
    assert [it.size for it in ku.items] == [78, 76, 74, 72]
    assert ku.capacity == 150 and ku.r == 3
    assert cert.yes_lower == 2.0 ** -10 and cert.no_upper == 2.0 ** -12


def test_dsum_yes_example_reaches_certificate():
    dsum = DSumInstance((1, 2, 3, 4), 5, 2)
    ku, cert = dsum_to_ku(dsum, 2)
    assert dsum_solve(dsum) is not None
    best = solve_ku_exact(ku)
    assert best.win_prob >= cert.yes_lower
    assert best.win_prob == 2.0 ** -10
    # items {2,3} in 1-based numbering attain the optimum
    assert ku_value(ku, [1, 2]) == best.win_prob


def test_dsum_no_example_stays_below_gap():
    dsum = DSumInstance((1, 2, 4, 8), 11, 2)
    ku, cert = dsum_to_ku(dsum, 2)
    assert dsum_solve(dsum) is None
    assert solve_ku_exact(ku).win_prob <= cert.no_upper
    assert cert.no_upper == 2.0 ** -24


def test_dsum_precision_guard():
    with pytest.raises(PrecisionLoss):
        dsum_to_ku(DSumInstance((600,), 600, 1), 2)
    with pytest.raises(PrecisionLoss):
        dsum_to_ku(DSumInstance((1, 2), 600, 1), 2)
    with pytest.raises(ValueError):
        DSumInstance((0, 1), 1, 1)
    with pytest.raises(ValueError):
        DSumInstance((1,), 1, 2)
    with pytest.raises(ValueError):
        gadget_omega(0.5)


def test_ku_as_election_preserves_values():
    ku = KuInstance(7.0, (Item(0, 3, 0.4), Item(1, 4, 0.7)), 3)
    inst = ku_as_election(ku)
    assert inst.r == 3 and inst.m == 2
    for size in range(3):
        for combo in itertools.combinations([0, 1], size):
            assert evaluate_win_prob(inst, combo) == pytest.approx(ku_value(ku, combo), abs=1e-15)
    assert solve_ku_exact(ku).win_prob == pytest.approx(
        max(evaluate_win_prob(inst, c) for c in affordable_subsets(inst)), abs=1e-15)
