"""Bribery with uncertain vote counting under plurality: exact and approximate solvers."""

from bvu.approx import ApproxConfig, solve_bvu_approx, solve_mku_approx
from bvu.exact import ExactConfig, solve_bvu_exact, solve_ku_exact, solve_mku_exact
from bvu.model import (BribeSolution, ElectionInstance, Item, KuInstance, MkuInstance, Voter, evaluate_win_prob,
                       validate, xi)
from bvu.probdist import pb_pmf, pb_tail
from bvu.reductions import DSumInstance, MkuGuess, bvu_to_ku, bvu_to_mku, dsum_to_ku, enumerate_guesses

__all__ = [
    "ApproxConfig", "BribeSolution", "DSumInstance", "ElectionInstance", "ExactConfig", "Item", "KuInstance",
    "MkuGuess", "MkuInstance", "Voter", "bvu_to_ku", "bvu_to_mku", "dsum_to_ku", "enumerate_guesses",
    "evaluate_win_prob", "pb_pmf", "pb_tail", "solve_bvu_approx", "solve_bvu_exact", "solve_ku_exact",
    "solve_mku_approx", "solve_mku_exact", "validate", "xi",
]
