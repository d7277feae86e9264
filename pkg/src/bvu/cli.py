"""Command-line interface: ``bvu generate|solve|verify|reduce|bench``.

Exit codes: 0 success, 1 internal error, 2 invalid input, 3 exact size limit
exceeded, 4 verification found a failing check.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
from pathlib import Path

from bvu import formats
from bvu.approx import ApproxConfig, StateSpaceOverflow, solve_bvu_approx
from bvu.exact import ExactConfig, SizeLimitExceeded, solve_bvu_exact
from bvu.generate import case1_friendly_instance, dsum_gadget_instance, random_instance
from bvu.model import ElectionInstance, bribe_cost, evaluate_win_prob, validate
from bvu.probdist import mc_estimate_win_prob
from bvu.reductions import MkuGuess, PrecisionLoss, bvu_to_ku, bvu_to_mku

log = logging.getLogger("bvu")

EXIT_OK, EXIT_INTERNAL, EXIT_INVALID, EXIT_SIZE, EXIT_VERIFY_FAILED = 0, 1, 2, 3, 4
EXACT_TOL = 1e-9
MC_FACTOR = 4.0


class InputError(Exception):
    """Bad user input; reported on stderr with exit code 2."""


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def load_instance(path: str) -> tuple[ElectionInstance, dict]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        inst, meta = formats.instance_from_dict(formats.loads(text))
    except formats.FormatError as exc:
        raise InputError(f"{path}: {exc}") from exc
    problems = validate(inst)
    if problems:
        raise InputError(f"{path}: invalid instance:\n  " + "\n  ".join(problems))
    return inst, meta


def cmd_generate(args) -> int:
    meta = {"generator": args.kind, "seed": args.seed}
    try:
        if args.kind == "random":
            inst = random_instance(args.sizes, args.seed, (args.price_min, args.price_max),
                                   (args.prob_min, args.prob_max), args.budget_frac)
        elif args.kind == "dsum-gadget":
            if args.xs is None or args.d is None or args.t is None:
                raise InputError("dsum-gadget needs --xs, --d and --t")
            inst, meta = dsum_gadget_instance(args.xs, args.d, args.t, args.alpha_target)
        else:
            inst = case1_friendly_instance(args.k, args.big, args.seed, args.m)
            meta["k"] = args.k
    except (ValueError, PrecisionLoss) as exc:
        raise InputError(str(exc)) from exc
    if args.name:
        meta["name"] = args.name
    _emit(formats.dumps(formats.instance_to_dict(inst, meta)), args.output)
    return EXIT_OK


def solve(inst: ElectionInstance, method: str, epsilon: float, theoretical: bool, max_items: int):
    if method == "exact":
        return solve_bvu_exact(inst, ExactConfig(max_items=max_items))
    return solve_bvu_approx(inst, ApproxConfig(epsilon=epsilon, theoretical_mode=theoretical))


def cmd_solve(args) -> int:
    inst, _ = load_instance(args.instance)
    start = time.perf_counter()
    sol = solve(inst, args.method, args.epsilon, args.theoretical, args.max_items)
    runtime = None if args.no_timing else round((time.perf_counter() - start) * 1000.0, 3)
    eps = sol.meta.get("epsilon") if args.method == "approx" else None
    log.info("%s: win_prob=%.6g cost=%g chosen=%s", args.method, sol.win_prob, sol.cost, list(sol.chosen))
    _emit(formats.dumps(formats.solution_to_dict(sol, args.method, eps, runtime)), args.output)
    return EXIT_OK


def verify(inst: ElectionInstance, sol, samples: int, seed: int) -> list[dict]:
    checks = []
    n = inst.n
    out_of_range = [i for i in sol.chosen if not 0 <= i < n]
    if out_of_range:
        raise InputError(f"solution ids {out_of_range} out of range 0..{n - 1}")
    designated = [i for i in sol.chosen if inst.voters[i].group == inst.m]
    unique = len(set(sol.chosen)) == len(sol.chosen)
    checks.append({"check": "feasible-voters", "pass": not designated and unique,
                   "detail": f"designated-candidate voters={designated}, duplicates={not unique}"})
    cost = bribe_cost(inst, sol.chosen)
    checks.append({"check": "budget", "pass": cost <= inst.budget, "detail": f"cost={cost!r} budget={inst.budget!r}"})
    checks.append({"check": "cost", "pass": abs(cost - sol.cost) <= EXACT_TOL,
                   "detail": f"claimed={sol.cost!r} recomputed={cost!r} tol={EXACT_TOL}"})
    if designated:
        checks.append({"check": "exact-win-prob", "pass": False, "detail": "not evaluable"})
        return checks
    exact = evaluate_win_prob(inst, sol.chosen)
    checks.append({"check": "exact-win-prob", "pass": abs(exact - sol.win_prob) <= EXACT_TOL,
                   "detail": f"claimed={sol.win_prob!r} exact={exact!r} tol={EXACT_TOL}"})
    est, half = mc_estimate_win_prob(inst, sol.chosen, samples, seed)
    # half-width at the exact value keeps the check meaningful when the estimate is 0 or 1
    half_exact = 1.96 * (exact * (1.0 - exact) / samples) ** 0.5
    tol = MC_FACTOR * max(half, half_exact)
    checks.append({"check": "monte-carlo", "pass": abs(est - exact) <= tol,
                   "detail": f"estimate={est!r} exact={exact!r} tol={tol!r} samples={samples} seed={seed}"})
    return checks


def cmd_verify(args) -> int:
    inst, _ = load_instance(args.instance)
    try:
        sol, _ = formats.solution_from_dict(formats.loads(Path(args.solution).read_text()))
    except OSError as exc:
        raise InputError(f"cannot read {args.solution}: {exc}") from exc
    except formats.FormatError as exc:
        raise InputError(f"{args.solution}: {exc}") from exc
    checks = verify(inst, sol, args.samples, args.seed)
    ok = all(c["pass"] for c in checks)
    _emit(formats.dumps({"pass": ok, "checks": checks}), args.output)
    for c in checks:
        log.info("%s %s: %s", "PASS" if c["pass"] else "FAIL", c["check"], c["detail"])
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_reduce(args) -> int:
    inst, _ = load_instance(args.instance)
    provenance = {"source": str(args.instance)}
    if args.target == "ku":
        if inst.m != 2:
            raise InputError(f"ku reduction needs m=2, instance has m={inst.m}")
        out = formats.ku_to_dict(bvu_to_ku(inst), provenance)
    else:
        if args.alpha is None or args.j0 is None:
            raise InputError("mku reduction needs --alpha and --j0")
        guess = MkuGuess(args.alpha, args.j0)
        provenance["guess"] = {"alpha": guess.alpha, "j0": guess.j0}
        try:
            mku = bvu_to_mku(inst, guess)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        if mku is None:
            out = {"schema_version": formats.MKU_SCHEMA, "infeasible": True,
                   "reason": "no bribe set realises this (alpha, j0) guess", "provenance": provenance}
        else:
            out = formats.mku_to_dict(mku, provenance)
    _emit(formats.dumps(out), args.output)
    return EXIT_OK


BENCH_COLUMNS = ["instance", "method", "epsilon", "value", "gap", "runtime_ms", "truncated", "error"]


def bench_rows(directory: str, methods: list[str], epsilons: list[float], max_items: int = 22,
               theoretical: bool = False) -> list[dict]:
    paths = sorted(Path(directory).glob("*.json"))
    if not paths:
        raise InputError(f"no *.json instances in {directory}")
    rows = []
    for path in paths:
        exact_value = None
        runs = []
        if "exact" in methods:
            runs.append(("exact", None))
        if "approx" in methods:
            runs.extend(("approx", eps) for eps in epsilons)
        for method, eps in runs:
            row = dict.fromkeys(BENCH_COLUMNS, "")
            row.update(instance=path.name, method=method, epsilon="" if eps is None else eps)
            try:
                inst, _ = load_instance(str(path))
                start = time.perf_counter()
                sol = solve(inst, method, eps or 0.25, theoretical, max_items)
                row["runtime_ms"] = round((time.perf_counter() - start) * 1000.0, 3)
                row["value"] = sol.win_prob
                row["truncated"] = sol.truncated
                if method == "exact":
                    exact_value = sol.win_prob
                    row["gap"] = 0.0
                elif exact_value is not None:
                    row["gap"] = exact_value - sol.win_prob
            except (InputError, SizeLimitExceeded, StateSpaceOverflow, ValueError) as exc:
                row["error"] = str(exc).replace("\n", " ")
            rows.append(row)
    return rows


def cmd_bench(args) -> int:
    for method in args.methods:
        if method not in ("exact", "approx"):
            raise InputError(f"unknown method {method!r}")
    rows = bench_rows(args.directory, args.methods, args.epsilons, args.max_items, args.theoretical)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed (generation, Monte Carlo)")
    common.add_argument("--output", "-o", help="write result here instead of stdout")
    common.add_argument("--quiet", "-q", action="store_true", help="only log warnings and errors")

    parser = argparse.ArgumentParser(prog="bvu", description="Bribery with uncertain vote counting (plurality).")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", parents=[common], help="generate an instance file")
    gen.add_argument("kind", choices=["random", "dsum-gadget", "case1-friendly"])
    gen.add_argument("--name")
    gen.add_argument("--sizes", type=_ints, default=[5, 2], help="voters per candidate, e.g. 5,3,2")
    gen.add_argument("--price-min", type=int, default=1)
    gen.add_argument("--price-max", type=int, default=10)
    gen.add_argument("--prob-min", type=float, default=0.05)
    gen.add_argument("--prob-max", type=float, default=0.95)
    gen.add_argument("--budget-frac", type=float, default=0.4)
    gen.add_argument("--xs", type=_ints)
    gen.add_argument("--d", type=int)
    gen.add_argument("--t", type=int)
    gen.add_argument("--alpha-target", type=float, default=2.0)
    gen.add_argument("--k", type=int, default=2)
    gen.add_argument("--big", type=int, default=5, help="number of big voters (>= 2k)")
    gen.add_argument("--m", type=int, default=2)
    gen.set_defaults(func=cmd_generate)

    sol = sub.add_parser("solve", parents=[common], help="solve an instance")
    sol.add_argument("instance")
    sol.add_argument("--method", choices=["exact", "approx"], default="approx")
    sol.add_argument("--epsilon", type=float, default=0.25)
    sol.add_argument("--theoretical", action="store_true", help="use uncapped parameter formulas")
    sol.add_argument("--max-items", type=int, default=22)
    sol.add_argument("--no-timing", action="store_true", help="write runtime_ms as null (byte-stable output)")
    sol.set_defaults(func=cmd_solve)

    ver = sub.add_parser("verify", parents=[common], help="check a solution against its instance")
    ver.add_argument("instance")
    ver.add_argument("solution")
    ver.add_argument("--samples", type=int, default=20000)
    ver.set_defaults(func=cmd_verify)

    red = sub.add_parser("reduce", parents=[common], help="export the KU or MKU reformulation")
    red.add_argument("instance")
    red.add_argument("--target", choices=["ku", "mku"], required=True)
    red.add_argument("--alpha", type=int)
    red.add_argument("--j0", type=int)
    red.set_defaults(func=cmd_reduce)

    ben = sub.add_parser("bench", parents=[common], help="benchmark a directory of instances to CSV")
    ben.add_argument("directory")
    ben.add_argument("--methods", type=lambda s: [x for x in s.split(",") if x], default=["exact", "approx"])
    ben.add_argument("--epsilons", type=_floats, default=[0.25])
    ben.add_argument("--max-items", type=int, default=22)
    ben.add_argument("--theoretical", action="store_true")
    ben.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    log.setLevel(logging.WARNING if args.quiet else logging.INFO)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SizeLimitExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
