"""treexp command line: gen, compute, verify, bench."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import TreexpError
from .expectations import labeled_edge_marginals
from .graph import RootConstraint
from .instance import Instance, generate
from .quantities import (
    edge_marginals,
    expected_attachment,
    ge_objective,
    kl_divergence,
    lp_norm,
    partition,
    renyi_entropy,
    shannon_entropy,
)
from .verify import MAX_VERIFY_N, run_verify

QUANTITIES = ("z", "marginals", "entropy", "kl", "risk", "ge", "renyi", "lpnorm")
EXIT_OK, EXIT_INTERNAL, EXIT_DOMAIN = 0, 1, 2


class UsageError(TreexpError, ValueError):
    """A flag combination that makes no sense for the chosen quantity."""


def format_json(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {format_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(format_json(v) for v in obj) + "]"
    if isinstance(obj, (bool, type(None), str)):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    x = float(obj)
    return format(x, ".17g") if math.isfinite(x) else "null"


def _emit_error(kind: str, message: str, code: int) -> int:
    print(format_json({"error": kind, "message": message}))
    return code


# ---------------------------------------------------------------------------
# compute
# ---------------------------------------------------------------------------


def compute(inst: Instance, quantity: str, grad: bool = False, alpha: float | None = None,
            k: float | None = None, q_inst: Instance | None = None) -> dict:
    """The {value, gradient?} object ``compute`` prints."""
    g = inst.graph()
    if quantity == "z":
        res = partition(g, grad=grad)
    elif quantity == "marginals":
        if grad:
            raise UsageError("marginals have no --grad output")
        lg = inst.labeled_graph()
        value = labeled_edge_marginals(lg) if lg is not None else edge_marginals(g)
        return {"value": value}
    elif quantity == "entropy":
        res = shannon_entropy(g, grad=grad)
    elif quantity == "kl":
        q = q_inst.graph() if q_inst is not None else inst.q_graph()
        res = kl_divergence(g, q, grad=grad)
    elif quantity == "risk":
        res = expected_attachment(g, inst.gold_tree(), grad=grad)
    elif quantity == "ge":
        res = ge_objective(g, inst.ge_spec(), grad=grad)
    elif quantity in ("renyi", "lpnorm"):
        if grad:
            raise UsageError(f"{quantity} has no --grad output")
        if quantity == "renyi":
            if alpha is None:
                raise UsageError("renyi needs --alpha")
            return {"value": renyi_entropy(g, alpha)}
        if k is None:
            raise UsageError("lpnorm needs --k")
        return {"value": lp_norm(g, k)}
    else:
        raise UsageError(f"unknown quantity {quantity!r}")
    out = {"value": res.value}
    if grad:
        out["gradient"] = res.gradient
    return out


def cmd_compute(args) -> int:
    try:
        inst = Instance.load(args.inp)
        q_inst = Instance.load(args.q) if args.q else None
        result = compute(inst, args.quantity, args.grad, args.alpha, args.k, q_inst)
    except (TreexpError, OSError) as exc:
        kind = "IOError" if isinstance(exc, OSError) else type(exc).__name__
        return _emit_error(kind, str(exc), EXIT_DOMAIN)
    except Exception as exc:  # never crash raw
        return _emit_error("InternalError", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)
    print(format_json(result))
    return EXIT_OK


# ---------------------------------------------------------------------------
# gen / verify / bench
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    try:
        inst = generate(args.seed, args.n, RootConstraint(args.constraint))
        text = inst.dumps()
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    except (TreexpError, OSError) as exc:
        kind = "IOError" if isinstance(exc, OSError) else type(exc).__name__
        return _emit_error(kind, str(exc), EXIT_DOMAIN)
    return EXIT_OK


def cmd_verify(args) -> int:
    report = run_verify(args.max_n, args.trials, args.seed)
    for inst_seed, name, msg in report.failures:
        print(f"FAIL seed={inst_seed} property={name}: {msg}")
    print(f"passed {report.passed} failed {len(report.failures)}")
    return EXIT_OK if report.ok else EXIT_INTERNAL


def cmd_bench(args) -> int:
    from .bench import run_bench

    def progress(row):
        print(f"n={row.n} {row.algo}: {row.ms:.3f} ms", file=sys.stderr)

    try:
        result = run_bench(args.sizes, args.reps, args.seed, progress)
    except ValueError as exc:
        return _emit_error("UsageError", str(exc), EXIT_DOMAIN)
    text = result.to_csv()
    try:
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    except OSError as exc:
        return _emit_error("IOError", str(exc), EXIT_DOMAIN)
    return EXIT_OK


def _sizes(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None


def _max_n(text: str) -> int:
    n = int(text)
    if not 1 <= n <= MAX_VERIFY_N:
        raise argparse.ArgumentTypeError(f"--max-n must be in 1..{MAX_VERIFY_N} (enumeration bound)")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treexp", description="Expectations under spanning-tree distributions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a seeded random instance")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--constraint", choices=[c.value for c in RootConstraint], default="multi")
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("compute", help="compute a quantity on an instance file")
    p.add_argument("quantity", choices=QUANTITIES)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--grad", action="store_true")
    p.add_argument("--alpha", type=float)
    p.add_argument("--k", type=float)
    p.add_argument("--q", help="instance file whose weights define q (kl)")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("verify", help="randomised oracle and finite-difference checks")
    p.add_argument("--max-n", type=_max_n, default=4)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="timing comparison, CSV output")
    p.add_argument("--sizes", type=_sizes, default="8,16,32,64,128")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
