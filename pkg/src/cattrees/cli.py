"""Command-line interface.

Subcommands: fit, test, confidence, gap, simulate, benchmark. JSON files are
the canonical machine output (sorted keys, two-space indent); stdout carries a
short human-readable summary; DOT output is opt-in. Every seeded invocation is
byte-deterministic, including across thread counts.

Exit codes: 0 success (or test acceptance), 1 statistical rejection, 2
usage or data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .arborescence import EdgeConstraintSet, min_arborescence, tree_to_dot, tree_to_json
from .data import load_csv, save_csv, split, standardize
from .entropy import EntropyConfig
from .gap import bivariate_gap_test, empirical_gap, gap_report_to_json
from .inference import (
    confidence_intervals,
    confidence_report_to_json,
    moment_summaries,
    test_many,
    test_report_to_json,
)
from .simulate import (
    BenchmarkGrid,
    PRESETS,
    benchmark_rows_to_csv,
    gen_tree_type1,
    gen_tree_type2,
    preset_spec,
    random_scm,
    run_benchmark,
    sample_scm,
    scm_truth_json,
)
from .smoother import SmootherConfig
from .weights import weight_matrix, weight_matrix_to_json

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_ERROR = 2


class CliError(Exception):
    pass


def _write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("CAT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"CAT_THREADS must be an integer, got {env!r}")
    return 1


def _smoother_cfg(args) -> SmootherConfig:
    bw = args.bandwidth
    if bw != "auto":
        try:
            bw = float(bw)
        except ValueError:
            raise CliError(f"--bandwidth must be a positive number or 'auto', got {bw!r}")
    return SmootherConfig(backend=args.smoother, bandwidth_or_penalty=bw, cv_folds=args.cv_folds)


def _entropy_cfg(args) -> EntropyConfig:
    return EntropyConfig(k=args.entropy_k)


def _load(args):
    d = load_csv(args.input, has_header=not args.no_header)
    if args.standardize:
        d = standardize(d)
    return d


def _alpha(args) -> float:
    if not 0.0 < args.alpha < 1.0:
        raise CliError(f"--alpha must lie in (0, 1), got {args.alpha}")
    return args.alpha


def parse_constraint(text: str, names) -> tuple:
    """One constraint token: 'A->B' requires the edge, 'A-x>B' forbids it,
    'root:A' forces the root. Returns ('required'|'forbidden'|'root', value).
    """
    idx = {nm: i for i, nm in enumerate(names)}

    def node(nm):
        nm = nm.strip()
        if nm not in idx:
            raise CliError(f"unknown node {nm!r} in constraint {text!r}; columns: {names}")
        return idx[nm]

    if text.startswith("root:"):
        return "root", node(text[len("root:"):])
    if "-x>" in text:
        a, b = text.split("-x>", 1)
        return "forbidden", (node(a), node(b))
    if "->" in text:
        a, b = text.split("->", 1)
        return "required", (node(a), node(b))
    raise CliError(f"cannot parse constraint {text!r} (use 'A->B', 'A-x>B' or 'root:A')")


def parse_constraints(tokens, names) -> EdgeConstraintSet:
    required, forbidden, root = set(), set(), None
    for tok in tokens:
        kind, val = parse_constraint(tok, names)
        if kind == "required":
            required.add(val)
        elif kind == "forbidden":
            forbidden.add(val)
        else:
            if root is not None and root != val:
                raise CliError("conflicting root constraints")
            root = val
    try:
        return EdgeConstraintSet(frozenset(required), frozenset(forbidden), root)
    except ValueError as exc:
        raise CliError(f"invalid constraint set: {exc}")


def _split_weights(args, d, kind, threads):
    if not 0.0 < args.split_fraction < 1.0:
        raise CliError(f"--split-fraction must lie in (0, 1), got {args.split_fraction}")
    sd = split(d, args.split_fraction, args.seed)
    return weight_matrix(sd, kind=kind, smoother_cfg=_smoother_cfg(args),
                         entropy_cfg=_entropy_cfg(args), threads=threads)


def cmd_fit(args) -> int:
    d = _load(args)
    if args.split:
        w = _split_weights(args, d, args.score, _threads(args))
    else:
        w = weight_matrix(d, kind=args.score, smoother_cfg=_smoother_cfg(args),
                          entropy_cfg=_entropy_cfg(args), threads=_threads(args))
    tree, total = min_arborescence(w)
    obj = tree_to_json(tree, d.columns)
    obj["total"] = total
    obj["score"] = args.score
    if args.out:
        _write_json(obj, args.out)
    if args.weights_out:
        _write_json(weight_matrix_to_json(w), args.weights_out)
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(tree_to_dot(tree, d.columns))
    print(f"root: {d.columns[tree.root]}")
    for j, i in tree.edges():
        print(f"  {d.columns[j]} -> {d.columns[i]}  (w={w.matrix[j, i]:.6g})")
    print(f"total {args.score} score: {total:.6g}")
    return EXIT_OK


def cmd_test(args) -> int:
    alpha = _alpha(args)
    d = _load(args)
    w = _split_weights(args, d, "gaussian", _threads(args))
    cr = confidence_intervals(moment_summaries(w), alpha)
    constraint = parse_constraints(args.constraints, d.columns)
    report = test_many(cr, [constraint])[0]
    obj = test_report_to_json(report, d.columns)
    if args.out:
        _write_json(obj, args.out)
    print(json.dumps(obj, indent=2, sort_keys=True))
    return EXIT_REJECT if report.reject else EXIT_OK


def cmd_confidence(args) -> int:
    alpha = _alpha(args)
    d = _load(args)
    w = _split_weights(args, d, "gaussian", _threads(args))
    cr = confidence_intervals(moment_summaries(w), alpha)
    obj = confidence_report_to_json(cr)
    if args.out:
        _write_json(obj, args.out)
    print(f"alpha={cr.alpha} z={cr.z:.6g} n={cr.n}")
    for e in obj["edges"]:
        print(f"  {e['from']} -> {e['to']}: w={e['w']:.6g} in [{e['lo']:.6g}, {e['hi']:.6g}]")
    return EXIT_OK


def cmd_gap(args) -> int:
    d = _load(args)
    if args.bivariate:
        xname, yname = args.bivariate
        x = d.column(d.column_index(xname))
        y = d.column(d.column_index(yname))
        gap, pval = bivariate_gap_test(
            x, y, _smoother_cfg(args), _entropy_cfg(args),
            permutations=args.permutations, seed=args.seed,
        )
        obj = {"x": xname, "y": yname, "bivariate_gap": float(gap),
               "permutation_p_value": float(pval), "permutations": args.permutations}
        if args.out:
            _write_json(obj, args.out)
        print(json.dumps(obj, indent=2, sort_keys=True))
        return EXIT_OK
    w = weight_matrix(d, kind=args.score, smoother_cfg=_smoother_cfg(args),
                      entropy_cfg=_entropy_cfg(args), threads=_threads(args))
    report = empirical_gap(w)
    obj = gap_report_to_json(report)
    if args.out:
        _write_json(obj, args.out)
    print(json.dumps(obj, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.preset:
        spec = preset_spec(args.preset, seed=args.seed)
    else:
        gen = gen_tree_type1 if args.tree_type == 1 else gen_tree_type2
        sq = np.random.SeedSequence(args.seed)
        tree_seed, scm_seed = (int(s) for s in sq.generate_state(2))
        tree = gen(args.p, seed=tree_seed)
        spec = random_scm(tree, alpha=args.alpha_shape, seed=scm_seed)
    data = sample_scm(spec, args.n)
    save_csv(data, args.out)
    if args.truth_out:
        _write_json(scm_truth_json(spec), args.truth_out)
    if args.dot:
        from .arborescence import tree_to_dot as _dot

        with open(args.dot, "w") as fh:
            fh.write(_dot(spec.tree, list(spec.columns)))
    print(f"wrote {data.n} rows x {data.p} cols to {args.out}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    def int_list(s):
        return tuple(int(v) for v in str(s).split(","))

    def float_list(s):
        return tuple(float(v) for v in str(s).split(","))

    grid = BenchmarkGrid(
        p=int_list(args.p),
        n=int_list(args.n),
        tree_type=int_list(args.tree_type),
        alpha=float_list(args.alpha_shape),
        scores=tuple(args.score.split(",")),
        reps=args.reps,
    )
    rows, summary = run_benchmark(
        grid, seed=args.seed, smoother_cfg=_smoother_cfg(args),
        entropy_cfg=_entropy_cfg(args), threads=_threads(args),
    )
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(benchmark_rows_to_csv(rows))
    if args.summary_out:
        _write_json(summary, args.summary_out)
    for entry in summary:
        med = entry.get("shd_median")
        med_txt = "n/a" if med is None else f"{med:g}"
        print(
            f"p={entry['p']} n={entry['n']} type={entry['tree_type']} "
            f"alpha={entry['alpha']:g} score={entry['score']}: "
            f"median shd {med_txt} (ok {entry['reps_ok']}, failed {entry['reps_failed']})"
        )
    return EXIT_OK


def _add_common(sp, seed_default=0):
    sp.add_argument("--seed", type=int, default=seed_default)
    sp.add_argument("--threads", type=int, default=None,
                    help="parallel workers (default: CAT_THREADS env var or 1)")
    sp.add_argument("--smoother", default="local-linear-kernel",
                    choices=["local-linear-kernel", "penalized-cubic-spline"])
    sp.add_argument("--bandwidth", default="auto",
                    help="explicit bandwidth/penalty, or 'auto' for CV")
    sp.add_argument("--cv-folds", type=int, default=10)
    sp.add_argument("--entropy-k", type=int, default=3)


def _add_input(sp):
    sp.add_argument("--input", required=True, help="CSV file of observations")
    sp.add_argument("--no-header", action="store_true")
    sp.add_argument("--standardize", action="store_true",
                    help="rescale columns to unit variance (off by default)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cattrees",
                                 description="Causal directed-tree learning from additive-noise data")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("fit", help="estimate the causal tree")
    _add_input(sp)
    _add_common(sp)
    sp.add_argument("--score", default="gaussian", choices=["gaussian", "entropy"])
    sp.add_argument("--split", action="store_true",
                    help="train smoothers on a held-out half (inference regime)")
    sp.add_argument("--split-fraction", type=float, default=0.5)
    sp.add_argument("--out", help="tree JSON path")
    sp.add_argument("--weights-out", help="weight matrix JSON path")
    sp.add_argument("--dot", help="DOT output path")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("test", help="test a substructure hypothesis")
    _add_input(sp)
    _add_common(sp)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--split-fraction", type=float, default=0.5)
    sp.add_argument("--constraint", dest="constraints", action="append", default=[],
                    metavar="SPEC", help="'A->B' require, 'A-x>B' forbid, 'root:A'; repeatable")
    sp.add_argument("--out", help="test report JSON path")
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("confidence", help="simultaneous edge-weight intervals")
    _add_input(sp)
    _add_common(sp)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--split-fraction", type=float, default=0.5)
    sp.add_argument("--out", help="confidence report JSON path")
    sp.set_defaults(func=cmd_confidence)

    sp = sub.add_parser("gap", help="identifiability-gap diagnostics")
    _add_input(sp)
    _add_common(sp)
    sp.add_argument("--score", default="entropy", choices=["gaussian", "entropy"])
    sp.add_argument("--bivariate", nargs=2, metavar=("X", "Y"),
                    help="bivariate gap + permutation p-value for two columns")
    sp.add_argument("--permutations", type=int, default=200)
    sp.add_argument("--out", help="gap report JSON path")
    sp.set_defaults(func=cmd_gap)

    sp = sub.add_parser("simulate", help="draw a synthetic dataset")
    _add_common(sp)
    sp.add_argument("--preset", choices=sorted(PRESETS))
    sp.add_argument("--tree-type", type=int, default=1, choices=[1, 2])
    sp.add_argument("--p", type=int, default=8)
    sp.add_argument("--alpha-shape", type=float, default=1.0,
                    help="noise shape parameter (1 = Gaussian)")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--out", required=True, help="CSV output path")
    sp.add_argument("--truth-out", help="ground-truth tree JSON path")
    sp.add_argument("--dot", help="ground-truth DOT path")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("benchmark", help="run a recovery benchmark grid")
    _add_common(sp)
    sp.add_argument("--p", default="16")
    sp.add_argument("--n", default="50,500")
    sp.add_argument("--tree-type", default="1")
    sp.add_argument("--alpha-shape", default="1.0")
    sp.add_argument("--score", default="gaussian")
    sp.add_argument("--reps", type=int, default=10)
    sp.add_argument("--out", help="per-rep CSV path")
    sp.add_argument("--summary-out", help="summary JSON path")
    sp.set_defaults(func=cmd_benchmark)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
