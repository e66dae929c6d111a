"""Command-line interface: ``partialcur {gen,approx,diagnose,sweep,bench}``.

Exit status: 0 on success, 1 on bad input, 2 when a sampling budget is too
small (rank-deficient sample, underdetermined core, or a sweep that found no
passing budget).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .curplus import CurPlusConfig, UnderdeterminedError, cur_plus
from .diagnostics import error_metrics, incoherence_mu_hat, incoherence_report
from .mmio import read_matrix, write_indices_json, write_matrix
from .sampling import sample_entries, sample_rows_cols
from .spectra import RankDeficientSampleError
from .synth import SpectrumSpec, gen_low_rank, gen_skewed

log = logging.getLogger("partialcur")

EXIT_OK, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _rows_out(rows: list[dict], fmt: str, path: str | None) -> None:
    if fmt == "json":
        _emit(json.dumps(rows, indent=2), path)
        return
    import csv
    import io

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else [], lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    _emit(buf.getvalue(), path)


def cmd_gen(args) -> int:
    if args.kind == "lowrank":
        M = gen_low_rank(args.n, args.m, args.rank, args.seed)
    else:
        spec = SpectrumSpec("power_decay", args.rank, args.decay, args.gap_ratio)
        M = gen_skewed(args.n, args.m, spec, args.seed)
    write_matrix(args.out, M)
    log.info("wrote %dx%d %s matrix to %s", args.n, args.m, args.kind, args.out)
    return EXIT_OK


def cmd_approx(args) -> int:
    M = read_matrix(args.input)
    n, m = M.shape
    config = CurPlusConfig(args.rank, args.d, args.omega, solver=args.solver, ridge=args.ridge)
    sel = sample_rows_cols(M, args.d, args.seed)
    obs = sample_entries(M, args.omega, args.seed)
    approx, report = cur_plus(sel, obs, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "U_hat.mtx", approx.U_hat)
    write_matrix(out / "Z.mtx", approx.Z)
    write_matrix(out / "V_hat.mtx", approx.V_hat)
    write_indices_json(out / "samples.json", col_indices=sel.col_indices, row_indices=sel.row_indices,
                       entry_rows=obs.rows, entry_cols=obs.cols)
    payload = {
        "n": n, "m": m, "r": args.rank, "d": args.d, "omega_size": args.omega, "seed": args.seed,
        "solve": report.to_dict(),
        "mu_hat": incoherence_mu_hat(approx.U_hat, approx.V_hat),
    }
    if args.rank < min(n, m):
        payload["errors"] = error_metrics(M, approx, args.rank).to_dict()
    (out / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
    _emit(json.dumps(payload, indent=2), None)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    M = read_matrix(args.input)
    eta = args.eta if args.eta == "auto" else float(args.eta)
    report = incoherence_report(M, args.rank, eta)
    _emit(json.dumps(report.to_dict(), indent=2), args.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    results = harness.sweep_minimal_budgets(
        args.n, args.rank, args.seed, trials=args.trials, threshold=args.threshold, threads=args.threads
    )
    rows = [{k: v for k, v in r.to_dict().items() if not k.endswith("_evaluations")} for r in results]
    _rows_out(rows, args.out_format, args.output)
    return EXIT_OK if all(r.found for r in results) else EXIT_BUDGET


def cmd_bench(args) -> int:
    if args.input:
        M = read_matrix(args.input)
    else:
        M = gen_skewed(args.n, args.m, SpectrumSpec("power_decay", max(args.rank), args.decay), args.seed)
    methods = harness.METHODS if args.method == "all" else (args.method,)
    seeds = [harness.trial_seed(args.seed, k) for k in range(args.trials)]
    records = harness.bench_baselines(
        M, args.rank, alphas=args.alphas, omega_policy=args.omega_policy, seeds=seeds,
        methods=methods, omega_multipliers=args.omega_multipliers, fixed_alpha=args.fixed_alpha,
        threads=args.threads,
    )
    if not args.raw:
        records = harness.summarize(records)
    text = harness.records_to_json(records) if args.out_format == "json" else harness.records_to_csv(records)
    _emit(text, args.output)
    return EXIT_OK


def _common(suppress: bool) -> argparse.ArgumentParser:
    # Subparsers use SUPPRESS so a flag given before the subcommand survives.
    def default(value):
        return argparse.SUPPRESS if suppress else value

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=default(0), help="64-bit master seed")
    common.add_argument("--threads", type=int, default=default(1))
    common.add_argument("--out-format", choices=("csv", "json"), default=default("csv"))
    common.add_argument("--config", default=default(None), help="JSON file of option defaults")
    common.add_argument("-v", "--verbose", action="store_true", default=default(False))
    return common


def build_parser():
    parser = argparse.ArgumentParser(prog="partialcur", parents=[_common(False)],
                                     description=__doc__.splitlines()[0])
    common = _common(True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic matrix")
    p.add_argument("--kind", choices=("lowrank", "skewed"), default="lowrank")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--decay", type=float, default=2.0)
    p.add_argument("--gap-ratio", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("approx", parents=[common], help="run CUR+ on a matrix file")
    p.add_argument("--input", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--omega", type=int, required=True)
    p.add_argument("--solver", choices=("auto", "direct", "cg"), default="auto")
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("diagnose", parents=[common], help="incoherence and numerical rank report")
    p.add_argument("--input", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--eta", default="auto")
    p.add_argument("--output")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("sweep", parents=[common], help="minimal d and |Omega| for exact recovery")
    p.add_argument("--n", type=_int_list, default=[500])
    p.add_argument("--rank", type=_int_list, default=[5, 10, 15, 20])
    p.add_argument("--trials", type=int, default=harness.TRIALS_PER_POINT)
    p.add_argument("--threshold", type=float, default=harness.RECOVERY_THRESHOLD)
    p.add_argument("--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", parents=[common], help="compare CUR+ with CUR-F and CUR-E")
    p.add_argument("--input")
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--m", type=int, default=300)
    p.add_argument("--decay", type=float, default=2.0)
    p.add_argument("--rank", type=_int_list, default=[10])
    p.add_argument("--alphas", type=_float_list, default=[1, 2, 3, 4, 5])
    p.add_argument("--omega-policy", choices=("fixed", "cubic", "vary"), default="fixed")
    p.add_argument("--omega-multipliers", type=_float_list, default=[1, 2, 3, 4, 5])
    p.add_argument("--fixed-alpha", type=float, default=5)
    p.add_argument("--method", choices=("curplus", "cur-f", "cur-e", "all"), default="all")
    p.add_argument("--trials", type=int, default=harness.TRIALS_PER_POINT)
    p.add_argument("--raw", action="store_true", help="one row per trial instead of means")
    p.add_argument("--output")
    p.set_defaults(func=cmd_bench)
    return parser, sub


def parse_args(argv=None):
    """Parse ``argv``; options missing from the command line are taken from
    ``--config`` when it is given."""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, sub = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
        actions = {}
        for p in (parser, sub.choices[args.command]):
            for action in p._actions:
                actions.setdefault(action.dest, set()).update(action.option_strings)
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if dest not in actions:
                raise ValueError(f"unknown config option {key!r}")
            given = any(tok == opt or tok.startswith(opt + "=") for tok in argv for opt in actions[dest])
            if not given:
                setattr(args, dest, value)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (RankDeficientSampleError, UnderdeterminedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
