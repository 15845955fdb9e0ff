"""Command-line front end.

Subcommands: `test` runs one sequential verification and exits by its
verdict; `table1`, `table2`, and `tuning` write rejection-rate CSVs;
`rjmcmc` runs both tests on one cell of the trans-dimensional grid and
writes a JSON report plus histogram CSVs.

Exit codes: 0 the sequential verdict is OK (or a study completed), 1 a
verdict is FAIL, 2 usage or configuration error.  OK/FAIL comes from the
sequential verdict alone.

Flags can be preloaded from a JSON file via --config; explicitly given
flags win over file values.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__, gaussian, harness, report
from .exact import RankConfig, TwoSampleConfig
from .rng import RngStream
from .sequential import SequentialConfig

_SEQ_DEFAULTS = {"alpha": 1e-5, "k": 7, "delta": 4.0}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="mcverify",
        description="Statistical unit tests for MCMC and Monte Carlo samplers.",
    )
    parser.add_argument("--version", action="version", version=f"mcverify {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads; results do not depend on it")
        p.add_argument("--out", default=None, help="output file path")
        p.add_argument("--alpha", type=float, default=None,
                       help="overall false-rejection bound")
        p.add_argument("--k", type=int, default=None, help="max sequential iterations")
        p.add_argument("--delta", type=float, default=None,
                       help="sample-size growth factor")
        p.add_argument("--reps", type=int, default=None,
                       help="replications (study runs, or first-iteration size for test/rjmcmc)")
        p.add_argument("--paper-scale", action="store_true",
                       help="use publication replication counts (10^4 study runs)")
        p.add_argument("--config", default=None,
                       help="JSON file of flag defaults; explicit flags win")

    p = sub.add_parser("test", help="run one sequential verification")
    common(p)
    p.add_argument("--model", required=True, choices=("gaussian", "rjmcmc"))
    p.add_argument("--variant", required=True,
                   help="scenario name, e.g. correct-random-scan or erroneous-truncated")
    p.add_argument("--test", default="two-sample", choices=("two-sample", "rank"),
                   dest="test_kind")
    p.add_argument("--L", type=int, default=None, help="chain length per replication")
    p.add_argument("--n1", type=int, default=None, help="two-sample chain count")
    p.add_argument("--n2", type=int, default=None, help="two-sample direct-draw count")
    p.add_argument("--thin", type=int, default=None, help="rank-test thinning")
    p.add_argument("--gibbs-extension", action="store_true",
                   help="resample data after each two-sample chain step")
    p.add_argument("--joint-update-prob", type=float, default=0.0,
                   help="per-step data-refresh probability in the rank test")

    p = sub.add_parser("table1", help="seeded-defect rejection-rate table (CSV)")
    common(p)
    p.add_argument("--scenario", action="append", default=None,
                   help="restrict to a scenario (repeatable)")
    p.add_argument("--function", action="append", default=None,
                   help="restrict to a test-function row (repeatable)")

    p = sub.add_parser("table2", help="assumed-prior mismatch table (CSV)")
    common(p)
    p.add_argument("--scenario", action="append", default=None)
    p.add_argument("--function", action="append", default=None)

    p = sub.add_parser("tuning", help="sequential-parameter tuning study (CSV)")
    common(p)
    p.add_argument("--n-ref", type=int, default=10_000,
                   help="effort reference: sample size of the non-sequential test")

    p = sub.add_parser("rjmcmc", help="trans-dimensional sampler check (JSON + CSV)")
    common(p)
    p.add_argument("--prior", default="truncated", choices=("truncated", "accelerated"))
    p.add_argument("--ratio", default="corrected", choices=("corrected", "erroneous"))
    p.add_argument("--L", type=int, default=None, help="two-sample chain length")
    p.add_argument("--rank-L", type=int, default=None, help="rank-test chain length")
    p.add_argument("--thin", type=int, default=None, help="rank-test thinning")
    p.add_argument("--k-dist-n", type=int, default=500,
                   help="replications behind the reported k distributions")
    return parser


def _apply_config_file(args):
    """Fill still-unset flags from the JSON config file, if any."""
    if not args.config:
        return
    with open(args.config, encoding="utf-8") as fh:
        values = json.load(fh)
    if not isinstance(values, dict):
        raise ValueError(f"config file {args.config} must hold a JSON object")
    for key, value in values.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise ValueError(f"config key {key!r} is not a flag of {args.command!r}")
        if getattr(args, dest) in (None, False):
            setattr(args, dest, value)


def _seq_config(args, defaults, n0):
    merged = dict(defaults)
    for key in ("alpha", "k", "delta"):
        value = getattr(args, key)
        if value is not None:
            merged[key] = value
    return SequentialConfig(alpha=merged["alpha"], k=merged["k"],
                            delta=merged["delta"], n0=n0)


def _study_runs(args, desk_default=500):
    if args.reps is not None:
        return args.reps
    return 10_000 if args.paper_scale else desk_default


def _echo(args, keys):
    return {key: getattr(args, key) for key in keys}


def cmd_test(args):
    seed = args.seed or 0
    if args.model == "gaussian":
        case = harness.build_gaussian_case(args.variant)
        model, kernel = case.model, case.kernel
        tfs, rankings = case.test_functions, case.rankings
        allow = case.allow_nonreversible
        defaults = {"L": 5, "n1": 500, "thin": 1, "reps": 500}
    else:
        params = harness.build_rjmcmc_case(args.variant)
        from . import rjmcmc
        model, kernel = rjmcmc.sinusoid_model(params), rjmcmc.rj_kernel(params)
        tfs, rankings = rjmcmc.default_test_functions(), rjmcmc.default_rankings()
        allow = False
        defaults = {"L": 100 if args.test_kind == "two-sample" else 10,
                    "n1": 1000, "thin": 10, "reps": 1000}
    L = args.L if args.L is not None else defaults["L"]
    thin = args.thin if args.thin is not None else defaults["thin"]

    start = time.perf_counter()
    if args.test_kind == "two-sample":
        n1 = args.n1 if args.n1 is not None else defaults["n1"]
        n2 = args.n2 if args.n2 is not None else n1
        seq = _seq_config(args, _SEQ_DEFAULTS, n0=n1)
        cfg = TwoSampleConfig(L=L, N1=n1, N2=n2,
                              gibbs_extension=args.gibbs_extension,
                              test_functions=tfs)
        verdict = harness.seq_two_sample(
            model, kernel, cfg, seq, RngStream(seed, 0), args.threads
        )
        size_echo = {"L": L, "n1": n1, "n2": n2, "gibbs_extension": args.gibbs_extension}
    else:
        reps = args.reps if args.reps is not None else defaults["reps"]
        seq = _seq_config(args, _SEQ_DEFAULTS, n0=reps)
        cfg = RankConfig(L=L, n_reps=reps, thinning=thin, rankings=rankings,
                         joint_update_prob=args.joint_update_prob)
        verdict = harness.seq_rank(
            model, kernel, cfg, seq, RngStream(seed, 0), args.threads,
            allow_nonreversible=allow,
        )
        size_echo = {"L": L, "reps": reps, "thin": thin,
                     "joint_update_prob": args.joint_update_prob}

    payload = {
        "command": "test",
        "version": __version__,
        "backend": gaussian.BACKEND,
        "config": {
            "model": args.model,
            "variant": args.variant,
            "test": args.test_kind,
            "alpha": seq.alpha,
            "k": seq.k,
            "delta": seq.delta,
            "seed": seed,
            "threads": args.threads,
            **size_echo,
        },
        "verdict": report.verdict_payload(verdict),
        "wall_clock_s": time.perf_counter() - start,
    }
    text = report.render_json(payload)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"{verdict.status}: report written to {args.out}")
    else:
        sys.stdout.write(text)
    return 0 if verdict.status == "OK" else 1


def _cmd_table(args, which):
    runs = _study_runs(args)
    driver = harness.table1_cells if which == "table1" else harness.table2_cells
    kwargs = {}
    for key in ("alpha", "k", "delta"):
        if getattr(args, key) is not None:
            kwargs[key] = getattr(args, key)
    cells = driver(
        runs, seed=args.seed or 0, threads=args.threads,
        scenarios=args.scenario, functions=args.function, **kwargs,
    )
    out = args.out or f"{which}.csv"
    report.write_csv(out, report.TABLE_HEADER, report.table_rows(cells))
    print(f"{len(cells)} cells x {runs} runs written to {out}")
    return 0


def cmd_tuning(args):
    runs = _study_runs(args)
    cells = harness.tuning_cells(runs, seed=args.seed or 0, n_ref=args.n_ref)
    out = args.out or "tuning.csv"
    report.write_csv(out, report.TUNING_HEADER, report.tuning_rows(cells))
    print(f"{len(cells)} cells x {runs} runs written to {out}")
    return 0


def cmd_rjmcmc(args):
    variant = f"{args.ratio}-{args.prior}"
    n0 = args.reps if args.reps is not None else 1000
    seq_kwargs = dict(_SEQ_DEFAULTS)
    for key in ("alpha", "k", "delta"):
        if getattr(args, key) is not None:
            seq_kwargs[key] = getattr(args, key)
    seq = SequentialConfig(alpha=seq_kwargs["alpha"], k=seq_kwargs["k"],
                           delta=seq_kwargs["delta"], n0=n0)
    start = time.perf_counter()
    cell = harness.rjmcmc_cell(
        variant,
        seed=args.seed or 0,
        threads=args.threads,
        seq=seq,
        rank_L=args.rank_L if args.rank_L is not None else 10,
        rank_thin=args.thin if args.thin is not None else 10,
        two_sample_L=args.L if args.L is not None else 100,
        n0=n0,
        k_dist_n=args.k_dist_n,
    )
    out = Path(args.out or "rjmcmc.json")
    payload = {
        "command": "rjmcmc",
        "version": __version__,
        "config": {
            "variant": variant,
            "alpha": seq.alpha,
            "k": seq.k,
            "delta": seq.delta,
            "n0": n0,
            "two_sample_L": args.L if args.L is not None else 100,
            "rank_L": args.rank_L if args.rank_L is not None else 10,
            "thin": args.thin if args.thin is not None else 10,
            "seed": args.seed or 0,
            "threads": args.threads,
        },
        "status": cell.status,
        "rank_verdict": report.verdict_payload(cell.rank_verdict),
        "two_sample_verdict": report.verdict_payload(cell.two_sample_verdict),
        "first_rank_p": cell.first_rank_p,
        "rank_histogram": list(cell.rank_histogram),
        "k_fitted": list(cell.k_fitted),
        "k_direct": list(cell.k_direct),
        "wall_clock_s": time.perf_counter() - start,
    }
    report.write_json(out, payload)
    ranks_csv = out.with_name(out.stem + "-ranks.csv")
    report.write_csv(
        ranks_csv, ("rank", "count"),
        [(i + 1, c) for i, c in enumerate(cell.rank_histogram)],
    )
    kdist_csv = out.with_name(out.stem + "-kdist.csv")
    report.write_csv(
        kdist_csv, ("k", "fitted", "direct"),
        [(i, f, d) for i, (f, d) in enumerate(zip(cell.k_fitted, cell.k_direct))],
    )
    print(f"{cell.status}: {variant} (rank {cell.rank_verdict.status}, "
          f"two-sample {cell.two_sample_verdict.status}); report {out}, "
          f"histograms {ranks_csv}, {kdist_csv}")
    return 0 if cell.status == "OK" else 1


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help/--version
        return int(exc.code or 0)
    try:
        _apply_config_file(args)
        if args.command == "test":
            return cmd_test(args)
        if args.command == "table1":
            return _cmd_table(args, "table1")
        if args.command == "table2":
            return _cmd_table(args, "table2")
        if args.command == "tuning":
            return cmd_tuning(args)
        return cmd_rjmcmc(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"mcverify: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
