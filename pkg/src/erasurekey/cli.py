"""Command-line entry points.

Subcommands: `simulate` runs one experiment and prints its quality report
as JSON; `sweep-efficiency` and `placement-sweep` emit CSV (and optionally
a rendered figure); `exchange-solve` solves a data-exchange instance;
`selftest` runs the exhaustive small-round secrecy oracles.

Exit codes: 0 success, 2 invalid configuration, 3 infeasible or failed
computation.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from erasurekey import harness
from erasurekey.exchange import (ExchangeInstance, InfeasibleExchangeError,
                                 solve_exchange, verify_plan_decodable)
from erasurekey.harness import ConfigError, ExperimentConfig
from erasurekey.secrecy import concentration_sweep


def _print_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True, indent=2))


def _load_config(args) -> ExperimentConfig:
    with open(args.config, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    for override in args.set or []:
        key, _, value = override.partition("=")
        if not _:
            raise ConfigError(f"override {override!r} is not key=value")
        obj[key] = json.loads(value)
    return ExperimentConfig.from_jsonable(obj)


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    trace: dict | None = {} if args.trace else None
    if cfg.protocol == "basic":
        report, state = harness.run_basic_experiment(cfg, trace=trace)
        receptions = [state.reception] if state is not None else []
    elif cfg.protocol == "adapted":
        report, state = harness.run_adapted_experiment(cfg, trace=trace)
        receptions = [t.reception for t in state.turns] if state is not None else []
    else:
        raise ConfigError("simulate needs a runnable protocol, not formula-only")
    _print_json(report.to_jsonable())
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            json.dump(trace, fh, sort_keys=True)
            fh.write("\n")
    if args.reception_csv:
        if not receptions:
            raise ConfigError("reception traces need a full-mode run")
        from erasurekey.channel import reception_csv_rows
        rows = [row for rec in receptions for row in reception_csv_rows(rec)]
        harness.write_csv(args.reception_csv, "reception",
                          ["transmitter", "packet_index", "receiver", "received_flag"],
                          rows)
    if args.state:
        _advance_state(args.state, report)
    return 0


def _advance_state(path: str, report) -> None:
    """Persist the key ledger chain across rounds of one experiment run."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            state = json.load(fh)
    except FileNotFoundError:
        state = {"rounds": 0, "digests": []}
    state["rounds"] += 1
    if report.secret_digest:
        state["digests"].append(report.secret_digest)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(state, fh, sort_keys=True)
        fh.write("\n")


def _parse_values(text: str) -> list[float]:
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(x) for x in text.split(",")]


def cmd_sweep_efficiency(args) -> int:
    ns = [int(x) for x in args.n.split(",")]
    deltas = _parse_values(args.deltas)
    rows = harness.sweep_efficiency(ns, deltas, n_source=args.N, trials=args.trials,
                                    seed=args.seed, measure=not args.formula_only)
    harness.write_csv(args.out, "efficiency", harness.EFFICIENCY_COLUMNS, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    if args.figure:
        from erasurekey import figures
        print(f"wrote {figures.render_efficiency(rows, args.figure)}")
    return 0


def cmd_placement_sweep(args) -> int:
    ns = [int(x) for x in args.n.split(",")]
    all_rows, summaries = [], []
    for n in ns:
        rows, summary = harness.placement_sweep(
            n, n_source=args.N, epsilon=args.epsilon, seed=args.seed,
            alpha=args.alpha, labeled=args.labeled)
        all_rows.extend(rows)
        summaries.append(summary)
    harness.write_csv(args.out, "placements", harness.PLACEMENT_COLUMNS, all_rows)
    summary_path = args.summary or (args.out.rsplit(".", 1)[0] + "-summary.csv")
    harness.write_csv(summary_path, "placement-summary",
                      harness.PLACEMENT_SUMMARY_COLUMNS, summaries)
    print(f"wrote {len(all_rows)} rows to {args.out}")
    print(f"wrote {len(summaries)} summary rows to {summary_path}")
    if args.figure:
        from erasurekey import figures
        print(f"wrote {figures.render_placements(summaries, args.figure)}")
    return 0


def cmd_concentration(args) -> int:
    sizes = [int(x) for x in args.sizes.split(",")]
    rows = concentration_sweep(n=args.n, delta=args.delta, delta_eve=args.delta_eve,
                               sizes=sizes, trials=args.trials, seed=args.seed)
    columns = ["n_source", "trials", "mean_secret_ratio", "std_secret_ratio",
               "mean_mixed_ratio", "std_mixed_ratio"]
    harness.write_csv(args.out, "concentration", columns, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    if args.figure:
        from erasurekey import figures
        print(f"wrote {figures.render_concentration(rows, args.figure)}")
    return 0


def cmd_exchange_solve(args) -> int:
    with open(args.instance, "r", encoding="utf-8") as fh:
        inst = ExchangeInstance.from_jsonable(json.load(fh))
    plan = solve_exchange(inst)
    result = plan.to_jsonable()
    result["decodable"] = verify_plan_decodable(inst, plan, field_order=args.field_order)
    _print_json(result)
    return 0


def cmd_selftest(args) -> int:
    import itertools

    from erasurekey.basic import BasicConfig, run_initial_phase, run_reconciliation
    from erasurekey.channel import EVE, ManualChannel, ReceptionRecord
    from erasurekey.exchange import brute_force_exchange
    from erasurekey.field import extend_basis, get_field, mds_generator

    failures = 0

    def check(name: str, ok: bool) -> None:
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    # exhaustive mixing secrecy: for every round size and every eavesdropper
    # subset, the MDS rows stay independent of the overheard unit rows
    gf = get_field(8)
    ok = True
    for n in range(1, args.max_round + 1):
        for n_eve in range(0, n):
            gen = mds_generator(gf, n, n - n_eve)
            for subset in itertools.combinations(range(n), n_eve):
                rows = np.zeros((n_eve, n), dtype=gf.dtype)
                for r, c in enumerate(subset):
                    rows[r, c] = 1
                stacked = np.vstack([gen, rows]) if n_eve else gen
                if gf.rank(stacked) - n_eve != n - n_eve:
                    ok = False
    check(f"exhaustive mixing secrecy, round sizes 1..{args.max_round}", ok)

    # basis extension always completes a random full-rank public matrix
    rng = np.random.default_rng(20)
    ok = True
    for _ in range(300):
        m = int(rng.integers(1, 14))
        low = int(rng.integers(0, m))
        while True:
            a_z = gf.random_matrix(low, m, rng)
            if gf.rank(a_z) == low:
                break
        a_s = extend_basis(gf, a_z, m)
        if gf.rank(np.vstack([a_s, a_z]) if low else a_s) != m:
            ok = False
    check("basis extension reaches full rank, 300 random instances", ok)

    # exchange solver equals brute force on random instances
    ok = True
    for trial in range(80):
        n = int(rng.integers(2, 6))
        m = int(rng.integers(1, 7))
        known = [frozenset(int(p) for p in np.nonzero(rng.random(m) < 0.6)[0])
                 for _ in range(n)]
        missing = set(range(m)) - set().union(*known)
        if missing:
            known[0] = frozenset(set(known[0]) | missing)
        inst = ExchangeInstance(n, m, known)
        if solve_exchange(inst).counts != brute_force_exchange(inst).counts:
            ok = False
    check("exchange solver matches brute force, 80 random instances", ok)

    # worked-example replay
    record = ReceptionRecord(0, 10, {1: np.array([0, 2, 4, 6, 8]),
                                     EVE: np.array([0, 2, 4, 5, 7, 9])})
    cfg = BasicConfig(n=2, n_source=10, delta_eve=0.4, packet_symbols=4, field_order=8)
    state = run_initial_phase(cfg, ManualChannel([record]), np.random.default_rng(1))
    bundle = run_reconciliation(state)
    check("worked-example replay: two secret packets at efficiency 0.2",
          bundle.secret_packets == 2 and state.transcript.source_packets == 10)

    print("selftest:", "all passed" if failures == 0 else f"{failures} check(s) failed")
    return 0 if failures == 0 else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erasurekey",
                                     description="group secret agreement over erasure broadcast channels")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one experiment, print its quality report as JSON")
    p.add_argument("--config", required=True, help="experiment config JSON file")
    p.add_argument("--set", action="append", metavar="KEY=JSON",
                   help="override a config field (value parsed as JSON)")
    p.add_argument("--trace", help="write the full round trace JSON here")
    p.add_argument("--reception-csv", dest="reception_csv",
                   help="write per-packet reception rows to this CSV")
    p.add_argument("--state", help="experiment-state file persisting across rounds")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep-efficiency", help="formula vs measured efficiency curves")
    p.add_argument("--n", default="2,4,8", help="comma-separated group sizes")
    p.add_argument("--deltas", default="0.05:0.95:0.05",
                   help="erasure probabilities: comma list or start:stop:step")
    p.add_argument("--N", type=int, default=20000, help="source packets per measured round")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--formula-only", action="store_true", help="skip Monte-Carlo measurement")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--figure", help="also render a figure to this path")
    p.set_defaults(func=cmd_sweep_efficiency)

    p = sub.add_parser("placement-sweep", help="one adapted round per grid placement")
    p.add_argument("--n", default="3", help="comma-separated group sizes (3..8)")
    p.add_argument("--N", type=int, default=18, help="source packets per turn (multiple of 9)")
    p.add_argument("--epsilon", type=float, default=0.0, help="grid imperfection probability")
    p.add_argument("--alpha", type=float, default=1.0, help="fraction of secret combinations emitted")
    p.add_argument("--labeled", action="store_true",
                   help="count terminal orderings as distinct placements")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="per-placement CSV output path")
    p.add_argument("--summary", help="summary CSV path (default: <out>-summary.csv)")
    p.add_argument("--figure", help="also render a figure to this path")
    p.set_defaults(func=cmd_placement_sweep)

    p = sub.add_parser("concentration", help="spread of secret size across round sizes")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--delta-eve", dest="delta_eve", type=float, default=0.5)
    p.add_argument("--sizes", default="250,1000,4000")
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--figure", help="also render a figure to this path")
    p.set_defaults(func=cmd_concentration)

    p = sub.add_parser("exchange-solve", help="solve a cooperative data-exchange instance")
    p.add_argument("--instance", required=True, help="instance JSON file")
    p.add_argument("--field-order", dest="field_order", type=int, default=8)
    p.set_defaults(func=cmd_exchange_solve)

    p = sub.add_parser("selftest", help="run the exhaustive small-round oracles")
    p.add_argument("--max-round", dest="max_round", type=int, default=10)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleExchangeError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except (ValueError, RuntimeError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
