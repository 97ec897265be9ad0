"""Command-line experiment runner.

Every subcommand runs seeded trials and prints one report (JSON by default,
CSV with ``--format csv``).  Exit status is 2 for invalid parameters and 1
when a run breaks an invariant (a wrong decode, a failed bookkeeping check).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import random
import sys
from importlib import resources

from . import dynomv, multiphase, omv, subset_comm, wellspread
from .gf import FieldMatrix, FieldSpec

SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


def trial_rng(seed: int, trial: int) -> random.Random:
    return random.Random(f"{seed}/{trial}")


def load_schema() -> dict:
    return json.loads(resources.files("cplab").joinpath("report_schema.json").read_text())


# subcommands


def cmd_subset_comm(args: argparse.Namespace) -> dict:
    w, S, k = args.universe_bits, args.set_size, args.subset_size
    if not 1 <= w <= 64:
        raise UsageError("--universe-bits must lie in [1, 64]")
    if not 1 <= S <= 1 << w:
        raise UsageError(f"--set-size must lie in [1, 2^{w}]; try {min(max(S, 1), 1 << w)}")
    if not 0 <= k <= S:
        raise UsageError(f"--subset-size must lie in [0, {S}]; try {min(max(k, 0), S)}")
    trials = []
    for trial in range(args.trials):
        rng = trial_rng(args.seed, trial)
        B = rng.sample(range(1 << w), S) if w <= 30 else _sample_large(rng, w, S)
        A = rng.sample(B, k)
        decoded, t = subset_comm.run_protocol(A, B, w, seed=args.seed)
        trials.append(
            {
                "trial": trial,
                "alice_bits": t.tallies["alice"],
                "bob_bits": t.tallies["bob"],
                "correct": decoded == frozenset(A),
                "alice_budget": subset_comm.alice_budget(k, S),
                "bob_budget": subset_comm.bob_budget(k, w),
                "within_budget": t.tallies["alice"] <= subset_comm.alice_budget(k, S)
                and t.tallies["bob"] <= subset_comm.bob_budget(k, w),
            }
        )
    violations = [f"trial {r['trial']}: wrong decode" for r in trials if not r["correct"]]
    return {
        "params": {"universe_bits": w, "set_size": S, "subset_size": k, "trials": args.trials},
        "algorithms": {"seed_search": "seeded full-cycle scan of odd multipliers", "subset_code": "colex rank"},
        "summary": {
            "correct_rate": _rate(r["correct"] for r in trials),
            "within_budget_rate": _rate(r["within_budget"] for r in trials),
            "alice_bits_max": max((r["alice_bits"] for r in trials), default=0),
            "bob_bits_max": max((r["bob_bits"] for r in trials), default=0),
        },
        "trials": trials,
        "violations": violations,
    }


def _sample_large(rng: random.Random, w: int, S: int) -> list[int]:
    out: set[int] = set()
    while len(out) < S:
        out.add(rng.getrandbits(w))
    return sorted(out)


def cmd_multiphase(args: argparse.Namespace) -> dict:
    try:
        ds = multiphase.make_ds(args.ds, args.k, args.n, args.w)
        params = multiphase.ReductionParams(args.k, args.n, args.w, ds.t_q, args.ell)
        ds.machine()
    except ValueError as e:
        raise UsageError(str(e)) from None
    N, B = params.N, params.B
    trials, violations = [], []
    for trial in range(args.trials):
        rng = trial_rng(args.seed, trial)
        W = frozenset((j, h) for j in range(N) for h in range(B) if rng.random() < args.density)
        V = tuple(rng.randrange(B) for _ in range(N))
        if trial % 2 == 0:
            # every other trial tries for a disjoint V when W leaves room
            V = tuple(
                next((h for h in rng.sample(range(B), B) if (j, h) not in W), V[j]) for j in range(N)
            )
        inst = multiphase.BlockedLsdInstance(N, B, V, W)
        try:
            answer, t, res = multiphase.run_reduction(inst, ds, params, seed=args.seed)
        except ValueError as e:
            raise UsageError(str(e)) from None
        ok = answer == inst.disjoint()
        if not ok:
            violations.append(f"trial {trial}: reduction answered {answer}")
        trials.append(
            {
                "trial": trial,
                "answer": answer,
                "answer_ok": ok,
                "alice_bits": t.tallies["alice"],
                "bob_bits": t.tallies["bob"],
                "step2_alice_bits": res.step_bits["step2"]["alice"],
                "step2_bob_bits": res.step_bits["step2"]["bob"],
                "step3_alice_bits": res.step_bits["step3"]["alice"],
                "step3_bob_bits": res.step_bits["step3"]["bob"],
                "rounds": len(res.rounds),
                "update_probes_max": res.update_probes_max,
                "query_probes_max": res.query_probes_max,
            }
        )
    return {
        "params": {
            "k": args.k, "n": args.n, "ell": args.ell, "w": args.w, "ds": args.ds,
            "trials": args.trials, "density": args.density,
            "suggested_ell": multiphase.suggested_ell(ds.t_q, args.k, args.n),
        },
        "algorithms": {"step2": "all l-subsets enumerated", "step3": "lockstep rounds with bulk subset protocol"},
        "summary": {
            "answer_ok_rate": _rate(r["answer_ok"] for r in trials),
            "alice_bits": _mean(r["alice_bits"] for r in trials),
            "bob_bits": _mean(r["bob_bits"] for r in trials),
            "declared_t_u": ds.t_u,
            "declared_t_q": ds.t_q,
        },
        "trials": trials,
        "violations": violations,
    }


def cmd_omv(args: argparse.Namespace) -> dict:
    try:
        cfg = omv.desk_config(args.n, args.p, args.w, args.delta)
        ds = omv.make_ds(args.ds, cfg)
        ds.machine()
    except ValueError as e:
        n8 = max(8, args.n - args.n % 8)
        raise UsageError(f"{e}; nearest valid n: {n8}") from None
    trials, violations = [], []
    for trial in range(args.trials):
        rng = trial_rng(args.seed, trial)
        M = FieldMatrix.random(cfg.n, cfg.field, rng)
        enc = omv.encode_matrix(ds, M, cfg)
        back = omv.decode_matrix(enc.bits, ds, cfg)
        ok = back.to_lists() == M.to_lists()
        if not ok:
            violations.append(f"trial {trial}: decoded matrix differs")
        if enc.measured_bits != sum(enc.breakdown.values()):
            violations.append(f"trial {trial}: breakdown does not sum to the measured length")
        st = enc.stats
        trials.append(
            {
                "trial": trial,
                "roundtrip_ok": ok,
                "branch": enc.branch,
                "bits_measured": enc.measured_bits,
                "bits_budget": omv.omv_budget(cfg, st["V_star_size"], st.get("X_size", cfg.n)),
                "threshold_bits": (cfg.n**2 + cfg.n) * cfg.field.lg,
                "V_size": st["V_size"],
                "V_star_size": st["V_star_size"],
                "U_size": st["U_size"],
                "breakdown": enc.breakdown,
            }
        )
    return {
        "params": {"n": args.n, "p": args.p, "w": args.w, "delta": cfg.delta, "ds": args.ds, "trials": args.trials},
        "algorithms": {"cellset": "exhaustive under 2^20 subsets else greedy", "completion": "lexicographic scan"},
        "summary": {
            "roundtrip_ok_rate": _rate(r["roundtrip_ok"] for r in trials),
            "bits_measured_mean": _mean(r["bits_measured"] for r in trials),
        },
        "trials": trials,
        "violations": violations,
    }


def cmd_dyn(args: argparse.Namespace) -> dict:
    try:
        F = FieldSpec(args.p)
        cfg = dynomv.EpochConfig(args.n, F, args.w, args.beta, args.ell, args.delta, args.m)
        dynomv.make_ds(args.ds, args.n, F, args.w)
    except ValueError as e:
        triples = [t for t in dynomv.valid_triples(max(args.n, 3), 9) if t[0] == args.n][:5]
        raise UsageError(f"{e}; valid (n, beta, l) for this n: {triples}") from None
    if not cfg.k_integral:
        triples = [t for t in dynomv.valid_triples(max(args.n, 3), 9) if t[0] == args.n][:5]
        raise UsageError(f"n={args.n} does not divide beta^l - 1 = {args.beta ** args.ell - 1}; valid (n, beta, l): {triples}")
    seq = wellspread.random_sequence(args.n, random.Random(f"indices/{args.seed}"))
    trials, violations = [], []
    for trial in range(args.trials):
        row = dynomv.epoch_session(args.ds, cfg, seq, trial_rng(args.seed, trial).getrandbits(31), args.gamma)
        row["trial"] = trial
        if not row["roundtrip_ok"]:
            violations.append(f"trial {trial}: epoch values not recovered")
        if row["measured_bits"] != sum(row["breakdown"].values()):
            violations.append(f"trial {trial}: breakdown does not sum to the measured length")
        violations.extend(f"trial {trial}: {v}" for v in row.pop("violations"))
        row.pop("stats")
        trials.append(row)
    return {
        "params": {
            "n": args.n, "p": args.p, "beta": args.beta, "ell": args.ell, "w": args.w, "k": cfg.k,
            "ds": args.ds, "gamma": args.gamma, "m": args.m, "trials": args.trials,
            "in_epoch_range": cfg.in_epoch_range,
        },
        "algorithms": {"indices": "seeded random permutation", "cellset": "exhaustive under 2^20 subsets else greedy"},
        "summary": {
            "roundtrip_ok_rate": _rate(r["roundtrip_ok"] for r in trials),
            "one_branch_rate": _rate(r["branch"] == 1 for r in trials),
            "zero_branch_rate": _rate(r["branch"] == 0 for r in trials),
        },
        "trials": trials,
        "violations": violations,
    }


def cmd_wellspread(args: argparse.Namespace) -> dict:
    if args.n < 2 or args.n % 2:
        raise UsageError(f"--n must be even and at least 2; try {max(2, args.n + args.n % 2)}")
    if args.n > 8:
        raise UsageError("exhaustive verification is limited to n <= 8")
    rng = random.Random(f"wellspread/{args.n}/{args.seed}")
    trials = []
    fixture = None
    for trial in range(args.trials):
        seq = wellspread.random_sequence(args.n, rng)
        ok, wit = wellspread.verify_wellspread(seq)
        trials.append({"trial": trial, "passed": ok, "reason": wit.reason})
        if ok and fixture is None:
            fixture = [list(p) for p in seq.pairs]
    adv_ok, _ = wellspread.verify_wellspread(wellspread.concentrated_sequence(args.n))
    return {
        "params": {"n": args.n, "trials": args.trials},
        "algorithms": {"cover_search": "greedy then exhaustive"},
        "summary": {
            "pass_rate": _rate(r["passed"] for r in trials),
            "concentrated_passes": adv_ok,
            "fixture": fixture,
        },
        "trials": trials,
        "violations": ["concentrated sequence verified as well-spread"] if adv_ok else [],
    }


def cmd_ranksum(args: argparse.Namespace) -> dict:
    try:
        F = FieldSpec(args.p)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if args.k < 1 or args.n < 1 or args.n * args.k > args.n**2:
        raise UsageError("need 1 <= k <= n")
    if args.n % 2 == 0 and args.n <= 8:
        seq, _ = wellspread.gen_wellspread(args.n, args.seed)
        kind = "verified well-spread permutation"
    else:
        seq = wellspread.random_sequence(args.n, random.Random(f"indices/{args.seed}"))
        kind = "random permutation"
    R = dynomv.row_update_sets(seq, args.n * args.k)
    try:
        res = dynomv.ranksum_count(args.n, F, args.k, R)
    except ValueError as e:
        raise UsageError(str(e)) from None
    return {
        "params": {"n": args.n, "p": args.p, "k": args.k},
        "algorithms": {"indices": kind, "count": "exhaustive over sets of k distinct vectors"},
        "summary": {**res, "row_sets": [list(r) for r in R]},
        "trials": [],
        "violations": [] if res["within_bound"] else ["count exceeds the bound"],
    }


# plumbing


def _rate(flags) -> float:
    flags = list(flags)
    return sum(map(bool, flags)) / len(flags) if flags else 1.0


def _mean(xs) -> float:
    xs = list(xs)
    return sum(xs) / len(xs) if xs else 0.0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cplab", description=__doc__.splitlines()[0])
    ap.add_argument("--format", choices=("json", "csv"), default="json")
    ap.add_argument("--output", help="write the report here instead of stdout")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, trials: int = 10) -> None:
        p.add_argument("--trials", type=int, default=trials)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("subset-comm", help="two-level hashing subset protocol")
    p.add_argument("--universe-bits", type=int, default=16)
    p.add_argument("--set-size", type=int, default=256)
    p.add_argument("--subset-size", type=int, default=16)
    common(p)
    p.set_defaults(func=cmd_subset_comm)

    p = sub.add_parser("multiphase-reduce", help="Blocked-LSD protocol through a Multiphase structure")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--ell", type=int, default=2)
    p.add_argument("--w", type=int, default=8)
    p.add_argument("--ds", choices=sorted(multiphase.DS_KINDS), default="naive")
    p.add_argument("--density", type=float, default=0.3)
    common(p)
    p.set_defaults(func=cmd_multiphase)

    p = sub.add_parser("omv-roundtrip", help="static matrix encoder and decoder")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--w", type=int, default=16)
    p.add_argument("--delta", type=int, default=None)
    p.add_argument("--ds", choices=("verbatim", "zero"), default="verbatim")
    common(p, trials=5)
    p.set_defaults(func=cmd_omv)

    p = sub.add_parser("dyn-roundtrip", help="epoch encoder and decoder")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--beta", type=int, default=4)
    p.add_argument("--ell", type=int, default=2)
    p.add_argument("--w", type=int, default=8)
    p.add_argument("--delta", type=int, default=None)
    p.add_argument("--m", type=int, default=4, help="number of shared sets in shared mode")
    p.add_argument("--ds", choices=("verbatim", "answer-table"), default="verbatim")
    p.add_argument("--gamma", choices=("shared", "explicit"), default="explicit")
    common(p, trials=5)
    p.set_defaults(func=cmd_dyn)

    p = sub.add_parser("wellspread", help="verify random index permutations")
    p.add_argument("--n", type=int, default=4)
    common(p, trials=100)
    p.set_defaults(func=cmd_wellspread)

    p = sub.add_parser("ranksum-count", help="count low rank sum vector sets")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ranksum)
    return ap


def to_csv(report: dict) -> str:
    rows = report["trials"] or [report["summary"]]
    flat = []
    for r in rows:
        out = {}
        for key, val in r.items():
            if isinstance(val, dict):
                out.update({f"{key}.{k2}": v2 for k2, v2 in val.items()})
            elif isinstance(val, list):
                out[key] = json.dumps(val)
            else:
                out[key] = val
        flat.append(out)
    keys = sorted({k for r in flat for k in r})
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    wr.writeheader()
    wr.writerows(flat)
    return buf.getvalue()


def run_experiment(argv: list[str] | None = None) -> tuple[int, str]:
    ap = build_parser()
    args = ap.parse_args(argv)
    env = os.environ.get("CPLAB_SEED")
    if env is not None and hasattr(args, "seed"):
        try:
            args.seed = int(env)
        except ValueError:
            return 2, f"CPLAB_SEED must be an integer, got {env!r}\n"
    if getattr(args, "trials", 1) < 0:
        return 2, "--trials must be non-negative\n"
    try:
        body = args.func(args)
    except UsageError as e:
        return 2, f"cplab {args.command}: {e}\n"
    report = {"schema_version": SCHEMA_VERSION, "command": args.command, "seed": args.seed, **body}
    text = to_csv(report) if args.format == "csv" else json.dumps(report, sort_keys=True, indent=2) + "\n"
    return (1 if report["violations"] else 0), text


def main(argv: list[str] | None = None) -> int:
    code, text = run_experiment(argv)
    stream = sys.stderr if code == 2 else sys.stdout
    ns = None
    if code != 2:
        ns, _ = build_parser().parse_known_args(argv)
    if ns is not None and ns.output:
        with open(ns.output, "w") as fh:
            fh.write(text)
    else:
        stream.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
