"""Command-line front end.

Exit codes: 0 success (tolerant / certified), 1 negative verdict or diverged
run, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import allocation, bounds, config, montecarlo, tolerance, trainer, voting
from ._parallel import SEED_ENV, THREADS_ENV
from .attacks import MODELS, AttackSpec, apply_attack
from .oracle import OracleConfig

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE = 0, 1, 2

MC_HEADER = ["n", "code", "p_or_b", "alpha", "S", "trials", "q_hat", "q_star", "P_hat", "delta_bound", "certified", "q_se", "P_se"]
TRAIN_HEADER = ["step", "loss", "l1_grad", "mu_digest"]
BOUNDS_HEADER = [
    "n", "C", "S", "alpha", "delta", "p_star", "degree_tail", "local_error",
    "q_star", "u_min", "rhs", "bound", "certified", "vacuous",
]
_ORACLE_KEYS = ("g", "sigma", "batch", "noise")


class UsageError(ValueError):
    pass


def _threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    return int(env) if env else None


def _seed_override(args) -> int | None:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    return int(env) if env else None


def _signs(text: str, n: int | None = None):
    """Parse a message given as '0'/'1' characters or '+'/'-' characters."""
    text = text.strip()
    if set(text) <= {"0", "1"}:
        m = voting.from_binary([int(ch) for ch in text])
    elif set(text) <= {"+", "-"}:
        m = voting.from_binary([1 if ch == "+" else 0 for ch in text])
    else:
        raise UsageError(f"message must use only 0/1 or +/- characters, got {text!r}")
    if n is not None and len(m) != n:
        raise UsageError(f"message has length {len(m)}, matrix has n={n}")
    return m


def _fmt_signs(v) -> str:
    return "".join("+" if x > 0 else "-" for x in v)


def cmd_build_code(args) -> int:
    if args.b is not None and args.p is not None:
        raise UsageError("give either --b (deterministic) or --p (Bernoulli), not both")
    if args.b is not None:
        G = allocation.build_deterministic(args.n, args.b)
    elif args.p is not None:
        seed = _seed_override(args)
        G = allocation.sample_bernoulli(args.n, args.p, 0 if seed is None else seed)
    else:
        G = allocation.identity(args.n)
    if args.out is None:
        sys.stdout.write(G.to_text())
        return EXIT_OK
    G.save(args.out)
    m = config.Manifest("build-code", args.argv, {"n": args.n, "b": args.b, "p": args.p}, G.params.get("seed"))
    m.data["code"] = {"kind": G.kind, "r": float(G.redundancy()), "matrix_sha256": G.digest()}
    m.write(args.out)
    print(f"# {G.describe()}")
    return EXIT_OK


def cmd_verify(args) -> int:
    G = allocation.load(args.matrix)
    reports = tolerance.verify(G, args.b, args.method, _threads(args))
    for r in reports:
        line = f"method={r.method} n={r.n} b={r.b} verdict={'tolerant' if r.verdict else 'violated'} messages_checked={r.messages_checked}"
        if r.witness is not None:
            line += f" witness={r.witness[0]} count={r.witness[1]}"
        print(line)
    verdicts = {r.verdict for r in reports}
    if len(verdicts) > 1:
        print("error: verifiers disagree", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK if reports[0].verdict else EXIT_NEGATIVE


def cmd_simulate_vote(args) -> int:
    if args.matrix is not None:
        G = allocation.load(args.matrix)
    elif args.n is not None:
        G = allocation.build_deterministic(args.n, args.b) if args.b else allocation.identity(args.n)
    else:
        raise UsageError("give --matrix FILE or --n N [--b B]")
    m = _signs(args.message, G.n)
    byz = tuple(int(x) for x in args.byzantine.split(",") if x.strip()) if args.byzantine else ()
    spec = AttackSpec(byz, args.attack)
    true_sign = None
    if args.true_sign is not None:
        true_sign = 1 if args.true_sign.startswith("+") or args.true_sign == "1" else -1
    c = voting.encode(m, G)
    y = apply_attack(c, spec, true_sign=true_sign)
    mu = int(voting.majority(m))
    mu_hat = int(voting.decode(y))
    print(f"G: {G.describe()}")
    for i in range(G.n):
        parts = ",".join(str(j) for j in G.partitions(i))
        tag = " byzantine" if i in spec.byzantine else ""
        print(f"worker {i}: partitions [{parts}] c={'+' if c[i] > 0 else '-'} y={'+' if y[i] > 0 else '-'}{tag}")
    print(f"m={_fmt_signs(m)} c={_fmt_signs(c)} y={_fmt_signs(y)}")
    print(f"mu={'+' if mu > 0 else '-'} mu_hat={'+' if mu_hat > 0 else '-'} {'match' if mu == mu_hat else 'MISMATCH'}")
    return EXIT_OK if mu == mu_hat else EXIT_NEGATIVE


def bounds_row(n: float, C: float, S: float, alpha: float, delta: float) -> list:
    p = bounds.p_star(n, C)
    eps = p / 2.0
    cert = bounds.certify_global_error(bounds.BoundInputs(n, C, S, alpha, delta))
    return [
        n, C, S, alpha, delta, p,
        min(1.0, 2.0 * bounds.hoeffding_tail(n, p, eps)),
        bounds.conditional_local_error(n * eps, S),
        bounds.q_star(n, C, S),
        cert.u_min, cert.rhs, cert.bound, cert.certified, cert.vacuous,
    ]


def cmd_bounds(args) -> int:
    row = bounds_row(args.n, args.C, args.S, args.alpha, args.delta)
    text = config.write_csv(args.out, BOUNDS_HEADER, [row])
    if args.out is None:
        sys.stdout.write(text)
    else:
        config.Manifest("bounds", args.argv, dict(zip(BOUNDS_HEADER[:5], row[:5])), None).write(args.out)
    return EXIT_OK if row[BOUNDS_HEADER.index("certified")] else EXIT_NEGATIVE


def mc_config(values: dict[str, str]) -> montecarlo.McConfig:
    """Monte Carlo setting from flat keys; g, sigma, batch and noise describe the oracle."""
    values = dict(values)
    oracle_values = {k: values.pop(k) for k in _ORACLE_KEYS if k in values}
    oracle = config.build(OracleConfig, {"g": "1.0", "sigma": "1.0", **oracle_values})
    return montecarlo.McConfig(oracle=oracle, **config.coerce_fields(montecarlo.McConfig, values, skip=("oracle",)))


def mc_row(result: montecarlo.McResult) -> list:
    cfg = result.config
    if cfg.code == "bernoulli":
        p_or_b = cfg.connection_probability
    elif cfg.code == "deterministic":
        p_or_b = cfg.design_b
    else:
        p_or_b = None
    cert = result.certificate
    return [
        cfg.n, cfg.code, p_or_b, cfg.alpha, cfg.oracle.snr, result.trials,
        result.q_hat, result.q_star, result.P_hat,
        None if cert is None else cert.bound,
        None if cert is None else cert.certified,
        result.q_se, result.P_se,
    ]


def _mc_code_meta(cfg: montecarlo.McConfig) -> dict:
    if cfg.code == "bernoulli" and cfg.ensemble:
        p = cfg.connection_probability
        return {"kind": "bernoulli", "ensemble": True, "p": p, "expected_r": cfg.n * p}
    G = montecarlo.fixed_matrix(cfg)
    return {"kind": G.kind, "r": float(G.redundancy()), "matrix_sha256": G.digest()}


def cmd_montecarlo(args) -> int:
    raw = config.load(args.config)
    seed = _seed_override(args)
    if seed is not None:
        raw["seed"] = str(seed)
    grid = config.expand_grid(raw)
    configs = [mc_config(v) for v in grid]
    rows, byzantine, codes = [], [], []
    for cfg in configs:
        result = montecarlo.run(cfg, _threads(args))
        rows.append(mc_row(result))
        byzantine.append(list(result.byzantine))
        codes.append(_mc_code_meta(result.config))
    config.write_csv(args.out, MC_HEADER, rows)
    manifest = config.Manifest("montecarlo", args.argv, raw, raw.get("seed", "0"))
    manifest.data["byzantine"] = byzantine
    manifest.data["code"] = codes
    manifest.write(args.out)
    return EXIT_OK


def train_config(values: dict[str, str]) -> trainer.TrainConfig:
    return config.build(trainer.TrainConfig, values, aliases={"lr": {"theory": None}})


def cmd_train(args) -> int:
    raw = config.load(args.config)
    seed = _seed_override(args)
    if seed is not None:
        raw["seed"] = str(seed)
    cfg = train_config(raw)
    trace = trainer.train(cfg, _threads(args))
    rows = list(zip(trace.steps, trace.loss, trace.l1_grad, trace.mu_digest))
    config.write_csv(args.out, TRAIN_HEADER, [list(r) for r in rows])
    manifest = config.Manifest("train", args.argv, cfg.to_dict(), cfg.seed)
    manifest.data["code"] = trace.manifest["code"]
    manifest.data["byzantine"] = trace.manifest["byzantine"]
    manifest.data["result"] = {
        "final_loss": trace.final_loss,
        "diverged": trace.diverged,
        "convergence_metric": trainer.convergence_metric(trace) if trace.l1_grad else None,
        "lr": trace.lr,
        "l1_lipschitz": trace.l1_lipschitz,
        "estimates": trace.manifest["estimates"],
        "samples_per_step": trace.samples_per_step,
        "effective_redundancy": trace.effective_redundancy,
    }
    if cfg.delta is not None:
        manifest.data["result"]["theory_bound"] = trainer.theory_bound(trace, cfg.delta)
    manifest.write(args.out)
    status = "diverged" if trace.diverged else "ok"
    print(f"{status} steps={len(trace.steps)} final_loss={trace.final_loss!r}")
    return EXIT_NEGATIVE if trace.diverged else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help=f"worker threads (env {THREADS_ENV}; default all cores)")

    parser = argparse.ArgumentParser(prog="election-coding", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-code", parents=[common], help="construct an allocation matrix")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--b", type=int, help="deterministic code tolerating b Byzantines")
    p.add_argument("--p", type=float, help="Bernoulli code with connection probability p")
    p.add_argument("--seed", type=int, help=f"Bernoulli seed (env {SEED_ENV}; default 0)")
    p.add_argument("--out", type=Path, help="write the matrix here instead of stdout")
    p.set_defaults(func=cmd_build_code)

    p = sub.add_parser("verify", parents=[common], help="check perfect b-Byzantine tolerance")
    p.add_argument("--matrix", type=Path, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--method", choices=("lemma2", "bruteforce", "both"), default="lemma2")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate-vote", parents=[common], help="trace one message through encode/attack/decode")
    p.add_argument("--matrix", type=Path)
    p.add_argument("--n", type=int)
    p.add_argument("--b", type=int, help="with --n: deterministic code design parameter")
    p.add_argument("--message", required=True, help="partition signs as 0/1 or +/- characters")
    p.add_argument("--attack", choices=MODELS, default="reverse")
    p.add_argument("--byzantine", default="", help="comma-separated 0-based worker indices")
    p.add_argument("--true-sign", help="'+' or '-' (oracle_reverse only)")
    p.set_defaults(func=cmd_simulate_vote)

    p = sub.add_parser("bounds", parents=[common], help="evaluate the error bounds and the certificate")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--C", type=float, required=True)
    p.add_argument("--S", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("montecarlo", parents=[common], help="estimate local/global error empirically")
    p.add_argument("--config", type=Path, required=True, help="key=value file or a run manifest (.json)")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("train", parents=[common], help="coded SignSGD training on a synthetic task")
    p.add_argument("--config", type=Path, required=True, help="key=value file or a run manifest (.json)")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)
    return parser


def dispatch(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    args.argv = argv
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
