"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Errors are written to stderr as ``ERROR <code>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from . import kernel_process as kp
from . import prior_model as pm
from . import weight_process as wp
from .errors import DataError, DomainError, NumericalError
from .generative import simulate_dataset
from .geweke import GEWEKE_HYPER, geweke_test
from .gibbs import ChainConfig, align_samples, iterate_chain
from .rng import substream
from .summary import cocluster, point_partition, tree_report

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


DEFAULTS_HELP = ", ".join(f"{k}={v}" for k, v in {**pm.HyperParams().to_dict(), **ChainConfig().to_dict()}.items())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="msmix", description="Multiscale mixture clustering: simulate, fit, summarize.",
                     epilog=f"Config files are flat JSON objects. Defaults: {DEFAULTS_HELP}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="run configuration (flat JSON)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=_u64, help="random seed")
        p.add_argument("--workers", type=int, default=1, help="worker threads (results do not depend on it)")

    p = sub.add_parser("simulate", help="draw a synthetic dataset from the prior")
    common(p)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=int, default=5)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--truncation", type=int, help="truncation level k")

    p = sub.add_parser("fit", help="run the Gibbs sampler")
    common(p)
    p.add_argument("--data", help="observations CSV")
    p.add_argument("--covariates", help="covariates CSV")
    p.add_argument("--iters", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--truncation", type=int, help="initial truncation level k")
    p.add_argument("--adapt", type=_bool)
    p.add_argument("--warmup", type=int, help="initial sweeps with the path loadings pinned at zero")
    p.add_argument("--resume", action="store_true", help="continue an existing chain.jsonl")

    p = sub.add_parser("summarize", help="summarize a chain")
    common(p)
    p.add_argument("--chain", help="chain.jsonl (default: <out>/chain.jsonl)")

    p = sub.add_parser("prior-check", help="numerical checks of the weight and kernel priors")
    common(p)
    p.add_argument("--draws", type=int, default=10_000)
    p.add_argument("--max-k", type=int, default=16)
    p.add_argument("--p", type=int, default=5)

    p = sub.add_parser("geweke-check", help="getting-it-right test of the sampler")
    common(p)
    p.add_argument("--iters", type=int, default=10_000)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--p", type=int, default=5)
    return parser


def _load_config(args, required: bool) -> dict:
    if args.config is None:
        if required:
            raise UsageError("--config is required")
        return {}
    path = Path(args.config)
    if not path.exists():
        raise UsageError(f"config file {path} does not exist")
    cfg = io.RunConfig.load(path)
    data = cfg.to_dict()
    # drop defaults derived at construction so overrides recompute them
    raw = json.loads(path.read_text())
    if "burn_in" not in raw:
        data.pop("burn_in")
    return data


def _out_dir(args, cfg: dict) -> Path:
    out = args.out or cfg.get("out")
    if out is None:
        raise UsageError("--out is required")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_simulate(args) -> int:
    cfg = _load_config(args, required=False)
    if args.truncation is not None:
        cfg["k"] = args.truncation
    cfg["d"] = args.d
    hyper = pm.HyperParams.from_dict(cfg)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    out = _out_dir(args, cfg)
    data, truth = simulate_dataset(hyper, args.n, args.p, args.d, seed)
    io.write_matrix_csv(out / "Y.csv", data.Y)
    io.write_matrix_csv(out / "X.csv", data.X)
    io.dump_json(out / "truth.json", {"hyper": hyper.to_dict(), "seed": seed, **io.truth_to_dict(truth)})
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _load_config(args, required=True)
    overrides = {"data": args.data, "covariates": args.covariates, "seed": args.seed, "iterations": args.iters,
                 "burn_in": args.burnin, "thin": args.thin, "adapt": args.adapt,
                 "warmup": args.warmup}
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    if args.truncation is not None:
        cfg["k"] = args.truncation
        cfg["k_init"] = args.truncation
    if cfg.get("data") is None:
        raise UsageError("no data file given (--data or config 'data')")
    out = _out_dir(args, cfg)
    data = io.load_dataset(cfg["data"], cfg.get("covariates"))
    cfg["d"] = data.d
    run = io.RunConfig.from_dict(cfg)
    chain_path = out / "chain.jsonl"

    state = None
    if args.resume and chain_path.exists():
        previous = io.read_chain(chain_path, repair=True)
        if previous:
            state = previous[-1].state.copy()
    elif chain_path.exists():
        chain_path.unlink()

    count = 0
    with chain_path.open("a") as fh:
        for sample in iterate_chain(run.chain, data, run.hyper, workers=args.workers, state=state):
            fh.write(io.sample_to_json(sample) + "\n")
            fh.flush()
            count += 1
    samples = io.read_chain(chain_path)
    meta = {
        "config": run.to_dict(),
        "n": data.n, "p": data.p, "d": data.d,
        "samples": len(samples),
        "final_k": samples[-1].k if samples else None,
        "chain_schema": io.CHAIN_SCHEMA,
    }
    io.dump_json(out / "run-meta.json", meta)
    return EXIT_OK


def cmd_summarize(args) -> int:
    cfg = _load_config(args, required=False)
    out = _out_dir(args, cfg)
    chain_path = Path(args.chain) if args.chain else out / "chain.jsonl"
    chain = io.read_chain(chain_path)
    if not chain:
        raise DataError(f"chain file {chain_path} holds no samples")
    aligned, _ = align_samples(chain)
    psm = cocluster(aligned)
    est = point_partition(psm, aligned)
    io.write_matrix_csv(out / "cocluster.csv", psm)
    with (out / "partition.csv").open("w") as fh:
        fh.write("subject,pattern\n")
        for i, lab in enumerate(est.labels):
            fh.write(f"{i},{lab}\n")
    io.dump_json(out / "tree.json", tree_report(est, aligned))
    return EXIT_OK


def prior_check_report(seed: int, draws: int, max_k: int, p: int, workers: int = 1,
                       zeta_mu: float | None = None, zeta_sigma: float | None = None,
                       xi_mu: float = 0.95, xi_sigma: float = 0.95) -> dict:
    rng = substream(seed, 0)
    residuals = [wp.normalization_check(np.concatenate([[1.0], rng.uniform(0.01, 0.99, 11)])) for _ in range(100)]
    k = 10
    spec = wp.BetaSpec.from_shapes([float(s) for s in range(1, k)], [1.0] * (k - 1))
    levels = list(range(1, k - 2))
    level_rows = []
    for s in levels:
        mc, se = wp.monte_carlo_level_weight(s, spec, draws, substream(seed, 1, s), amended=True)
        level_rows.append({"level": s, "expected_amended": wp.expected_level_weight(s, spec, amended=True),
                         "expected_literal": wp.expected_level_weight(s, spec, amended=False),
                         "monte_carlo": mc, "mc_se": se})
    zeta_mu = 0.05 * math.sqrt(p) if zeta_mu is None else zeta_mu
    zeta_sigma = 0.05 * math.sqrt(p) if zeta_sigma is None else zeta_sigma
    schedule = pm.InverseGammaScales.geometric(1.0, 0.3, max_k)
    sugg = kp.suggest_truncation(schedule, zeta_mu, zeta_sigma, xi_mu, xi_sigma, max_k=max_k, p=p,
                                 draws=draws, seed=seed, workers=workers)
    return {
        "normalization": {"max_residual": max(residuals), "k": 12, "sequences": 100},
        "level_weights": {"beta_a": list(spec.a), "beta_b": list(spec.b), "k": k, "levels": level_rows},
        "truncation": {
            "schedule": {"type": "inverse_gamma_geometric", "first_mean": 1.0, "ratio": 0.3, "shape": 3.0},
            "p": p, "zeta_mu": zeta_mu, "zeta_sigma": zeta_sigma, "xi_mu": xi_mu, "xi_sigma": xi_sigma,
            "suggested_level": sugg.level, "found": sugg.found, "levels": sugg.levels,
            "p_mu": sugg.p_mu, "p_sigma": sugg.p_sigma, "se_mu": sugg.se_mu, "se_sigma": sugg.se_sigma,
        },
    }


def cmd_prior_check(args) -> int:
    cfg = _load_config(args, required=False)
    out = _out_dir(args, cfg)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    report = prior_check_report(seed, args.draws, args.max_k, args.p, args.workers,
                                cfg.get("zeta_mu"), cfg.get("zeta_sigma"),
                                cfg.get("xi_mu", 0.95), cfg.get("xi_sigma", 0.95))
    io.dump_json(out / "prior-check.json", report)
    return EXIT_OK


def cmd_geweke(args) -> int:
    cfg = _load_config(args, required=False)
    out = _out_dir(args, cfg)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    hyper = pm.HyperParams.from_dict(cfg) if cfg else GEWEKE_HYPER
    res = geweke_test(hyper, n=args.n, p=args.p, iterations=args.iters, seed=seed)
    with (out / "geweke.csv").open("w") as fh:
        fh.write("statistic,mean_prior,se_prior,mean_gibbs,se_gibbs,z\n")
        for name, m1, s1, m2, s2, z in res.rows():
            fh.write(f"{name},{m1!r},{s1!r},{m2!r},{s2!r},{z!r}\n")
    print(f"{res.pass_fraction():.3f} of statistics with |z| < 4")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "summarize": cmd_summarize,
            "prior-check": cmd_prior_check, "geweke-check": cmd_geweke}


def run_cli(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        code, msg = EXIT_USAGE, str(exc)
    except DomainError as exc:
        code, msg = EXIT_USAGE, str(exc)
    except (DataError, OSError) as exc:
        code, msg = EXIT_DATA, str(exc)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        code, msg = EXIT_NUMERIC, str(exc)
    print(f"ERROR {code}: {msg}", file=sys.stderr)
    return code


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
