"""Command-line entry point: ``simulate``, ``price``, ``defect`` and ``optimize``.

Exit codes:

    0  success (``optimize``: converged)
    2  invalid configuration or arguments
    3  I/O failure
    4  Euler scheme produced a non-positive price
    5  ``optimize`` exhausted max_iter (report still written)
    6  degenerate diffusion (alpha = 0 with a drift mismatch)
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io
from .config import ConfigError, RunConfig, load_config, parse_override
from .errors import (
    AdaptiveMartingaleError,
    DegenerateDiffusionError,
    EulerPositivityError,
)
from .martingale import adaptive_optimize, martingale_defect
from .pricing import CallContract, bs_call_price, mc_call_price
from .stochastic import sample_brownian, simulate_gbm_euler, simulate_gbm_exact
from .strategy import (
    BondCurve,
    gain_process,
    make_strategy,
    named_policy,
    portfolio_value,
    self_financing_defect,
)

log = logging.getLogger("adaptive_martingale")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_EULER = 4
EXIT_NOT_CONVERGED = 5
EXIT_DEGENERATE = 6


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="flat dotted-key config file")
    parser.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument(
        "--format", action="append", choices=("csv", "json"), dest="formats",
        help="output format; repeat for both (default: from config)",
    )
    parser.add_argument("--n-paths", type=int, dest="n_paths")
    parser.add_argument("--threads", type=int, help="worker threads for path generation")
    parser.add_argument("--raw", action="store_true", help="test the undiscounted price")
    parser.add_argument("--scheme", choices=("exact", "euler"), default="exact")
    parser.add_argument(
        "--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override one config field; flags win over the config file",
    )
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptive-martingale",
        description="GBM simulation, call pricing and adaptive martingale optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated price ensemble")
    _common(p)
    p.add_argument("--policy", help="also write strategy, portfolio and gain for a named policy")

    p = sub.add_parser("price", help="price a European call")
    _common(p)
    p.add_argument("--strike", type=float, help="strike (default: x0)")
    p.add_argument("--maturity", type=float, help="maturity in years (default: grid.T)")
    p.add_argument("--method", choices=("closed", "mc"), default="closed")

    p = sub.add_parser("defect", help="measure the martingale defect of a simulated ensemble")
    _common(p)
    p.add_argument("--policy", help="policy whose holdings join the conditioning state")

    p = sub.add_parser("optimize", help="run the adaptive drift-shift optimizer")
    _common(p)
    return parser


def _config_from_args(args) -> RunConfig:
    overrides = dict(parse_override(s) for s in args.set)
    if args.seed is not None:
        overrides["simulation.seed"] = args.seed
    if args.n_paths is not None:
        overrides["simulation.n_paths"] = args.n_paths
    if args.threads is not None:
        overrides["simulation.threads"] = args.threads
    if args.out is not None:
        overrides["output.directory"] = args.out
    if args.formats:
        overrides["output.formats"] = list(dict.fromkeys(args.formats))
    if getattr(args, "policy", None):
        overrides["strategy.policy"] = args.policy
    return load_config(args.config, overrides)


def _out(cfg: RunConfig) -> Path:
    return Path(cfg.output.directory)


def _simulate(cfg: RunConfig, scheme: str):
    sim = cfg.simulation
    brownian = sample_brownian(cfg.time_grid(), sim.n_paths, sim.seed, sim.threads)
    if scheme == "euler":
        return simulate_gbm_euler(cfg.market, brownian)
    return simulate_gbm_exact(cfg.market, brownian)


def _write_ensemble(cfg: RunConfig, stem: str, ens) -> None:
    out = _out(cfg)
    if "csv" in cfg.output.formats:
        io.write_text(out / f"{stem}.csv", io.ensemble_to_csv(ens))
    if "json" in cfg.output.formats:
        io.write_text(out / f"{stem}.json", io.ensemble_to_json(ens))


def cmd_simulate(cfg: RunConfig, scheme: str = "exact") -> int:
    prices = _simulate(cfg, scheme)
    out = _out(cfg)
    _write_ensemble(cfg, "prices", prices)
    if cfg.strategy.policy:
        strat = make_strategy(named_policy(cfg.strategy.policy, cfg.market.r), prices)
        bond = BondCurve.on_grid(cfg.market.r, prices.grid)
        if "csv" in cfg.output.formats:
            io.write_text(out / "strategy.csv", io.strategy_to_csv(strat))
        if "json" in cfg.output.formats:
            io.write_text(out / "strategy.json", io.strategy_to_json(strat, prices.seed))
        _write_ensemble(cfg, "portfolio", portfolio_value(strat, prices, bond))
        _write_ensemble(cfg, "gain", gain_process(strat, prices, bond))
        defect = self_financing_defect(strat, prices, bond)
        rows = ["path,defect"] + [f"{p},{io.fmt(d)}" for p, d in enumerate(defect)]
        io.write_text(out / "financing_defect.csv", "\n".join(rows) + "\n")
    log.info("wrote %d %s paths to %s", prices.n_paths, scheme, out)
    return EXIT_OK


def cmd_price(cfg: RunConfig, contract: CallContract, method: str = "closed") -> int:
    if method == "mc":
        sim = cfg.simulation
        quote = mc_call_price(cfg.market, contract, sim.n_paths, sim.seed, sim.threads)
    else:
        quote = bs_call_price(cfg.market, contract)
    text = json.dumps(quote.to_dict()) + "\n"
    io.write_text(_out(cfg) / "quote.json", text)
    sys.stdout.write(text)
    return EXIT_OK


def _write_report(cfg: RunConfig, report, stem: str, grid) -> None:
    out = _out(cfg)
    if "json" in cfg.output.formats:
        io.write_text(out / f"{stem}.json", io.report_to_json(report))
    if "csv" in cfg.output.formats:
        if report.theta_history:
            io.write_text(out / f"{stem}_iterations.csv", io.report_to_csv(report))
        rows = ["index,time,defect"] + [
            f"{i},{io.fmt(grid.times[i])},{io.fmt(d)}" for i, d in enumerate(report.defect_by_index)
        ]
        io.write_text(out / f"{stem}_by_index.csv", "\n".join(rows) + "\n")


def cmd_defect(cfg: RunConfig, raw: bool = False, scheme: str = "exact") -> int:
    prices = _simulate(cfg, scheme)
    strat = None
    if cfg.strategy.policy:
        strat = make_strategy(named_policy(cfg.strategy.policy, cfg.market.r), prices)
    rate = 0.0 if raw else cfg.market.r
    report = martingale_defect(prices, rate, cfg.estimator, cfg.optimizer.epsilon, strat)
    _write_report(cfg, report, "defect", prices.grid)
    sys.stdout.write(f"max_defect={report.max_defect:.6g} converged={report.converged}\n")
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, raw: bool = False) -> int:
    opt, sim = cfg.optimizer, cfg.simulation
    grid = cfg.time_grid()
    report = adaptive_optimize(
        cfg.market, grid, sim.n_paths, sim.seed, cfg.estimator,
        opt.epsilon, opt.max_iter, opt.damping, raw=raw, threads=sim.threads,
    )
    _write_report(cfg, report, "report", grid)
    sys.stdout.write(
        f"converged={report.converged} iterations={report.iterations} "
        f"theta={report.theta_history[-1]:.6g} max_defect={report.max_defect:.6g}\n"
    )
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _config_from_args(args)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.scheme)
        if args.command == "price":
            strike = cfg.market.x0 if args.strike is None else args.strike
            maturity = cfg.grid.T if args.maturity is None else args.maturity
            return cmd_price(cfg, CallContract(strike, maturity), args.method)
        if args.command == "defect":
            return cmd_defect(cfg, args.raw, args.scheme)
        return cmd_optimize(cfg, args.raw)
    except EulerPositivityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EULER
    except DegenerateDiffusionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ConfigError, AdaptiveMartingaleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
