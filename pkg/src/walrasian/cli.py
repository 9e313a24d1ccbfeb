"""Command-line interface.

Exit codes: 0 when a result was computed (whatever the verdict), 1 for
input errors, 2 for numerical failures.  Log verbosity is read from the
``WALRASIAN_LOG_LEVEL`` environment variable.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import io
from .coalitions import (
    check_equal_treatment,
    default_eta,
    equal_treatment_block,
    find_blocking_coalition,
    verify_coalition,
)
from .convexgeom import DEFAULT_MAX_ITERS
from .economy import DEFAULT_ETA_BAR, check_replica_allocation
from .equilibrium import (
    compute_params,
    convert_notion,
    test_walrasian,
    verify_eps_walrasian,
)
from .exceptions import InputError, NumericalFailure
from .oracle import GridSpec, brute_force_block, grid_price_search

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2
LOG_ENV = "WALRASIAN_LOG_LEVEL"

logger = logging.getLogger("walrasian")


@dataclass(frozen=True)
class RunConfig:
    epsilon: float = 0.05
    eta: Optional[float] = None
    eta_bar: float = DEFAULT_ETA_BAR
    tol: Optional[float] = None
    max_iters: int = DEFAULT_MAX_ITERS
    k: Optional[int] = None
    seed: int = 0
    mode: str = "auto"
    oracle_grid_step: float = 1e-3
    search_radius: Optional[float] = None
    output: Optional[str] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InputError("--epsilon must be positive")
        if self.eta is not None and not self.eta > 0:
            raise InputError("--eta must be positive")
        if not 0 < self.eta_bar < 1:
            raise InputError("--eta-bar must lie in (0, 1)")
        if self.tol is not None and not self.tol > 0:
            raise InputError("--tol must be positive")
        if self.max_iters < 1:
            raise InputError("--max-iters must be at least 1")
        if self.k is not None and self.k < 1:
            raise InputError("--k must be at least 1")
        if not self.oracle_grid_step > 0:
            raise InputError("--oracle-grid-step must be positive")
        if self.search_radius is not None and not self.search_radius > 0:
            raise InputError("--search-radius must be positive")
        if self.mode not in ("auto", "strong", "plc"):
            raise InputError(f"unknown --mode {self.mode!r}")

    @property
    def eta_value(self) -> float:
        return default_eta(self.eta_bar) if self.eta is None else self.eta


def cmd_test(args, cfg: RunConfig):
    econ = io.load_economy(args.economy)
    alloc = io.load_allocation(args.allocation, econ)
    verdict = test_walrasian(econ, alloc, cfg.epsilon, cfg.mode, cfg.tol, cfg.max_iters,
                             cfg.search_radius)
    return verdict.to_dict()


def cmd_block(args, cfg: RunConfig):
    econ = io.load_economy(args.economy)
    alloc = io.load_allocation(args.allocation, econ)
    res = find_blocking_coalition(econ, alloc, cfg.epsilon, cfg.eta_value, cfg.k, cfg.seed,
                                  cfg.mode, cfg.tol, cfg.max_iters)
    out = res.to_dict()
    if res.coalition is not None:
        out["certificate_ok"] = verify_coalition(econ, res.coalition, max_size=res.k).ok
    return out


def cmd_verify(args, cfg: RunConfig):
    econ = io.load_economy(args.economy)
    alloc = io.load_allocation(args.allocation, econ)
    price = io.load_price(args.price)
    return verify_eps_walrasian(econ, alloc, price, cfg.epsilon, cfg.tol,
                                cfg.search_radius).to_dict()


def cmd_params(args, cfg: RunConfig):
    econ = io.load_economy(args.economy)
    params = compute_params(econ, cfg.epsilon, cfg.mode, eta=cfg.eta_value)
    out = params.to_dict()
    out["h"] = econ.h
    out["num_goods"] = econ.num_goods
    return out


def cmd_replica(args, cfg: RunConfig):
    econ = io.load_economy(args.economy)
    doc = io.load_json(args.allocation, "allocation")
    n = doc.get("n", args.n)
    bundles = np.asarray(doc["bundles"], dtype=float)
    if n is None:
        raise InputError("pass --n or include 'n' in the allocation file")
    n = int(n)
    if bundles.shape[0] == econ.h and n > 1:
        # one bundle per type: give every copy the same bundle
        bundles = np.tile(bundles, (n, 1))
    replica = check_replica_allocation(econ, n, bundles)
    et = check_equal_treatment(replica)
    out = {"n": n, "allocation": io.allocation_to_dict(replica.bundles, n),
           "equal_treatment": et.holds, "violating_type": et.violating_type,
           "coalition": None}
    if not et.holds:
        coal = equal_treatment_block(econ, replica)
        out["coalition"] = coal.to_dict()
        out["certificate_ok"] = verify_coalition(econ, coal, strict_surplus=False).ok
    return out


def cmd_convert(args, cfg: RunConfig):
    econ = io.load_economy(args.economy)
    alloc = io.load_allocation(args.allocation, econ)
    price = io.load_price(args.price)
    _, rep = convert_notion(econ, price, alloc, cfg.epsilon, cfg.tol, cfg.search_radius)
    return rep.to_dict()


def cmd_oracle(args, cfg: RunConfig):
    econ = io.load_economy(args.economy)
    alloc = io.load_allocation(args.allocation, econ)
    if args.kind == "grid":
        p = grid_price_search(econ, alloc, cfg.epsilon,
                              GridSpec(cfg.oracle_grid_step, cfg.search_radius))
        return {"kind": "grid", "price": None if p is None else p.tolist()}
    blk = brute_force_block(econ, alloc, args.max_k, cfg.eta_value, rng_seed=cfg.seed)
    return {"kind": "block", "coalition": None if blk is None else blk.to_dict()}


COMMANDS = {"test": cmd_test, "block": cmd_block, "verify": cmd_verify, "params": cmd_params,
            "replica": cmd_replica, "convert": cmd_convert, "oracle": cmd_oracle}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--epsilon", type=float, default=0.05)
    common.add_argument("--eta", type=float, default=None)
    common.add_argument("--eta-bar", type=float, default=DEFAULT_ETA_BAR)
    common.add_argument("--k", type=int, default=None)
    common.add_argument("--mode", default="auto", choices=["auto", "strong", "plc"])
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--oracle-grid-step", type=float, default=1e-3)
    common.add_argument("--search-radius", type=float, default=None)
    common.add_argument("--output", default=None, help="write the JSON report here")

    parser = _Parser(prog="walrasian", description="Test approximate Walrasian allocations.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_, price=False, allocation=True):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("economy")
        if allocation:
            p.add_argument("allocation")
        if price:
            p.add_argument("price")
        return p

    add("test", "decide whether an allocation is epsilon-Walrasian")
    add("block", "search for a small blocking coalition")
    add("verify", "check both conditions at a given price", price=True)
    add("params", "print the derived constants", allocation=False)
    add("replica", "check equal treatment in a replica allocation").add_argument(
        "--n", type=int, default=None)
    add("convert", "check the utility-approximation notion at a price", price=True)
    orc = sub.add_parser("oracle", parents=[common], help="brute-force reference checks")
    orc.add_argument("kind", choices=["grid", "block"])
    orc.add_argument("economy")
    orc.add_argument("allocation")
    orc.add_argument("--max-k", type=int, default=2)
    return parser


def _configure_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _configure_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors exit with the input-error code; --help exits 0
        return int(exc.code or 0)
    try:
        cfg = RunConfig(epsilon=args.epsilon, eta=args.eta, eta_bar=args.eta_bar, tol=args.tol,
                        max_iters=args.max_iters, k=args.k, seed=args.seed, mode=args.mode,
                        oracle_grid_step=args.oracle_grid_step,
                        search_radius=args.search_radius, output=args.output)
        body = COMMANDS[args.command](args, cfg)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = io.dumps(io.report(args.command, body))
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
