"""Command line: ``hiopt {run,pack,xi,params,plot}``.

Exit codes: 0 success, 2 bad usage or configuration, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .analysis import packing_report
from .objectives import OBJECTIVE_NAMES, get_objective
from .optimizers import OPTIMIZERS, default_params
from .partition import SemiMetric

log = logging.getLogger("hiopt")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on its own; raise instead so main() owns the exit path
    def error(self, message):
        self.print_usage(sys.stderr)
        raise harness.ConfigError(f"{self.prog}: {message}")


def _float_list(raw: str) -> list[float]:
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {raw!r}") from None


def _budget_list(raw: str) -> tuple[int, ...]:
    try:
        return tuple(harness._parse_budget(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integer budgets, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hiopt", description="Optimistic tree search for noisy black-box maximization.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="seeded regret experiment, written as CSV")
    r.add_argument("--config", type=Path, help="key=value file; flags below override it")
    r.add_argument("--objective", choices=OBJECTIVE_NAMES)
    r.add_argument("--grid-file", help="two-column x,f CSV for the custom-grid objective")
    r.add_argument("--sigma", type=float)
    r.add_argument("--truncation", type=float, help="noise is truncated to +-this (default 1)")
    r.add_argument("--optimizer", choices=OPTIMIZERS)
    r.add_argument("--n", type=_budget_list, help="comma-separated ascending budgets")
    r.add_argument("--reps", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="results CSV (default: stdout)")
    r.add_argument("--k", type=int)
    r.add_argument("--h-max", type=int)
    r.add_argument("--delta", type=float)
    r.add_argument("--K", type=int)
    r.add_argument("--no-reuse", action="store_true", help="do not inherit the middle child's samples")
    r.add_argument("--dump-tree", help="directory for per-run tree dumps")
    r.add_argument("--L", type=float, help="stodoo metric constant (default 144)")
    r.add_argument("--alpha", type=float, help="stodoo metric exponent (default 2)")
    r.add_argument("--no-timing", action="store_true", help="write ms=0 so reruns are byte-identical")
    r.add_argument("--threads", type=int, help=f"worker threads (default ${harness.THREADS_ENV} or CPU count)")

    k = sub.add_parser("pack", help="packing-number estimate of the near-optimality dimension")
    k.add_argument("--objective", choices=OBJECTIVE_NAMES, required=True)
    k.add_argument("--grid-file")
    k.add_argument("--alpha", type=float, required=True)
    k.add_argument("--L", type=float, default=1.0)
    k.add_argument("--nu", type=float, default=1.0 / 3.0)
    k.add_argument("--eps-list", type=_float_list, default=[0.1, 0.01, 0.001])
    k.add_argument("--grid", type=int, default=10**7, help="evaluation grid size (>= 1e5)")
    k.add_argument("--out", help="CSV path (default: stdout)")

    x = sub.add_parser("xi", help="how often every estimate stays inside its confidence width")
    x.add_argument("--runs", type=int, default=1000)
    x.add_argument("--n", type=int, default=2000)
    x.add_argument("--sigma", type=float, default=0.1)
    x.add_argument("--objective", choices=OBJECTIVE_NAMES, default="two-sine")
    x.add_argument("--seed", type=int, default=0)

    pa = sub.add_parser("params", help="print the default StoSOO parameters for a budget")
    pa.add_argument("--n", type=int, required=True)

    pl = sub.add_parser("plot", help="log-log regret chart (SVG) from results CSVs")
    pl.add_argument("--input", nargs="+", required=True, help="one results CSV per line in the chart")
    pl.add_argument("--out", required=True)
    pl.add_argument("--title")
    return p


def _cmd_run(args) -> int:
    flags = dict(
        objective=args.objective,
        grid_file=args.grid_file,
        sigma=args.sigma,
        truncation=args.truncation,
        optimizer=args.optimizer,
        budgets=args.n,
        repetitions=args.reps,
        base_seed=args.seed,
        out=args.out,
        k=args.k,
        h_max=args.h_max,
        delta=args.delta,
        K=args.K,
        reuse=False if args.no_reuse else None,
        dump_tree=args.dump_tree,
        L=args.L,
        alpha=args.alpha,
        timing=False if args.no_timing else None,
    )
    if args.config is not None:
        try:
            config = harness.load_config(args.config, **flags)
        except OSError as exc:
            raise harness.ConfigError(f"cannot read config: {exc}") from None
    else:
        config = harness.RunConfig(**{k: v for k, v in flags.items() if v is not None}).validate()
    result = harness.run_experiment(config, threads=args.threads)
    if config.out:
        harness.emit_csv(result, config.out)
        for n, (mean, std) in result.summary().items():
            log.info("n=%d mean regret %.4g (std %.3g)", n, mean, std)
    else:
        sys.stdout.write(harness.format_csv(result))
    return 0


def _cmd_pack(args) -> int:
    if args.objective == "custom-grid" and not args.grid_file:
        raise harness.ConfigError("objective custom-grid needs --grid-file")
    try:
        metric = SemiMetric(args.L, args.alpha)
        obj = get_objective(args.objective, path=args.grid_file)
        report = packing_report(obj, metric, args.eps_list, args.nu, args.grid)
    except ValueError as exc:
        raise harness.ConfigError(str(exc)) from None
    text = report.to_csv()
    if args.out:
        Path(args.out).write_text(text)
        print(f"fitted_exponent={report.fitted_exponent!r}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_xi(args) -> int:
    s = harness.xi_monte_carlo(args.runs, args.n, args.sigma, args.seed, args.objective)
    print(f"runs={s.runs} holds={s.holds} fraction={s.fraction!r} delta={s.delta!r} target={s.target!r}")
    return 0


def _cmd_params(args) -> int:
    try:
        p = default_params(args.n)
    except ValueError as exc:
        raise harness.ConfigError(str(exc)) from None
    print(f"k={p.k}")
    print(f"h_max={p.h_max}")
    print(f"delta={p.delta!r}")
    print(f"K={p.K}")
    return 0


def _cmd_plot(args) -> int:
    out = harness.plot_regret(args.input, args.out, args.title)
    log.info("wrote %s", out)
    return 0


_COMMANDS = {"run": _cmd_run, "pack": _cmd_pack, "xi": _cmd_xi, "params": _cmd_params, "plot": _cmd_plot}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except harness.ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        return _COMMANDS[args.command](args)
    except harness.ConfigError as exc:
        print(f"hiopt {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure: report, do not dump a traceback
        log.debug("traceback", exc_info=True)
        print(f"hiopt {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
