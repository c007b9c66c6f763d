"""Command line entry point: ``vm1d2v run | plot | validate-config``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .errors import VMError
from .runner import emit_plot_data, run


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vm1d2v", description="1.5D Vlasov-Maxwell runs and diagnostics")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a configured run")
    r.add_argument("--config", required=True, help="INI config file")
    r.add_argument("--out", help="output directory (overrides [run] output_dir)")
    r.add_argument("--threads", type=int, default=None, help="worker threads for the sweeps (default: all cores)")
    r.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one config value; repeatable")
    r.add_argument("-v", "--verbose", action="store_true")

    pl = sub.add_parser("plot", help="write columnar plot data from a finished run")
    pl.add_argument("run_dir")
    pl.add_argument("quantity", help="diagnostics column, total_energy, seps_sup:<eps>, <field>_xt, f_xv1 or f_xv2")
    pl.add_argument("--output", help="output file (default: <run_dir>/plot_<quantity>.dat)")

    v = sub.add_parser("validate-config", help="parse a config without running it")
    v.add_argument("--config", required=True)
    v.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            config = load_config(args.config, args.override)
            return run(config, args.out, args.threads)
        if args.command == "plot":
            path = emit_plot_data(args.run_dir, args.quantity, args.output)
            print(path)
            return 0
        config = load_config(args.config, args.override)
        g = config.grid
        print(f"ok: mode {config.mode}, grid {g.n_x} x {g.n_v1} x {g.n_v2}, dt {config.dt:g}, {config.n_steps} steps")
        return 0
    except VMError as exc:
        print(f"error ({exc.reason}): {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
