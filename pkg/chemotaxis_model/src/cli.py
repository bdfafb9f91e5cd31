"""
Command line: simulate one scenario, sweep a list of scenarios, or verify
the discrete properties on a scenario's grid.

Exit codes: 0 success, 2 configuration error, 3 invariant violation (or a
failed verify check), 4 solver failure.
"""

import argparse
import logging
import sys
from pathlib import Path

from src.config import load_scenario, load_sweep_list
from src.errors import ChemotaxisError
from src.runner import run_scenario, sweep
from src.verification import verify

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='chemotaxis',
        description="Chemotaxis-consumption simulator with local sensing and its verification harness",
    )
    parser.add_argument('--verbose', action='store_true', help="debug logging")
    commands = parser.add_subparsers(dest='command', required=True)

    simulate = commands.add_parser('simulate', help="run one scenario to t_end")
    simulate.add_argument('config', type=Path)
    simulate.add_argument('--out', type=Path, default=Path('results'))
    simulate.add_argument('--cadence', type=int, default=None, help="steps between diagnostics records")
    simulate.add_argument('--tau', type=float, default=None, help="override the time step")
    simulate.add_argument('--plot', action='store_true', help="also write trajectory.png")

    sweep_cmd = commands.add_parser('sweep', help="run every scenario in a list file")
    sweep_cmd.add_argument('listfile', type=Path)
    sweep_cmd.add_argument('--out', type=Path, default=Path('results/sweep'))
    sweep_cmd.add_argument('--workers', type=int, default=1)
    sweep_cmd.add_argument('--db', type=Path, default=None, help="also store results in this SQLite file")

    verify_cmd = commands.add_parser('verify', help="run the property suite on a scenario's grid")
    verify_cmd.add_argument('config', type=Path)
    verify_cmd.add_argument('--samples', type=int, default=1000, help="random fields per inequality")
    return parser


def cmd_simulate(args) -> int:
    cfg = load_scenario(args.config).with_overrides(tau=args.tau, cadence=args.cadence)
    result = run_scenario(cfg, args.out, plot=args.plot)
    s = result.summary
    print(f"\n=== {s.name} ({s.gamma}, {s.cells} cells, tau={s.tau:.3g}) ===")
    print(f"||u - M||_2 at t={s.t_end:g}:  {s.final_u_dev_l2:.3e}")
    print(f"||v||_H1 at t={s.t_end:g}:     {s.final_v_h1:.3e}")
    print(f"Liapunov monotone:     {s.liapunov_monotone}")
    print(f"vL1 decay rate:        {s.vl1_rate:.4f} (M = {s.M:g})")
    print(f"Outputs written to {args.out}")
    return 0


def cmd_sweep(args) -> int:
    table = sweep(load_sweep_list(args.listfile), args.out, workers=args.workers, db_path=args.db)
    print(f"\n=== Sweep of {len(table)} scenarios ===")
    for row in table.itertuples():
        print(f"  {row.name:24s} {row.status:20s} L monotone={row.liapunov_monotone}")
    print(f"Summary written to {args.out / 'sweep_summary.csv'}")
    failed = int((table['status'] != 'ok').sum())
    if failed:
        logger.warning("%d of %d runs failed, see the status column", failed, len(table))
    return 0


def cmd_verify(args) -> int:
    cfg = load_scenario(args.config)
    results = verify(cfg, samples=args.samples)
    print(f"\n=== Verification of {cfg.name} ===")
    for r in results:
        mark = 'PASS' if r.passed else 'FAIL'
        print(f"  {mark}  {r.name:34s} {r.value: .3e} (<= {r.threshold:.1e})")
    n_failed = sum(not r.passed for r in results)
    print(f"{len(results) - n_failed}/{len(results)} checks passed")
    return 0 if n_failed == 0 else 3


COMMANDS = {
    'simulate': cmd_simulate,
    'sweep': cmd_sweep,
    'verify': cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        return COMMANDS[args.command](args)
    except ChemotaxisError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code


if __name__ == '__main__':
    sys.exit(main())
