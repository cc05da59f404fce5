"""Command-line entry point.

    dprtfl simulate --config scenario_clean.cfg --out runs/clean
    dprtfl sweep --config scenario_clean.cfg --epsilons 0.1,1,10 --out runs/sweep
    dprtfl verify-audit runs/clean/audit_manifold.log

Exit codes: 0 success, 1 invalid config or arguments, 2 runtime failure
(partial outputs are still written), 3 audit chain break.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, tcm
from .config import SimConfig, load_config
from .errors import InvalidConfigError, SimulationError
from .export import sweep_summary, write_outputs
from .ldp import PrivacySpec
from .sim import run

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHAIN = 0, 1, 2, 3

log = logging.getLogger("dprtfl")


def _parse_epsilons(text: str) -> list[float]:
    try:
        eps = [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad epsilon list: {text!r}") from None
    if not eps:
        raise argparse.ArgumentTypeError("need at least one epsilon")
    return eps


def _resolve_config(args) -> SimConfig:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.ebcd_rollback:
        changes["ebcd_rollback"] = True
    if args.rollback_depth is not None:
        changes["rollback_depth"] = args.rollback_depth
    return cfg.replace(**changes) if changes else cfg


def _simulate_into(cfg: SimConfig, out_dir: Path) -> tuple[int, object]:
    try:
        result = run(cfg)
    except SimulationError as exc:
        log.error("%s", exc)
        if exc.partial is not None:
            write_outputs(cfg, exc.partial, out_dir)
        return EXIT_RUNTIME, exc.partial
    write_outputs(cfg, result, out_dir)
    if result.stop_reason != "completed":
        log.warning("run ended early: %s", result.stop_reason)
    return EXIT_OK, result


def cmd_simulate(args) -> int:
    try:
        cfg = _resolve_config(args)
    except InvalidConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code, result = _simulate_into(cfg, Path(args.out))
    if result is not None and result.history:
        last = result.history[-1]
        print(f"{len(result.history)} rounds; final accuracy={last.accuracy:.4f} f1={last.f1:.4f}; "
              f"outputs in {args.out}")
    return code


def cmd_sweep(args) -> int:
    try:
        cfg = _resolve_config(args)
    except InvalidConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    rows, failed = [], False
    for eps in args.epsilons:
        try:
            p = cfg.privacy
            sub_cfg = cfg.replace(privacy=PrivacySpec(epsilon=eps, delta=p.delta, clip_bound=p.clip_bound, enabled=True))
        except InvalidConfigError as exc:
            rows.append([eps, None, None, None, None, f"invalid: {exc}"])
            failed = True
            continue
        code, result = _simulate_into(sub_cfg, out / f"eps_{eps!r}")
        if code != EXIT_OK or result is None or not result.history:
            rows.append([eps, None, None, None, None, "failed"])
            failed = True
            continue
        last = result.history[-1]
        mean_sigma = float(np.mean([h.mean_noise_sigma for h in result.history]))
        rows.append([eps, last.accuracy, last.f1, last.auc, mean_sigma, "ok"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep_summary.csv").write_text(sweep_summary(rows), encoding="utf-8", newline="")
    print(f"sweep over {len(args.epsilons)} epsilon values written to {out}")
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_verify_audit(args) -> int:
    path = Path(args.manifold)
    if not path.is_file():
        print(f"error: no such file: {path}", file=sys.stderr)
        return EXIT_CONFIG
    count, bad = tcm.audit_file(path)
    if count == 0:
        print("warning: audit log is empty (vacuously valid)", file=sys.stderr)
        return EXIT_OK
    if bad is not None:
        print(f"chain broken at entry {bad}")
        return EXIT_CHAIN
    print(f"chain valid: {count} entries")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dprtfl", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("--config", required=True, help="config file or bundled scenario name")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override run.master_seed")
        p.add_argument("--ebcd-rollback", action="store_true", help="roll back the global model on EBCD alerts")
        p.add_argument("--rollback-depth", type=int, help="rounds to step back on recovery (default 1)")

    p = sub.add_parser("simulate", help="run one scenario and export per-round CSVs")
    run_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="repeat a scenario over several epsilon values")
    run_flags(p)
    p.add_argument("--epsilons", required=True, type=_parse_epsilons, help="comma-separated, e.g. 0.1,1,10")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-audit", help="check the hash chain of an exported audit log")
    p.add_argument("manifold")
    p.set_defaults(func=cmd_verify_audit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
