"""``cpcli``: run a distance scan or a discrete-mode convergence study.

Exit codes: 0 success, 2 invalid configuration, 3 at least one row (or the
convergence reference) did not converge.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .scenario import ScenarioError, convergence_study, load_config, manifest_text, run_scenario
from .shift import ShiftConvergenceError

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 2, 3

log = logging.getLogger("cpcli")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpcli", description=__doc__.splitlines()[0])
    p.add_argument("--config", required=True, help="INI scenario file")
    p.add_argument("--out", required=True, help="output directory (created if missing)")
    p.add_argument("--mode", choices=("scan", "convergence"), default="scan")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for the scan")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.jobs < 1:
        log.error("--jobs must be >= 1")
        return EXIT_INVALID
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        out.mkdir(parents=True, exist_ok=True)
        if args.mode == "scan":
            result = run_scenario(cfg, jobs=args.jobs)
            (out / "results.csv").write_text(result.to_csv(), encoding="utf-8")
            extra = {
                "rows": len(result.rows),
                "nonconverged_rows": sum(not ok for ok in result.ok),
            }
            extra.update({f"row.{i}": d for i, d in enumerate(result.diagnostics)})
            (out / "manifest.txt").write_text(manifest_text(cfg, "scan", result.wall_time, extra), encoding="utf-8")
            log.info("wrote %d rows to %s", len(result.rows), out / "results.csv")
            return EXIT_OK if result.all_converged else EXIT_NONCONVERGED
        try:
            study = convergence_study(cfg)
        except ShiftConvergenceError as exc:
            log.error("continuum reference did not converge: %s", exc)
            return EXIT_NONCONVERGED
        (out / "convergence.csv").write_text(study.to_csv(), encoding="utf-8")
        extra = {
            "fitted_order": f"{study.fitted_order:.6g}",
            "monotone_tail": int(study.monotone_tail),
            "grid": cfg.convergence.grid,
        }
        extra.update({f"note.{i}": n for i, n in enumerate(study.warnings)})
        (out / "manifest.txt").write_text(manifest_text(cfg, "convergence", study.wall_time, extra), encoding="utf-8")
        return EXIT_OK
    except ScenarioError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
