#!/usr/bin/env python3
"""Run the three built-in scenarios end to end and collect all artifacts.

Usage: python scripts/run_scenarios.py [--out OUT_DIR] [--no-verify]

Writes per-scenario exports (ego.csv, obstacle.csv, meta.json), a residual
sweep for diagnosis, and, when the figures package is installed, both
figure kinds per scenario.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from lanechange.cli import main as lanechange_main


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="out")
    parser.add_argument("--no-verify", action="store_true",
                        help="skip the transcription cross-check (faster)")
    args = parser.parse_args()
    out_root = Path(args.out)

    try:
        from figures.cli import main as figures_main
    except ImportError:
        figures_main = None
        print("figures package not installed; skipping plots")

    for name in ("scenario1", "scenario2", "scenario3"):
        run_dir = out_root / name
        run_args = ["run", name, "--out", str(run_dir)]
        if not args.no_verify:
            run_args.append("--verify")
        code = lanechange_main(run_args)
        if code != 0:
            return code
        lanechange_main(["sweep", name, "--out", str(run_dir / "sweep")])

        meta = json.loads((run_dir / "meta.json").read_text())
        clearance = meta["clearance"]
        print(f"  min rect gap {clearance['vehicles'][0]['min_rect_gap']:+.3f} m, "
              f"{clearance['total_violations']} violating samples")

        if figures_main is not None:
            for kind in ("snapshot", "postime"):
                figures_main([str(run_dir), "--kind", kind,
                              "--out", str(run_dir / f"{kind}.png")])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
