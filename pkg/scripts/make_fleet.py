"""Write a synthetic crash fleet (decks, results.csv, run.cfg) to a directory."""

from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path

from crashmine.synth import crash_fleet, dedup_fleet, write_fleet

log = logging.getLogger("make_fleet")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("directory", type=Path)
    ap.add_argument("--kind", choices=("crash", "dedup"), default="crash")
    ap.add_argument("--sims", type=int, default=30)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    if args.kind == "crash":
        fleet = crash_fleet(n_sims=args.sims, seed=args.seed)
    else:
        fleet = dedup_fleet(n_sims=args.sims, seed=args.seed)
    cfg = write_fleet(fleet, args.directory)
    truth = {k: v for k, v in fleet.truth.items() if k != "classes"}
    (args.directory / "truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n",
                                               encoding="utf-8")
    log.info("wrote %d decks and %s", len(fleet.decks), cfg)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
