#!/usr/bin/env python3
"""Converts per-loading-date snapshots of reported totals into the event CSV.

Each input file is one loading date (LD). It holds the totals known on that
LD for every (location, feature, generation date) it mentions:

    location,feature,gd,value

``location`` and ``feature`` may be labels (state names, measure names);
they are mapped to 0-based indices in first-seen order and the maps are
written next to the output. ``gd`` must be an integer day index on the same
scale as the LD, which is parsed from the file name (``<prefix><ld>.csv``)
unless given with ``--ld-from-column``.

The event for (cell, ld) is the increase of the reported total since the
previous snapshot that mentioned the cell. Downward revisions cannot be
represented as nonnegative increments; they are clipped to zero and counted.

Acquiring the raw data (e.g. public COVID-19 or city open-data feeds) and
reshaping it into this snapshot layout is left to the user.
"""

from __future__ import annotations

import argparse
import csv
import re
import sys
from collections import defaultdict
from pathlib import Path


def parse_args(argv):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("snapshots", nargs="+", type=Path, help="snapshot CSV files, one per loading date")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--ld-pattern", default=r"(-?\d+)\.csv$", help="regex whose first group is the LD in the file name")
    p.add_argument("--ld-from-column", action="store_true", help="read the LD from an 'ld' column instead")
    return p.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    pattern = re.compile(args.ld_pattern)
    locations: dict[str, int] = {}
    features: dict[str, int] = {}
    # (loc, feat, gd) -> {ld: total}
    reported: dict[tuple[int, int, int], dict[int, float]] = defaultdict(dict)

    for path in args.snapshots:
        file_ld = None
        if not args.ld_from_column:
            m = pattern.search(path.name)
            if not m:
                print(f"convert_snapshots: error: cannot read an LD from {path.name}", file=sys.stderr)
                return 1
            file_ld = int(m.group(1))
        with path.open(newline="") as f:
            for line, row in enumerate(csv.DictReader(f), start=2):
                try:
                    loc = locations.setdefault(row["location"], len(locations))
                    feat = features.setdefault(row["feature"], len(features))
                    gd = int(row["gd"])
                    ld = int(row["ld"]) if args.ld_from_column else file_ld
                    value = float(row["value"])
                except (KeyError, ValueError) as e:
                    print(f"convert_snapshots: error: {path}:{line}: {e}", file=sys.stderr)
                    return 1
                if ld < gd:
                    print(f"convert_snapshots: error: {path}:{line}: ld {ld} before gd {gd}", file=sys.stderr)
                    return 1
                reported[(loc, feat, gd)][ld] = value

    events = []
    clipped = 0
    for (loc, feat, gd), by_ld in reported.items():
        previous = 0.0
        for ld in sorted(by_ld):
            delta = by_ld[ld] - previous
            if delta < 0:
                clipped += 1
                delta = 0.0
            else:
                previous = by_ld[ld]
            if delta > 0:
                events.append((loc, feat, gd, ld, delta))
    events.sort(key=lambda e: (e[3], e[2], e[0], e[1]))

    args.out.mkdir(parents=True, exist_ok=True)
    with (args.out / "events.csv").open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["location", "feature", "gd", "ld", "count"])
        for e in events:
            w.writerow([e[0], e[1], e[2], e[3], repr(e[4])])
    for name, mapping in (("locations.csv", locations), ("features.csv", features)):
        with (args.out / name).open("w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["index", "label"])
            for label, index in mapping.items():
                w.writerow([index, label])
    print(
        f"wrote {len(events)} events for {len(locations)} locations x {len(features)} features"
        f" ({clipped} downward revisions clipped) to {args.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
