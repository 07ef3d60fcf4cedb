#!/usr/bin/env python3
"""Fetch the large UCI benchmark datasets (eeg, phishing) and convert them to
the plain CSV layout the registry expects (features..., label-last).

Both ship as ARFF inside zip archives on the UCI repository. Run with network
access, or download the archives by hand and point --from-file at them.
After fetching, re-run scripts/make_datasets.py to refresh the registry.
"""

import argparse
import io
import os
import sys
import urllib.request
import zipfile

SOURCES = {
    "eeg": {
        "url": "https://archive.ics.uci.edu/static/public/264/eeg+eye+state.zip",
        "member_hint": ".arff",
        "expect_cols": 15,  # 14 features + eyeDetection label
    },
    "phishing": {
        "url": "https://archive.ics.uci.edu/static/public/327/phishing+websites.zip",
        "member_hint": ".arff",
        "expect_cols": 31,  # 30 features + Result label
    },
}


def arff_data_rows(text: str):
    """Yield comma-split data rows of a dense ARFF document."""
    in_data = False
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if line.lower().startswith("@data"):
            in_data = True
            continue
        if line.startswith("@"):
            continue
        if in_data:
            yield [tok.strip().strip("'\"") for tok in line.split(",")]


def convert_arff(text: str, out_path: str, expect_cols: int) -> int:
    rows = 0
    with open(out_path + ".tmp", "w") as out:
        for row in arff_data_rows(text):
            if len(row) != expect_cols:
                raise SystemExit(f"unexpected row width {len(row)} (wanted {expect_cols})")
            out.write(",".join(row) + "\n")
            rows += 1
    os.replace(out_path + ".tmp", out_path)
    return rows


def arff_from_zip(blob: bytes, member_hint: str) -> str:
    with zipfile.ZipFile(io.BytesIO(blob)) as zf:
        members = [m for m in zf.namelist() if m.lower().endswith(member_hint)]
        if not members:
            raise SystemExit(f"no {member_hint} member in archive; contents: {zf.namelist()}")
        # phishing's archive carries the full 'Training Dataset.arff' plus old variants
        members.sort(key=lambda m: ("old" in m.lower(), m))
        return zf.read(members[0]).decode("utf-8", errors="replace")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("task", choices=sorted(SOURCES) + ["all"])
    parser.add_argument("--out", default="data")
    parser.add_argument("--from-file", help="local zip or arff instead of downloading")
    args = parser.parse_args()
    tasks = sorted(SOURCES) if args.task == "all" else [args.task]
    if args.from_file and len(tasks) != 1:
        raise SystemExit("--from-file converts a single task")
    os.makedirs(args.out, exist_ok=True)
    for task in tasks:
        spec = SOURCES[task]
        if args.from_file:
            with open(args.from_file, "rb") as fh:
                blob = fh.read()
        else:
            print(f"downloading {spec['url']} ...")
            try:
                with urllib.request.urlopen(spec["url"], timeout=60) as resp:
                    blob = resp.read()
            except OSError as exc:
                raise SystemExit(
                    f"download failed ({exc}); fetch the archive manually and re-run with --from-file"
                )
        if blob[:2] == b"PK":
            text = arff_from_zip(blob, spec["member_hint"])
        else:
            text = blob.decode("utf-8", errors="replace")
        out_path = os.path.join(args.out, f"{task}.csv")
        rows = convert_arff(text, out_path, spec["expect_cols"])
        print(f"{task}: wrote {rows} rows to {out_path}")
    print("now refresh the registry: python3 scripts/make_datasets.py")
    return 0


if __name__ == "__main__":
    sys.exit(main())
