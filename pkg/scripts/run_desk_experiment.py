"""Run the evaluation manifest and print mean ESTOI / delta-ESTOI per cell.

Expects a directory produced by make_desk_corpus.py.
"""

import argparse
import csv
from pathlib import Path

from ise_asd.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("corpus_dir", type=Path)
    ap.add_argument("--out-dir", type=Path, default=None)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = args.out_dir or args.corpus_dir / "reports"

    code = cli_main([
        "evaluate", "--manifest", str(args.corpus_dir / "evaluate.csv"),
        "--out-dir", str(out), "--jobs", str(args.jobs), "--seed", str(args.seed),
    ])
    with open(out / "summary.csv", newline="") as fh:
        summary = list(csv.DictReader(fh))
    print(f"{'snr':>5} {'method':<12} {'estoi':>8} {'delta':>8} {'n':>4}")
    for row in sorted(summary, key=lambda r: (float(r["snr_db"]), r["method"])):
        print(f"{row['snr_db']:>5} {row['method']:<12} {float(row['estoi_mean']):8.4f} "
              f"{float(row['delta_estoi_mean']):+8.4f} {row['count']:>4}")
    with open(out / "anova.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            print(f"ANOVA {row['noise']} {row['snr_db']} dB: F = {row['f_stat']}, p = {row['p_value']}")
    raise SystemExit(code)


if __name__ == "__main__":
    main()
