"""Greedy gain calibration on the training manifest of a desk corpus."""

import argparse
import json
from pathlib import Path

from ise_asd.calibrate import calibrate_gains, load_training_manifest, matches_reference_shape, write_trace_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("corpus_dir", type=Path)
    ap.add_argument("--filters", type=int, default=4)
    ap.add_argument("--step", type=float, default=0.25)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    items = load_training_manifest(args.corpus_dir / "train.csv", seed=args.seed)

    def progress(k, gain, score):
        print(f"filter {k}: gain {gain:.2f}, mean ESTOI {score:.4f}", flush=True)

    run = calibrate_gains(items, size=args.filters, step=args.step, seed=args.seed, progress=progress)
    out = args.corpus_dir / "calibration"
    out.mkdir(exist_ok=True)
    write_trace_csv(run, out / "trace.csv")
    (out / "profile.json").write_text(json.dumps(run.profile.to_dict(), indent=2) + "\n")
    print(f"baseline {run.baseline_score:.4f} -> final {run.final_score:.4f}")
    print(f"gains {run.profile.gains}; audit {run.audit()}; reference shape {matches_reference_shape(run.profile)}")


if __name__ == "__main__":
    main()
