"""Write a synthetic desk-scale corpus, an SSN recording and two manifests.

Outputs in OUT_DIR:
  <name>.wav / <name>.lab   utterances with voicing labels
  ssn.wav                   speech-shaped noise
  evaluate.csv              manifest for `ise-asd evaluate`
  train.csv                 manifest for `ise-asd calibrate`
"""

import argparse
from pathlib import Path

from ise_asd.audio import write_wav
from ise_asd.synth import make_corpus, speech_shaped_noise, write_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--train-count", type=int, default=5)
    ap.add_argument("--duration", type=float, default=2.5)
    ap.add_argument("--seed", type=int, default=2026)
    args = ap.parse_args()

    test = make_corpus(args.count, seed=args.seed, duration=args.duration)
    train = make_corpus(args.train_count, seed=args.seed + 1, duration=args.duration)
    write_corpus(test + train, args.out_dir)
    write_wav(args.out_dir / "ssn.wav", speech_shaped_noise(60.0, seed=args.seed))

    rows = ["clean_path,vuv_path,noise_path,snr_db,methods"]
    rows += [f"{u.name}.wav,{u.name}.lab,ssn.wav,-10;-5;0;5,unprocessed;gtf_f0;ise_asd" for u in test]
    (args.out_dir / "evaluate.csv").write_text("\n".join(rows) + "\n")

    rows = ["clean_path,noise_path,snr_db"]
    rows += [f"{u.name}.wav,ssn.wav,{snr}" for u in train for snr in (-5, 0, 5)]
    (args.out_dir / "train.csv").write_text("\n".join(rows) + "\n")
    print(f"wrote {len(test)} test and {len(train)} training utterances to {args.out_dir}")


if __name__ == "__main__":
    main()
