import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from ise_asd.audio import Waveform, load_wav, write_wav
from ise_asd.cli import main
from ise_asd.synth import make_corpus, speech_shaped_noise, write_corpus

FS = 16000


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus = make_corpus(2, seed=31, duration=1.5)
    write_corpus(corpus, root)
    write_wav(root / "ssn.wav", speech_shaped_noise(6.0, FS, seed=4))
    return root, [u.name for u in corpus]


def _manifest(root, names, methods="unprocessed;unit;ise_asd", snrs="0;5", labels=True):
    lines = ["clean_path,vuv_path,noise_path,snr_db,methods"]
    for n in names:
        lab = f"{n}.lab" if labels else ""
        lines.append(f"{n}.wav,{lab},ssn.wav,{snrs},{methods}")
    path = root / f"manifest_{len(names)}_{methods.count(';')}_{int(labels)}.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


def test_mix_sidecar(workspace, tmp_path):
    root, names = workspace
    out = tmp_path / "mix.wav"
    assert main(["mix", str(root / f"{names[0]}.wav"), str(root / "ssn.wav"), "--snr", "0", "--out", str(out)]) == 0
    meta = json.loads(out.with_suffix(".json").read_text())
    assert abs(meta["achieved_snr_db"]) < 0.01
    assert meta["snr_convention"] == "global"
    assert len(load_wav(out)) == len(load_wav(root / f"{names[0]}.wav"))


def test_mix_missing_noise(workspace, tmp_path, capsys):
    root, names = workspace
    code = main(["mix", str(root / f"{names[0]}.wav"), str(tmp_path / "nope.wav"), "--snr", "0", "--out", str(tmp_path / "m.wav")])
    assert code == 2
    assert "nope.wav" in capsys.readouterr().err


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["mix"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1


def test_enhance_unit_identity(workspace, tmp_path):
    root, names = workspace
    out = tmp_path / "unit.wav"
    argv = ["enhance", str(root / f"{names[0]}.wav"), "--vuv", str(root / f"{names[0]}.lab")]
    assert main(argv + ["--profile", "unit", "--out", str(out), "--verify-identity"]) == 0
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["identity_max_error"] < 1e-6
    assert meta["vuv_source"] == "external-file"


def test_verify_identity_flags_real_profile(workspace, tmp_path):
    root, names = workspace
    out = tmp_path / "ise.wav"
    code = main(["enhance", str(root / f"{names[0]}.wav"), "--out", str(out), "--verify-identity"])
    assert code == 3


@pytest.mark.parametrize(
    "profile, gains",
    [("ise_asd", [10, 10, 4.5, 3.5, 2.5, 2, 1.75, 1.75, 1.5, 1.25]), ("gtf_f0", [5, 5, 4, 2.5])],
)
def test_enhance_profile_metadata(workspace, tmp_path, profile, gains):
    root, names = workspace
    out = tmp_path / f"{profile}.wav"
    pitch = tmp_path / "f0.csv"
    argv = ["enhance", str(root / f"{names[1]}.wav"), "--profile", profile, "--out", str(out), "--pitch-csv", str(pitch)]
    assert main(argv) == 0
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["profile"]["gains"] == gains
    assert meta["vuv_source"] == "detector"
    assert "scale_factor" in meta and "pitch" in meta
    assert pitch.read_text().startswith("frame_index,start_sec,voiced,f0_hz")


def test_enhance_pitch_unavailable(tmp_path, capsys):
    src = tmp_path / "silence.wav"
    write_wav(src, Waveform(np.zeros(FS), FS))
    lab = tmp_path / "silence.lab"
    lab.write_text("0 1.0 V\n")
    out = tmp_path / "out.wav"
    assert main(["enhance", str(src), "--vuv", str(lab), "--out", str(out)]) == 3
    assert not load_wav(out).samples.any()
    assert "pitch unavailable" in capsys.readouterr().err


def test_enhance_bad_labels(workspace, tmp_path):
    root, names = workspace
    lab = tmp_path / "gap.lab"
    lab.write_text("0 0.2 V\n")
    assert main(["enhance", str(root / f"{names[0]}.wav"), "--vuv", str(lab), "--out", str(tmp_path / "o.wav")]) == 3


def test_enhance_unknown_profile(workspace, tmp_path):
    root, names = workspace
    assert main(["enhance", str(root / f"{names[0]}.wav"), "--profile", "apes", "--out", str(tmp_path / "o.wav")]) == 1


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_evaluate_reports(workspace, tmp_path):
    root, names = workspace
    manifest = _manifest(root, names)
    out = tmp_path / "eval"
    assert main(["evaluate", "--manifest", str(manifest), "--out-dir", str(out), "--seed", "7"]) == 0
    records = _read(out / "records.csv")
    assert len(records) == 2 * 2 * 3
    assert all(float(r["delta_estoi"]) == 0.0 for r in records if r["method"] == "unit")
    assert list(records[0]) == ["utterance", "noise", "snr_db", "method", "estoi", "delta_estoi", "sti_category"]
    anova = _read(out / "anova.csv")
    assert list(anova[0]) == ["noise", "snr_db", "metric", "f_stat", "p_value"]
    assert {r["snr_db"] for r in anova} == {"0", "5"}
    assert len(_read(out / "summary.csv")) == 2 * 3
    assert _read(out / "failures.csv") == []


def test_evaluate_deterministic_and_parallel(workspace, tmp_path):
    root, names = workspace
    manifest = _manifest(root, names[:1], methods="unprocessed;ise_asd", labels=False)
    outs = []
    for i, jobs in enumerate(("1", "1", "2")):
        out = tmp_path / f"run{i}"
        assert main(["evaluate", "--manifest", str(manifest), "--out-dir", str(out), "--jobs", jobs]) == 0
        outs.append(out)
    for name in ("records.csv", "summary.csv", "anova.csv"):
        first = (outs[0] / name).read_bytes()
        assert all((o / name).read_bytes() == first for o in outs[1:])


def test_evaluate_seed_changes_results(workspace, tmp_path):
    root, names = workspace
    manifest = _manifest(root, names[:1], methods="unprocessed", snrs="0", labels=False)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["evaluate", "--manifest", str(manifest), "--out-dir", str(a), "--seed", "1"])
    main(["evaluate", "--manifest", str(manifest), "--out-dir", str(b), "--seed", "2"])
    assert (a / "records.csv").read_bytes() != (b / "records.csv").read_bytes()


def test_evaluate_partial_failure(workspace, tmp_path):
    root, names = workspace
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "stereo.wav").write_bytes((root / f"{names[0]}.wav").read_bytes()[:60])
    (bad / "ssn.wav").write_bytes((root / "ssn.wav").read_bytes())
    (bad / "ok.wav").write_bytes((root / f"{names[0]}.wav").read_bytes())
    (bad / "m.csv").write_text(
        "clean_path,vuv_path,noise_path,snr_db,methods\n"
        "ok.wav,,ssn.wav,0,unprocessed\n"
        "stereo.wav,,ssn.wav,0,unprocessed\n"
    )
    out = tmp_path / "out"
    assert main(["evaluate", "--manifest", str(bad / "m.csv"), "--out-dir", str(out)]) == 4
    assert len(_read(out / "records.csv")) == 1
    assert len(_read(out / "failures.csv")) == 1


def test_evaluate_manifest_errors(workspace, tmp_path):
    root, names = workspace
    m = root / "badmethod.csv"
    m.write_text(f"clean_path,vuv_path,noise_path,snr_db,methods\n{names[0]}.wav,,ssn.wav,0,apes\n")
    assert main(["evaluate", "--manifest", str(m), "--out-dir", str(tmp_path / "x")]) == 1
    m = root / "missing.csv"
    m.write_text("clean_path,vuv_path,noise_path,snr_db,methods\nghost.wav,,ssn.wav,0,unprocessed\n")
    assert main(["evaluate", "--manifest", str(m), "--out-dir", str(tmp_path / "y")]) == 2


def test_calibrate_command(workspace, tmp_path):
    root, names = workspace
    m = root / "train.csv"
    m.write_text("clean_path,noise_path,snr_db\n" + f"{names[0]}.wav,ssn.wav,0\n")
    out = tmp_path / "cal"
    assert main(["calibrate", "--manifest", str(m), "--filters", "1", "--step", "2.25", "--out-dir", str(out)]) == 0
    profile = json.loads((out / "profile.json").read_text())
    assert profile["name"] == "calibrated" and len(profile["gains"]) == 1
    trace = _read(out / "trace.csv")
    assert [float(r["gain"]) for r in trace] == [1.0, 3.25, 5.5, 7.75, 10.0]
    report = json.loads((out / "calibration.json").read_text())
    assert report["final_mean_estoi"] >= report["baseline_mean_estoi"]


def test_calibrate_impossible(tmp_path):
    write_wav(tmp_path / "s.wav", Waveform(np.zeros(FS), FS))
    write_wav(tmp_path / "n.wav", Waveform(np.random.default_rng(0).standard_normal(FS) * 0.1, FS))
    (tmp_path / "s.lab").write_text("0 1.0 U\n")
    (tmp_path / "m.csv").write_text("clean_path,noise_path,snr_db\ns.wav,n.wav,0\n")
    assert main(["calibrate", "--manifest", str(tmp_path / "m.csv"), "--filters", "1", "--out-dir", str(tmp_path / "o")]) == 3


def test_config_file_flags_win(workspace, tmp_path):
    root, names = workspace
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 3}))
    m = _manifest(root, names[:1], methods="unprocessed", snrs="0", labels=False)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    main(["--config", str(cfg), "evaluate", "--manifest", str(m), "--out-dir", str(a)])
    main(["evaluate", "--manifest", str(m), "--out-dir", str(b), "--seed", "3"])
    main(["--config", str(cfg), "evaluate", "--manifest", str(m), "--out-dir", str(c), "--seed", "0"])
    assert (a / "records.csv").read_bytes() == (b / "records.csv").read_bytes()
    assert (a / "records.csv").read_bytes() != (c / "records.csv").read_bytes()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ise_asd", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "evaluate" in res.stdout
