import json

import numpy as np
import pytest

from ramanid.cli import main
from ramanid.dataset import load_dataset
from ramanid.nn.model import build_model, save_model, ArchSpec, ConvSpec
from ramanid.spectrum import Grid

TINY_ARCH = ArchSpec(conv=(ConvSpec(4, 5, 2), ConvSpec(8, 3, 2)), dense_width=16, dropout_rate=0.1)


def write_spectrum(path, name, rise=1.0, points=24):
    xs = np.linspace(100.0, 200.0, points)
    lines = [f"##NAMES={name}"]
    lines += [f"{float(x)!r}, {float(rise * x + (x / 50.0) ** 2)!r}" for x in xs]
    lines.append("##END=")
    path.write_text("\n".join(lines) + "\n")


def make_spectrum_dir(tmp_path, n_species=2, per=2):
    directory = tmp_path / "spectra"
    directory.mkdir()
    i = 0
    for s in range(n_species):
        for j in range(per):
            write_spectrum(directory / f"spec{i:02d}.txt", f"Mineral{s}", rise=1.0 + 0.2 * j)
            i += 1
    return directory


def grid_flags(points=16):
    return ["--grid-start", "100", "--grid-stop", "200", "--grid-points", str(points)]


def test_ingest_reports_counts(tmp_path, capsys):
    directory = make_spectrum_dir(tmp_path, n_species=2, per=2)
    out = tmp_path / "cache.npz"
    code = main(["ingest", "--data-dir", str(directory), "--out", str(out)] + grid_flags())
    captured = capsys.readouterr()
    assert code == 0
    assert "N=4 K=2" in captured.out
    assert out.exists()
    assert load_dataset(out).n_classes == 2


def test_ingest_empty_directory_fails_with_diagnostic(tmp_path, capsys):
    empty = tmp_path / "none"
    empty.mkdir()
    code = main(["ingest", "--data-dir", str(empty), "--out", str(tmp_path / "x.npz")] + grid_flags())
    captured = capsys.readouterr()
    assert code == 1
    assert captured.err.startswith("error:")
    assert "empty dataset" in captured.err


def test_ingest_mixed_valid_invalid_reports_skips(tmp_path, capsys):
    directory = make_spectrum_dir(tmp_path, n_species=2, per=1)
    (directory / "broken.txt").write_text("##NAMES=Broken\nnot a data line\n")
    code = main(["ingest", "--data-dir", str(directory), "--out", str(tmp_path / "c.npz")] + grid_flags())
    captured = capsys.readouterr()
    assert code == 0
    assert "N=2 K=2" in captured.out
    assert "skipped=1" in captured.out


def test_ingest_uses_environment_data_dir(tmp_path, capsys, monkeypatch):
    directory = make_spectrum_dir(tmp_path)
    monkeypatch.setenv("RAMANID_DATA_DIR", str(directory))
    code = main(["ingest", "--out", str(tmp_path / "env.npz")] + grid_flags())
    assert code == 0


def test_correct_writes_same_format(tmp_path, capsys):
    source = tmp_path / "raw.txt"
    write_spectrum(source, "Thing")
    out = tmp_path / "corrected.txt"
    code = main(["correct", "--input", str(source), "--method", "rubber_band", "--out", str(out)])
    assert code == 0
    text = out.read_text()
    assert text.startswith("##NAMES=Thing")
    assert text.rstrip().endswith("##END=")
    # corrected convex-ish signal: intensities near zero at the hull points
    code2 = main(["correct", "--input", str(out), "--method", "rubber_band",
                  "--out", str(tmp_path / "again.txt")])
    assert code2 == 0


def test_augment_preview_reports_sizes(tmp_path, capsys):
    directory = make_spectrum_dir(tmp_path, n_species=2, per=3)
    cache = tmp_path / "cache.npz"
    main(["ingest", "--data-dir", str(directory), "--out", str(cache)] + grid_flags())
    capsys.readouterr()
    code = main(["augment-preview", "--cache", str(cache), "--copies-per-sample", "2",
                 "--mixes-per-class", "1", "--seed", "3"])
    captured = capsys.readouterr()
    assert code == 0
    assert "original: N=6 K=2" in captured.out
    assert "augmented: N=20 K=2" in captured.out  # 6 * 3 + 1 * 2


def synth_cache(tmp_path, capsys, points=64):
    cache = tmp_path / "synth.npz"
    code = main(["synth", "--classes", "3", "--per-class", "4", "--severity", "0.5",
                 "--noise", "0.01", "--seed", "5", "--out-raw", str(cache),
                 "--grid-start", "100", "--grid-stop", "1900", "--grid-points", str(points)])
    capsys.readouterr()
    assert code == 0
    return cache


def test_train_default_arch_rejects_small_grid(tmp_path, capsys):
    cache = synth_cache(tmp_path, capsys, points=32)
    model_path = tmp_path / "model.npz"
    code = main(["train", "--cache", str(cache), "--out", str(model_path), "--epochs", "2",
                 "--batch-size", "8", "--validation-fraction", "0.2", "--seed", "1",
                 "--no-augment"])
    captured = capsys.readouterr()
    assert code == 1  # 32-point grid is too small for the default pyramid
    assert "error:" in captured.err


def test_train_with_arch_override_then_predict(tmp_path, capsys):
    cache = synth_cache(tmp_path, capsys, points=64)
    model_path = tmp_path / "model.npz"
    arch = '{"conv": [[4, 5, 2], [8, 3, 2]], "dense_width": 16, "dropout_rate": 0.1}'
    code = main(["train", "--cache", str(cache), "--out", str(model_path), "--epochs", "2",
                 "--batch-size", "8", "--validation-fraction", "0.2", "--seed", "1",
                 "--arch-json", arch, "--copies-per-sample", "1", "--mixes-per-class", "0"])
    captured = capsys.readouterr()
    assert code == 0, captured.err
    assert "seed=1" in captured.out
    assert model_path.exists()

    spectrum = tmp_path / "query.txt"
    write_spectrum(spectrum, "Query", points=40)
    code2 = main(["predict", "--model", str(model_path), "--spectrum", str(spectrum),
                  "--top", "2"])
    captured2 = capsys.readouterr()
    assert code2 == 0
    assert len(captured2.out.strip().split("\n")) == 2


def test_predict_outputs_ranked_lines(tmp_path, capsys):
    grid = Grid(100.0, 200.0, 32)
    model = build_model(32, 3, arch=TINY_ARCH, seed=0, class_names=["a", "b", "c"], grid=grid)
    model_path = tmp_path / "model.npz"
    save_model(model, model_path)
    spectrum = tmp_path / "sample.txt"
    write_spectrum(spectrum, "Unknown")

    code = main(["predict", "--model", str(model_path), "--spectrum", str(spectrum), "--top", "3"])
    captured = capsys.readouterr()
    assert code == 0
    lines = captured.out.strip().split("\n")
    assert len(lines) == 3
    probs = []
    for rank, line in enumerate(lines, start=1):
        fields = line.split()
        assert int(fields[0]) == rank
        assert fields[1] in {"a", "b", "c"}
        probs.append(float(fields[2]))
    assert sum(probs) == pytest.approx(1.0, abs=1e-6)
    assert probs == sorted(probs, reverse=True)

    code2 = main(["predict", "--model", str(model_path), "--spectrum", str(spectrum), "--top", "3"])
    second = capsys.readouterr()
    assert code2 == 0
    assert second.out == captured.out


def test_predict_unloadable_model_fails(tmp_path, capsys):
    bad = tmp_path / "bad.npz"
    np.savez(bad, junk=np.zeros(3))
    spectrum = tmp_path / "s.txt"
    write_spectrum(spectrum, "X")
    code = main(["predict", "--model", str(bad), "--spectrum", str(spectrum)])
    captured = capsys.readouterr()
    assert code == 1
    assert captured.err.startswith("error:")


def evaluate_config(tmp_path, runs=1):
    return {
        "synth": {"classes": 3, "per_class": 3, "baseline_severity": 0.5, "noise": 0.01,
                  "seed": 2, "grid": [100.0, 1900.0, 64]},
        "runs": runs,
        "top_ks": [1, 3],
        "base_seed": 4,
        "methods": [
            {"name": "knn-raw", "classifier": "knn"},
            {"name": "knn-rb", "classifier": "knn", "corrector": "rubber_band"},
        ],
    }


def test_evaluate_writes_table_and_report(tmp_path, capsys):
    config = tmp_path / "exp.json"
    config.write_text(json.dumps(evaluate_config(tmp_path)))
    out_dir = tmp_path / "reports"
    code = main(["evaluate", "--config", str(config), "--out-dir", str(out_dir)])
    captured = capsys.readouterr()
    assert code == 0
    assert "base_seed=4" in captured.out
    table = (out_dir / "report.tsv").read_text()
    assert table.count("\n") == 3  # header + 2 method rows
    payload = json.loads((out_dir / "report.json").read_text())
    assert [m["name"] for m in payload["methods"]] == ["knn-raw", "knn-rb"]


def test_evaluate_is_byte_identical_across_reruns(tmp_path, capsys):
    config = tmp_path / "exp.json"
    config.write_text(json.dumps(evaluate_config(tmp_path)))
    blobs = []
    for d in ("r1", "r2"):
        out_dir = tmp_path / d
        code = main(["evaluate", "--config", str(config), "--out-dir", str(out_dir),
                     "--runs", "2", "--seed", "9"])
        assert code == 0
        payload = json.loads((out_dir / "report.json").read_text())
        for method in payload["methods"]:
            method["ms_per_prediction"] = None  # timing is excluded from determinism
        blobs.append(json.dumps(payload, sort_keys=True))
    capsys.readouterr()
    assert blobs[0] == blobs[1]


def test_evaluate_malformed_config_exits_2(tmp_path, capsys):
    config = tmp_path / "broken.json"
    config.write_text("{ not json")
    code = main(["evaluate", "--config", str(config)])
    captured = capsys.readouterr()
    assert code == 2
    assert captured.err.startswith("error:")
    assert "line" in captured.err

    config2 = tmp_path / "nomethods.json"
    config2.write_text(json.dumps({"synth": {"classes": 2, "per_class": 2}, "methods": []}))
    assert main(["evaluate", "--config", str(config2)]) == 2
    capsys.readouterr()


def test_evaluate_bad_classifier_exits_2(tmp_path, capsys):
    config = tmp_path / "bad.json"
    payload = evaluate_config(tmp_path)
    payload["methods"][0]["classifier"] = "forest"
    config.write_text(json.dumps(payload))
    code = main(["evaluate", "--config", str(config)])
    captured = capsys.readouterr()
    assert code == 2
    assert captured.err.startswith("error:")


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
