"""End-to-end command line tests, small configs plus one desk-scale pass."""

import json
import subprocess
import sys
from types import SimpleNamespace

import numpy as np
import pytest

from twoway import cli, metapath
from twoway.community import augment, load_partition
from twoway.netcore import F, M, R, load_network
from twoway.predictors import Standardizer

SMALL_CONFIG = dict(
    node_count=500,
    clusters_r=2,
    clusters_m=2,
    p_in_r=0.05,
    p_out_r=0.001,
    p_in_m=0.045,
    p_out_m=0.001,
    membership_correlation=0.9,
    f_edge_count=1200,
    alpha=-1.0,
    beta_cluster=3.0,
    beta_embed=0.8,
    seed=3,
    f_hub_bias=0.6,
)


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    config_path = root / "gen.json"
    config_path.write_text(json.dumps(SMALL_CONFIG))
    data = root / "data"
    assert cli.main(["gen", "--config", str(config_path), "--out", str(data)]) == 0
    parts = root / "parts"
    manifest = str(data / "manifest.json")
    assert cli.main(["cluster", "--manifest", manifest, "--out", str(parts)]) == 0
    return SimpleNamespace(
        root=root,
        data=data,
        manifest=manifest,
        parts=str(parts),
        config_path=str(config_path),
    )


def read_csv_lines(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config: ")
    json.loads(lines[0][len("# config: ") :])
    return lines[1:]


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert "twoway" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "twoway.cli", "--version"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "twoway" in proc.stdout


def test_no_subcommand_is_usage_error(capsys):
    assert cli.main([]) == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["gen", "--nonsense"])
    assert exc.value.code == 2


def test_unknown_preset_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["gen", "--preset", "galactic", "--out", "x"])
    assert exc.value.code == 2


def test_gen_outputs(ws):
    manifest = json.loads((ws.data / "manifest.json").read_text())
    assert manifest["node_count"] == 500
    assert manifest["config"]["command"] == "gen"
    assert manifest["config"]["format_version"] == 1
    assert manifest["config"]["gen_config"]["f_hub_bias"] == 0.6
    for name in ("f.edges", "m.edges", "r.edges"):
        first = (ws.data / name).read_text().splitlines()[0]
        assert first.startswith("# config: ")
    truth = json.loads((ws.data / "ground_truth.json").read_text())
    assert len(truth["f_edges"]) == 1200
    assert set(truth["memberships"]) == {"R", "M"}
    assert truth["config"]["args"]["seed"] is None

    net = load_network(ws.manifest)
    assert net.node_count == 500
    assert len(net.f_edges()) == 1200


def test_gen_seed_override(tmp_path):
    out = tmp_path / "g"
    config = tmp_path / "c.json"
    config.write_text(json.dumps(dict(SMALL_CONFIG, f_edge_count=60)))
    assert cli.main(["gen", "--config", str(config), "--seed", "99", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["gen_config"]["seed"] == 99


def test_cluster_outputs(ws, capsys):
    for layer in (R, M):
        part = load_partition(f"{ws.parts}/partition_{layer}.json")
        assert part.layer == layer
        assert len(part.assignment) == 500
        assert part.cluster_count == 2
    assert cli.main(["cluster", "--manifest", ws.manifest, "--out", str(ws.root / "p2")]) == 0
    out = capsys.readouterr().out
    assert "R: codelength" in out and "M: codelength" in out and "bits" in out


def test_cluster_components_and_file_sources(ws, tmp_path):
    comp_dir = tmp_path / "comp"
    assert (
        cli.main(
            [
                "cluster",
                "--manifest",
                ws.manifest,
                "--clusterer",
                "components",
                "--out",
                str(comp_dir),
            ]
        )
        == 0
    )
    reread = tmp_path / "reread"
    assert (
        cli.main(
            [
                "cluster",
                "--manifest",
                ws.manifest,
                "--clusterer",
                f"file:{ws.parts}",
                "--out",
                str(reread),
            ]
        )
        == 0
    )
    for layer in (R, M):
        ours = load_partition(f"{ws.parts}/partition_{layer}.json")
        theirs = load_partition(f"{reread}/partition_{layer}.json")
        assert ours.assignment == theirs.assignment


def test_cluster_bad_clusterer(ws, capsys):
    assert cli.main(["cluster", "--manifest", ws.manifest, "--clusterer", "magic"]) == 1
    assert "ValueError" in capsys.readouterr().err


def test_missing_manifest_is_component_error(capsys):
    assert cli.main(["analyze", "--manifest", "no/such/manifest.json", "--out", "x"]) == 1
    err = capsys.readouterr().err
    assert ": " in err


def pairs_file(ws, name, rows):
    path = ws.root / name
    path.write_text("\n".join(rows) + "\n")
    return str(path)


def test_featurize_roundtrip(ws):
    net = load_network(ws.manifest)
    f_edges = net.f_edges()[:4]
    rows = [f"{u} {v} {'+1' if s == 1 else '-1'}" for (u, v, s) in f_edges]
    rows.append("1 2")  # unlabeled, no friendly edge between these
    path = pairs_file(ws, "pairs.txt", rows)
    out = ws.root / "features.csv"
    assert (
        cli.main(
            [
                "featurize",
                "--manifest",
                ws.manifest,
                "--pairs",
                path,
                "--mode",
                "both",
                "--partitions",
                ws.parts,
                "--out",
                str(out),
            ]
        )
        == 0
    )
    lines = read_csv_lines(out)
    header = lines[0].split(",")
    assert header[:3] == ["src", "dst", "label"]
    assert len(header) == 3 + 32
    assert len(lines) == 1 + 5
    last = lines[-1].split(",")
    assert last[2] == ""  # unsigned pair keeps an empty label

    aug = augment(
        net,
        load_partition(f"{ws.parts}/partition_R.json"),
        load_partition(f"{ws.parts}/partition_M.json"),
    )
    (u, v, s) = f_edges[0]
    want = metapath.feature_row(aug, u, v, mode="both").counts
    got = [int(c) for c in lines[1].split(",")[3:]]
    assert got == list(want)


def test_featurize_cb_needs_partitions(ws, capsys):
    path = pairs_file(ws, "pairs_cb.txt", ["0 1"])
    rc = cli.main(
        ["featurize", "--manifest", ws.manifest, "--pairs", path, "--mode", "cb",
         "--out", str(ws.root / "x.csv")]
    )
    assert rc == 1
    assert "partitions" in capsys.readouterr().err


def test_featurize_rejects_malformed_pairs(ws, capsys):
    path = pairs_file(ws, "bad_pairs.txt", ["0 1", "2 two"])
    rc = cli.main(
        ["featurize", "--manifest", ws.manifest, "--pairs", path, "--mode", "nb",
         "--out", str(ws.root / "y.csv")]
    )
    assert rc == 1
    assert "line 2" in capsys.readouterr().err


def test_evaluate_small_run(ws, capsys):
    out = ws.root / "eval_small"
    rc = cli.main(
        [
            "evaluate",
            "--manifest",
            ws.manifest,
            "--predictors",
            "nbsp,mf,random",
            "--k",
            "4",
            "--seed",
            "5",
            "--no-figures",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    stdout = capsys.readouterr().out
    assert stdout.count("mean balanced accuracy") == 3

    report = json.loads((out / "report.json").read_text())
    assert [r["predictor"] for r in report["reports"]] == ["nbsp", "mf", "random"]
    for entry in report["reports"]:
        assert len(entry["folds"]) == 4
        assert entry["config"]["folds"] == 4
        assert entry["config"]["fold_seed"] == 5
    assert report["config"]["command"] == "evaluate"
    assert report["config"]["experiment"]["predictors"] == ["nbsp", "mf", "random"]
    assert not (out / "accuracy.png").exists()

    lines = read_csv_lines(out / "report.csv")
    assert lines[0] == "predictor,fold,tp,fn,tn,fp,balanced_accuracy"
    body = lines[1:]
    assert len(body) == 3 * (4 + 1)
    mean_rows = [l for l in body if ",mean," in l]
    assert len(mean_rows) == 3


def test_evaluate_unknown_predictor(ws, capsys):
    rc = cli.main(
        ["evaluate", "--manifest", ws.manifest, "--predictors", "oracle",
         "--out", str(ws.root / "nope")]
    )
    assert rc == 1
    assert "unknown predictors" in capsys.readouterr().err


def test_evaluate_cbmp_with_figures_and_models(ws):
    out = ws.root / "eval_cb"
    models = ws.root / "models"
    rc = cli.main(
        [
            "evaluate",
            "--manifest",
            ws.manifest,
            "--predictors",
            "cbmp,nbmp",
            "--k",
            "3",
            "--partitions",
            ws.parts,
            "--save-model",
            str(models),
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    png = (out / "accuracy.png").read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["experiment"]["partitions"] == {"R": 2, "M": 2}

    payload = json.loads((models / "cbmp.json").read_text())
    assert payload["type"] == "svm"
    assert payload["columns"] == list(metapath.MODE_COLUMNS["cb"])
    assert len(payload["weights"]) == 16
    Standardizer.from_dict(payload["standardizer"])
    assert (models / "nbmp.json").exists()


def test_predict_with_saved_models(ws):
    net = load_network(ws.manifest)
    sample = [(u, v) for (u, v, _) in net.f_edges()[:10]]
    path = pairs_file(ws, "predict_pairs.txt", [f"{u} {v}" for (u, v) in sample])

    out = ws.root / "pred_cb.csv"
    rc = cli.main(
        [
            "predict",
            "--model",
            str(ws.root / "models" / "cbmp.json"),
            "--manifest",
            ws.manifest,
            "--pairs",
            path,
            "--partitions",
            ws.parts,
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    lines = read_csv_lines(out)
    assert lines[0] == "src,dst,margin,predicted_sign"
    assert len(lines) == 1 + len(sample)
    for line in lines[1:]:
        u, v, margin, sign = line.split(",")
        margin = float(margin)
        assert np.isfinite(margin)
        assert int(sign) == (1 if margin >= 0 else -1)


def test_predict_mf_model(ws, tmp_path):
    models = ws.root / "models_mf"
    out_dir = ws.root / "eval_mf"
    rc = cli.main(
        ["evaluate", "--manifest", ws.manifest, "--predictors", "mf", "--k", "3",
         "--no-figures", "--save-model", str(models), "--out", str(out_dir)]
    )
    assert rc == 0
    path = pairs_file(ws, "mf_pairs.txt", ["4 9", "9 4"])
    out = tmp_path / "mf_pred.csv"
    rc = cli.main(
        ["predict", "--model", str(models / "mf.json"), "--manifest", ws.manifest,
         "--pairs", path, "--out", str(out)]
    )
    assert rc == 0
    payload = json.loads((models / "mf.json").read_text())
    fu = np.asarray(payload["factors_u"])
    fv = np.asarray(payload["factors_v"])
    lines = read_csv_lines(out)
    assert float(lines[1].split(",")[2]) == pytest.approx(float(fu[4] @ fv[9]))


def test_predict_rejects_unknown_model_columns(ws, tmp_path, capsys):
    bogus = tmp_path / "model.json"
    model = json.loads((ws.root / "models" / "cbmp.json").read_text())
    model["columns"] = ["mystery"]
    bogus.write_text(json.dumps(model))
    path = pairs_file(ws, "one_pair.txt", ["0 1"])
    rc = cli.main(
        ["predict", "--model", str(bogus), "--manifest", ws.manifest,
         "--pairs", path, "--out", str(tmp_path / "z.csv")]
    )
    assert rc == 1
    assert "columns" in capsys.readouterr().err


def test_analyze_outputs(ws, capsys):
    out = ws.root / "analysis"
    assert cli.main(["analyze", "--manifest", ws.manifest, "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "F-R" in stdout and "M-R" in stdout

    corr = json.loads((out / "correlations.json").read_text())
    assert {e["layers"] for e in corr["pairs"]} == {"F-R", "F-M", "M-R"}
    assert corr["f_overlap"]["f_edges"] == 1200
    assert corr["config"]["command"] == "analyze"

    lines = read_csv_lines(out / "embeddedness.csv")
    assert lines[0] == "bin,n,pct_of_positives,pct_of_negatives,positive_rate"
    assert sum(int(l.split(",")[1]) for l in lines[1:]) == 1200
    assert (out / "embeddedness.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_analyze_no_figures(ws, tmp_path):
    out = tmp_path / "an"
    assert cli.main(["analyze", "--manifest", ws.manifest, "--no-figures", "--out", str(out)]) == 0
    assert not (out / "embeddedness.png").exists()


def test_evaluate_report_json_is_deterministic(ws):
    out = ws.root / "det"
    args = [
        "evaluate", "--manifest", ws.manifest, "--predictors", "nbsp,random",
        "--k", "3", "--seed", "2", "--no-figures", "--out", str(out),
    ]
    assert cli.main(args) == 0
    first = (out / "report.json").read_bytes()
    assert cli.main(args) == 0
    assert (out / "report.json").read_bytes() == first


def test_desk_scale_pipeline(tmp_path, capsys):
    """Every subcommand once on the desk preset."""
    data = tmp_path / "data"
    assert cli.main(["gen", "--preset", "desk", "--seed", "7", "--out", str(data)]) == 0
    manifest = str(data / "manifest.json")

    analysis = tmp_path / "analysis"
    assert cli.main(["analyze", "--manifest", manifest, "--no-figures", "--out", str(analysis)]) == 0

    parts = tmp_path / "parts"
    assert cli.main(["cluster", "--manifest", manifest, "--out", str(parts)]) == 0

    net = load_network(manifest)
    sample = [f"{u} {v}" for (u, v, _) in net.f_edges()[:50]]
    pairs = tmp_path / "pairs.txt"
    pairs.write_text("\n".join(sample) + "\n")
    features = tmp_path / "features.csv"
    assert (
        cli.main(
            ["featurize", "--manifest", manifest, "--pairs", str(pairs), "--mode",
             "both", "--partitions", str(parts), "--out", str(features)]
        )
        == 0
    )

    eval_out = tmp_path / "eval"
    models = tmp_path / "models"
    rc = cli.main(
        [
            "evaluate",
            "--manifest",
            manifest,
            "--predictors",
            "cbmp,nbmp,nbsp,mf,random",
            "--k",
            "10",
            "--seed",
            "7",
            "--partitions",
            str(parts),
            "--no-figures",
            "--save-model",
            str(models),
            "--out",
            str(eval_out),
        ]
    )
    assert rc == 0
    report = json.loads((eval_out / "report.json").read_text())
    means = {
        entry["predictor"]: entry["mean_balanced_accuracy"]
        for entry in report["reports"]
    }
    assert set(means) == {"cbmp", "nbmp", "nbsp", "mf", "random"}
    assert means["cbmp"] > means["nbmp"]

    predictions = tmp_path / "pred.csv"
    rc = cli.main(
        ["predict", "--model", str(models / "cbmp.json"), "--manifest", manifest,
         "--pairs", str(pairs), "--partitions", str(parts), "--out", str(predictions)]
    )
    assert rc == 0
    assert len(predictions.read_text().splitlines()) == 2 + 50
    capsys.readouterr()
