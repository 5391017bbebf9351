import csv
import json
import subprocess
import sys

import pytest

from amiwav import cli, ingest
from amiwav.evaluator import REPORT_FILES


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synth-data", "-o", d / "raw.csv", "--customers", 20, "--weeks", 8, "--seed", 4,
               "--groups-out", d / "groups.csv", "--truth-out", d / "truth.csv") == 0
    assert run("ingest", d / "raw.csv", "-o", d / "prof.csv", "--align", "mon:00", "--trim-to-weeks",
               "--report", d / "ingest.json") == 0
    return d


def test_synth_data_side_files(work):
    groups = list(csv.DictReader(open(work / "groups.csv")))
    assert [g["group"] for g in groups[:4]] == ["A", "B", "C", "A"]
    truth = list(csv.DictReader(open(work / "truth.csv")))
    assert truth[3] == {"meter_id": "c03", "archetype": "industrial"}


def test_ingest_outputs(work):
    rep = json.loads((work / "ingest.json").read_text())
    assert rep["totals"] == {"meters": 20, "rows": 20 * 1344, "gaps": 0, "filled": 0, "trimmed": 0}
    assert (work / "prof.csv").read_bytes() == (work / "raw.csv").read_bytes()


def test_compress_synthesize_metrics(work):
    assert run("compress", work / "prof.csv", "-o", work / "w.amiw", "--level", 3) == 0
    assert run("synthesize", work / "w.amiw", "-o", work / "syn.csv") == 0
    assert run("--deterministic", "metrics", work / "prof.csv", work / "syn.csv", "-o", work / "m") == 0
    names = {p.name for p in (work / "m").iterdir()}
    assert names == {"fidelity.csv", "fidelity.json", "fidelity_hist_pe.csv", "fidelity_hist_e.csv"}
    rows = list(csv.DictReader(open(work / "m" / "fidelity.csv")))
    assert len(rows) == 20 and all(float(r["se_pct"]) <= 100 + 1e-9 for r in rows)
    body = json.loads((work / "m" / "fidelity.json").read_text())
    assert body["generated_at"] is None
    assert body["fidelity"]["synthesized"]["profiles"] == 20


def test_info_counts(work, capsys):
    run("compress", work / "prof.csv", "-o", work / "w3.amiw")
    capsys.readouterr()
    assert run("info", work / "w3.amiw") == 0
    info = json.loads(capsys.readouterr().out)
    assert info["stored_values"] == 20 * 1344 // 8 and info["level"] == 3 and info["model_type"] == "wavelet"


def test_classify_deterministic_and_reconstruct(work, capsys):
    for tag in ("a", "b"):
        assert run("classify", work / "prof.csv", "-o", work / f"c{tag}.amiw", "--k", 5, "--seed", 7,
                   "--feature-level", 3, "--deterministic") == 0
    a = (work / "ca.amiw.clusters.json").read_bytes()
    assert a == (work / "cb.amiw.clusters.json").read_bytes()
    assert (work / "ca.amiw").read_bytes() == (work / "cb.amiw").read_bytes()
    body = json.loads(a)
    assert body["k"] == 5 and sum(body["class_sizes"]) == 20 and len(body["assignments"]) == 20
    capsys.readouterr()
    run("info", work / "ca.amiw")
    assert json.loads(capsys.readouterr().out)["stored_values"] == 5 * 1344 + 2 * 20
    assert run("reconstruct", work / "ca.amiw", "-o", work / "rec.csv") == 0
    orig, _ = ingest.read_profiles(work / "prof.csv")
    rec, _ = ingest.read_profiles(work / "rec.csv")
    for p, q in zip(orig, rec):
        assert q.values.sum() == pytest.approx(p.values.sum(), rel=1e-9)
    assert run("reconstruct", work / "ca.amiw", "-o", work / "one.csv", "--customer", "c05") == 0
    assert [p.customer_id for p in ingest.read_profiles(work / "one.csv")[0]] == ["c05"]


def test_evaluate(work):
    run("compress", work / "prof.csv", "-o", work / "w.amiw")
    run("synthesize", work / "w.amiw", "-o", work / "syn.csv")
    run("classify", work / "prof.csv", "-o", work / "c.amiw", "--feature-level", 3)
    run("reconstruct", work / "c.amiw", "-o", work / "rec.csv")
    assert run("evaluate", "--reference", work / "prof.csv",
               "--candidate", f"wavelet={work / 'syn.csv'}", "--candidate", f"classified={work / 'rec.csv'}",
               "--model", f"wavelet={work / 'w.amiw'}", "--model", f"classified={work / 'c.amiw'}",
               "--groups", work / "groups.csv", "-o", work / "rep", "--deterministic") == 0
    for name in REPORT_FILES:
        assert (work / "rep" / name).is_file()
    body = json.loads((work / "rep" / "report.json").read_text())
    assert [g["group"] for g in body["candidates"]["classified"]] == ["A", "B", "C"]
    for g in body["candidates"]["classified"]:
        assert abs(g["energy"]["pct_error"]) < 1e-9
    comp = {r["model"]: r["pct_compression"] for r in csv.DictReader(open(work / "rep" / "compression.csv"))}
    assert comp["wavelet"] == "-87.50"


def test_usage_errors_exit_2(capsys):
    for argv in ([], ["frobnicate"], ["compress"], ["classify", "x", "-o", "y", "--feature-level", "5"], ["info", "x", "--bogus"]):
        with pytest.raises(SystemExit) as exc:
            run(*argv)
        assert exc.value.code == 2


def test_operational_errors_exit_1(work, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("meter_id,timestamp,kwh\nm1,2013-05-27T00:00,x\n")
    assert run("ingest", bad, "-o", tmp_path / "o.csv") == 1
    err = capsys.readouterr().err.strip()
    assert err.count("\n") == 0
    assert err.startswith("error: SchemaError:") and "row 2" in err
    assert run("info", tmp_path / "missing.amiw") == 1
    assert capsys.readouterr().err.startswith("error: FileNotFoundError:")
    (tmp_path / "junk.amiw").write_bytes(b"JUNKJUNKJUNKJUNKJUNKJUNK")
    assert run("info", tmp_path / "junk.amiw") == 1
    assert "CorruptFileError" in capsys.readouterr().err
    run("classify", work / "prof.csv", "-o", tmp_path / "c.amiw", "--feature-level", 3)
    assert run("synthesize", tmp_path / "c.amiw", "-o", tmp_path / "s.csv") == 1
    assert "use 'reconstruct'" in capsys.readouterr().err
    # 8 weeks leave a single row at level 4: every V4 feature vanishes
    assert run("classify", work / "prof.csv", "-o", tmp_path / "c4.amiw") == 1
    assert "distinct feature vectors" in capsys.readouterr().err


def test_threads_env(monkeypatch):
    monkeypatch.setenv("AMIWAV_THREADS", "3")
    assert cli.thread_count() == 3
    assert cli.worker_map(lambda x: x * x, range(10)) == [x * x for x in range(10)]
    monkeypatch.setenv("AMIWAV_THREADS", "-1")
    with pytest.raises(cli.InvalidArgumentError):
        cli.thread_count()


def test_threaded_compress_matches_serial(work, monkeypatch):
    monkeypatch.setenv("AMIWAV_THREADS", "1")
    run("compress", work / "prof.csv", "-o", work / "s1.amiw")
    monkeypatch.setenv("AMIWAV_THREADS", "4")
    run("compress", work / "prof.csv", "-o", work / "s4.amiw")
    assert (work / "s1.amiw").read_bytes() == (work / "s4.amiw").read_bytes()


def test_module_entry_point_help():
    out = subprocess.run([sys.executable, "-m", "amiwav", "--help"], capture_output=True, text=True, check=True)
    for name in ("ingest", "compress", "synthesize", "metrics", "classify", "reconstruct", "evaluate", "synth-data", "info"):
        assert name in out.stdout
