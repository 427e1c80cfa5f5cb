import json

import pytest

from xssunit.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_generate_all(capsys):
    code, out, err = run(capsys, "generate")
    lines = out.splitlines()
    assert code == 0 and len(lines) == 497
    first = json.loads(lines[0])
    assert first["index"] == 0 and first["context"] == "AttributeValue"
    assert "497" in err


def test_generate_js_only(capsys):
    code, out, _ = run(capsys, "generate", "--context", "js")
    texts = [json.loads(l)["text"] for l in out.splitlines()]
    assert len(texts) == 18 and "';attack();//" in texts


def test_generate_no_legacy(capsys):
    _, out, _ = run(capsys, "generate", "--no-legacy")
    records = [json.loads(l) for l in out.splitlines()]
    assert records and not any(r["legacy"] for r in records)


def test_generate_custom_payload(capsys):
    _, out, _ = run(capsys, "generate", "--context", "tag", "--payload", "alert(1);")
    assert all("alert(1);" in json.loads(l)["text"] for l in out.splitlines())


def test_generate_to_output_dir(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("XSSUNIT_OUTPUT_DIR", str(tmp_path))
    code, out, _ = run(capsys, "generate", "-o", "sub/attacks.ndjson")
    assert code == 0 and out == ""
    assert len((tmp_path / "sub" / "attacks.ndjson").read_text().splitlines()) == 497


def write_template(tmp_path, html, **config):
    path = tmp_path / "t.html"
    path.write_text(html)
    if config:
        (tmp_path / "t.json").write_text(json.dumps(config))
    return str(path)


def test_test_vulnerable(capsys, tmp_path):
    path = write_template(tmp_path, "<input onclick=\"Fn('{{INJECT}}');\">")
    code, out, err = run(capsys, "test", path, "--encoders", "escapeHtml")
    report = json.loads(out)
    assert code == 2
    assert report["results"][0]["verdict"]["witness"]["text"] == "';attack();//"
    assert "VULNERABLE" in err


def test_test_safe(capsys, tmp_path):
    path = write_template(tmp_path, "<p>{{INJECT}}</p>", chain=["escapeHtml"])
    code, out, _ = run(capsys, "test", path, "--mode", "exhaustive")
    assert code == 0 and json.loads(out)["summary"]["safe"] == 1


def test_test_legacy_flag(capsys, tmp_path):
    path = write_template(tmp_path, '<div style="background:{{INJECT}}">x</div>', chain=["escapeHtml"])
    assert run(capsys, "test", path)[0] == 0
    assert run(capsys, "test", path, "--legacy")[0] == 2


def test_test_bad_template(capsys, tmp_path):
    path = write_template(tmp_path, "<p>no placeholder</p>")
    code, out, _ = run(capsys, "test", path)
    assert code == 1 and "PlaceholderMissing" in json.loads(out)["results"][0]["error"]


def test_test_unknown_encoder(capsys, tmp_path):
    path = write_template(tmp_path, "<p>{{INJECT}}</p>")
    assert run(capsys, "test", path, "--encoders", "rot13")[0] == 1


def test_test_missing_file(capsys, tmp_path):
    assert run(capsys, "test", str(tmp_path / "missing.html"))[0] == 1


def test_suite_bundled(capsys):
    code, out, err = run(capsys, "suite")
    report = json.loads(out)
    assert code == 2
    assert report["summary"] == {"templates": 5, "vulnerable": 3, "safe": 2, "errors": 0}
    assert all(r["matches_expected"] for r in report["results"])


def test_suite_empty_dir(capsys, tmp_path):
    code, out, _ = run(capsys, "suite", str(tmp_path))
    assert code == 0 and json.loads(out)["summary"]["templates"] == 0


def test_suite_not_a_dir(capsys, tmp_path):
    assert run(capsys, "suite", str(tmp_path / "nope"))[0] == 1


def test_corpus_bundled(capsys):
    code, out, _ = run(capsys, "corpus")
    report = json.loads(out)
    assert code == 0
    assert (report["total"], report["exact_matches"], report["mapped"]) == (24, 20, 24)


def test_corpus_missing(capsys, tmp_path):
    assert run(capsys, "corpus", str(tmp_path / "none.txt"))[0] == 1


def test_bad_machine(capsys, tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text("not json")
    assert run(capsys, "generate", "--machine", str(bad))[0] == 1


def test_usage_error_exits_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--context", "css"])
    assert exc.value.code == 1


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "xssunit", "generate", "--context", "js"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and len(proc.stdout.splitlines()) == 18
