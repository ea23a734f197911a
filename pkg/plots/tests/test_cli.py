import subprocess
import sys
from pathlib import Path

from rbmplot.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


def test_cli_strong_error(tmp_path, capsys):
    out = tmp_path / "fig.png"
    code = main([
        "--kind", "strong-error",
        "--in", str(FIXTURES / "strong_errors.csv"),
        "--out", str(out),
    ])
    assert code == 0
    assert out.exists()
    captured = capsys.readouterr().out
    assert "fitted slope" in captured


def test_cli_schema_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n")
    code = main(["--kind", "strong-error", "--in", str(bad),
                 "--out", str(tmp_path / "f.png")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_cli_missing_file(tmp_path):
    code = main(["--kind", "density", "--in", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path / "f.png")])
    assert code == 2


def test_cli_subprocess_svg(tmp_path):
    out = tmp_path / "fig.svg"
    proc = subprocess.run(
        [sys.executable, "-m", "rbmplot.cli",
         "--kind", "strong-error",
         "--in", str(FIXTURES / "strong_errors.csv"),
         "--out", str(out), "--no-overlay"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
    assert b"<svg" in out.read_bytes()[:300]
