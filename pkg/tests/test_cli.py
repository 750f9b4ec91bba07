import numpy as np
import pytest

from spinbath.cli import main, parse_axis, read_measurements


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# --- helpers ------------------------------------------------------------

def test_parse_axis_forms():
    assert np.array_equal(parse_axis("1,5,9"), [1.0, 5.0, 9.0])
    lin = parse_axis("1:9:lin5")
    assert np.allclose(lin, np.linspace(1, 9, 5))
    log = parse_axis("1:100:log3")
    assert np.allclose(log, [1.0, 10.0, 100.0])
    assert len(parse_axis("1:100")) == 10
    with pytest.raises(ValueError):
        parse_axis("1:9:cubic")


def test_read_measurements(tmp_path):
    f = tmp_path / "data.txt"
    f.write_text("# measured T2* (us)\n1.5\n2.0  # second device\n\n0.7\n")
    assert np.array_equal(read_measurements(str(f)), [1.5, 2.0, 0.7])
    bad = tmp_path / "bad.txt"
    bad.write_text("1.0\n-2.0\n")
    with pytest.raises(ValueError):
        read_measurements(str(bad))
    empty = tmp_path / "empty.txt"
    empty.write_text("# nothing\n")
    with pytest.raises(ValueError):
        read_measurements(str(empty))


# --- subcommands --------------------------------------------------------

def test_bath_deterministic_output(capsys):
    args = ("bath", "--density", "5", "--thickness", "10", "--seed", "3")
    code1, out1, _ = run_cli(capsys, *args)
    code2, out2, _ = run_cli(capsys, *args)
    assert code1 == code2 == 0
    assert out1 == out2
    assert out1.startswith("# spinbath bath-config v1")


def test_bath_rejects_bad_density(capsys):
    code, _, err = run_cli(capsys, "bath", "--density", "0",
                           "--thickness", "10")
    assert code == 1
    assert "error:" in err


def test_coherence_from_bath_file(tmp_path, capsys):
    bath_file = tmp_path / "bath.txt"
    code, out, _ = run_cli(capsys, "bath", "--density", "20",
                           "--thickness", "10", "--seed", "5",
                           "--out", str(bath_file))
    assert code == 0
    code, out, _ = run_cli(capsys, "coherence", "--bath", str(bath_file),
                           "--kind", "hahn", "--order", "2",
                           "--tmax", "0.02", "--npoints", "20")
    assert code == 0
    lines = [ln for ln in out.splitlines() if not ln.startswith("#")]
    assert len(lines) == 21
    t0 = [float(v) for v in lines[0].split()]
    assert t0[0] == 0.0 and abs(complex(t0[1], t0[2])) == pytest.approx(1.0)


def test_coherence_needs_geometry_or_bath(capsys):
    code, _, err = run_cli(capsys, "coherence", "--kind", "ramsey")
    assert code == 1
    assert "error:" in err


def test_sweep_stats_footer(capsys):
    code, out, _ = run_cli(capsys, "sweep", "--densities", "3,9",
                           "--thicknesses", "5", "--nconfigs", "10",
                           "--seed", "2")
    assert code == 0
    assert out.startswith("# spinbath sweep v1")
    stat_lines = [ln for ln in out.splitlines() if ln.startswith("# stat ")]
    assert len(stat_lines) == 2


def test_mle_end_to_end(tmp_path, capsys):
    lib_file = tmp_path / "library.txt"
    code, _, _ = run_cli(capsys, "library", "--densities", "2,4,8,16",
                         "--thicknesses", "4", "--nsamples", "150",
                         "--seed", "4", "--out", str(lib_file))
    assert code == 0
    # draw "measurements" from the d=8 cell of a same-seed sweep
    from spinbath.mle import read_library
    with open(lib_file) as fh:
        lib = read_library(fh)
    rng = np.random.default_rng(0)
    rates = rng.choice(lib.cells[(0, 2)], size=25, replace=False)
    data_file = tmp_path / "data.txt"
    data_file.write_text("# T2* in us\n" + "\n".join(
        repr(float(1e3 / r)) for r in rates) + "\n")
    out_file = tmp_path / "report.txt"
    code, _, _ = run_cli(capsys, "mle", "--library", str(lib_file),
                         "--data", str(data_file), "--thickness", "4",
                         "--out", str(out_file))
    assert code == 0
    text = out_file.read_text()
    assert text.startswith("# spinbath mle-report v1")
    rho = float([ln for ln in text.splitlines()
                 if ln.startswith("rho_mle_ppm")][0].split()[1])
    assert rho == pytest.approx(8.0, rel=0.4)


def test_yield_report_output(capsys):
    code, out, _ = run_cli(capsys, "yield", "--densities", "3",
                           "--thicknesses", "2,50", "--nconfigs", "30",
                           "--seed", "1")
    assert code == 0
    assert out.startswith("# spinbath yield-report v1")
    rows = [ln for ln in out.splitlines()
            if ln and not ln.startswith(("#", "meta", "columns"))]
    assert len(rows) == 2


def test_validate_only_quick_checks(capsys):
    code, out, _ = run_cli(capsys, "validate", "--only",
                           "p1-spectroscopy,determinism")
    assert code == 0
    assert "[PASS] p1-spectroscopy" in out
    assert "[PASS] determinism" in out


def test_validate_rejects_unknown_check(capsys):
    code, _, err = run_cli(capsys, "validate", "--only", "perpetual-motion")
    assert code == 2
    assert "unknown checks" in err
