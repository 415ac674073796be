import json
import math

import pytest

from singsurf.cli import build_parser, load_config, main, ConfigError


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_trace_cone_csv(capsys):
    code, out, _ = run(capsys, "trace", "--surface", "cone", "--r-min", "0.01", "--r-max", "0.1", "--n-levels", "5")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# singsurf ") and "config" in lines[0]
    assert lines[1] == "r,component_id,length,residual"
    rows = [line.split(",") for line in lines[2:]]
    assert {row[1] for row in rows} == {"0", "1"}
    for r, _, length, _ in rows:
        assert float(length) / float(r) == pytest.approx(math.sqrt(2) * math.pi, rel=1e-7)


def test_trace_inline_matches_catalog(capsys):
    _, inline, _ = run(capsys, "trace", "--surface", "x^2+y^2-z^4", "--n-levels", "4")
    _, named, _ = run(capsys, "trace", "--surface", "horn-1-2", "--n-levels", "4")
    assert inline.splitlines()[1:] == named.splitlines()[1:]


def test_bad_expression_exit_code(capsys):
    code, _, err = run(capsys, "trace", "--surface", "x^2+*y")
    assert code == 1
    assert "position 4" in err


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["trace", "--surface", "cone", "--bogus", "1"])
    assert exc.value.code != 0


def test_help_lists_flags(capsys):
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    text = sub["trace"].format_help()
    for flag in ("--surface", "--r-min", "--r-max", "--n-levels", "--theta-count", "--m", "--output-dir",
                 "--jobs", "--config"):
        assert flag in text
    assert set(sub) == {"trace", "asymptotics", "gauss-bonnet", "quasi-iso", "model", "mellin", "resolve"}


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "run.yaml"
    cfg_file.write_text("surface: cone\nn-levels: 9\nr_min: 0.002\n")
    cfg = load_config("trace", {"n_levels": 6, "r_min": None}, str(cfg_file))
    assert cfg.surface == "cone" and cfg.n_levels == 6 and cfg.r_min == 0.002
    assert load_config("trace", {}, None).n_levels == 16


def test_config_validation(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("colour: blue\n")
    with pytest.raises(ConfigError):
        load_config("trace", {}, str(bad))
    with pytest.raises(ConfigError):
        load_config("trace", {"theta_count": 48}, None)
    with pytest.raises(ConfigError):
        load_config("trace", {"r_min": 0.2, "r_max": 0.1}, None)
    with pytest.raises(ConfigError):
        load_config("trace", {"n_levels": 3}, None)


def test_output_dir_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["asymptotics", "--surface", "cone", "--n-levels", "12"]
    assert main(args + ["--output-dir", str(a)]) == 0
    assert main(args + ["--output-dir", str(b), "--jobs", "2"]) == 0
    capsys.readouterr()
    names = sorted(p.name for p in a.iterdir())
    assert "lengths.csv" in names and "expansion_0.json" in names and "fit_1.csv" in names
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    data = json.loads((a / "expansion_0.json").read_text())
    assert data["_provenance"].startswith("singsurf ")


def test_asymptotics_cone(capsys):
    code, out, _ = run(capsys, "asymptotics", "--surface", "cone")
    assert code == 0
    assert "gamma=1 C=4.44288" in out and "has_log=false" in out


def test_asymptotics_horn(capsys):
    _, out, _ = run(capsys, "asymptotics", "--surface", "horn-1-2")
    assert "gamma=2 C=6.28318" in out


def test_asymptotics_log_model(capsys):
    code, out, _ = run(capsys, "asymptotics", "--a", "1", "--b", "1", "--metric", "y^2,0,x^2",
                       "--r-min", "1e-6", "--r-max", "1e-2", "--n-levels", "24")
    assert code == 0
    assert "has_log=true" in out and "C=-1.41421" in out


def test_gauss_bonnet_refuses_inline(capsys):
    code, _, err = run(capsys, "gauss-bonnet", "--surface", "x^2+y^2-z^2")
    assert code == 1 and "Euler characteristic" in err


@pytest.mark.slow
def test_gauss_bonnet_sphere(capsys, tmp_path):
    code, out, _ = run(capsys, "gauss-bonnet", "--surface", "sphere", "--output-dir", str(tmp_path))
    assert code == 0 and "chi=2 R=0 N=0" in out
    rep = json.loads((tmp_path / "gauss_bonnet.json").read_text())
    assert rep["chi_singular_residual"] < 0.01
    assert (tmp_path / "eps_sequence.csv").read_text().splitlines()[1] == "eps,int_K,increment"


def test_quasi_iso_commands(capsys):
    _, out, _ = run(capsys, "quasi-iso", "--surface", "horn-1-2")
    assert out.startswith("[horn(2), horn(2)], alpha=")
    _, out, _ = run(capsys, "quasi-iso", "--surface", "cone")
    assert out.startswith("[cone, cone]")
    _, out, _ = run(capsys, "quasi-iso", "--surface", "plane")
    assert "defect below measurable threshold" in out


def test_model_command(capsys):
    code, out, err = run(capsys, "model", "--a", "2", "--b", "3", "--n-levels", "4")
    assert code == 0
    assert "(pass)" in err
    assert out.splitlines()[1] == "r,weighted_length"


def test_mellin_command(capsys):
    code, out, _ = run(capsys, "mellin", "--surface", "cone", "--monomial", "1:0")
    assert code == 0
    assert "poles at -1(order 1)" in out
    assert "monomial pole -1 order 1 residue 2" in out


def test_resolve_command(capsys, tmp_path):
    code, out, _ = run(capsys, "resolve", "--germ", "x^2-y^3", "--output-dir", str(tmp_path))
    assert code == 0 and "consistency: ok" in out and "alpha: 1/9" in out
    assert (tmp_path / "resolution.txt").read_text().startswith("# singsurf")


def test_missing_surface(capsys):
    code, _, err = run(capsys, "trace")
    assert code == 1 and "--surface" in err
