import json

import numpy as np
import pytest

from sigma2sphere import io
from sigma2sphere.cli import build_parser, dispatch, main, parse_config, parse_dict
from sigma2sphere.curvature import GAUSS_BONNET
from sigma2sphere.errors import ConfigError, NonPositiveKError
from sigma2sphere.fields import ScalarField, project
from sigma2sphere.grid import build_grid


def test_preset_constant6():
    cfg = parse_config('[K]\npreset = "constant6"\n[grid]\nL = 6\n')
    assert cfg.K(np.eye(5)).tolist() == [6.0] * 5
    assert cfg.L == 6


def test_preset_linear_eps_with_param():
    cfg = parse_config('[grid]\nL = 6\n[K]\npreset = "linear_eps"\nparams = {eps = 0.5}\n')
    x = np.eye(5)
    assert cfg.K(x).tolist() == [6.0, 6.0, 6.0, 6.0, 6.5]


def test_defaults():
    cfg = parse_config("")
    assert cfg.L == 12 and cfg.K.name == "constant6"
    assert cfg.solve["t_cap"] == 50


@pytest.mark.parametrize(
    "text",
    [
        "bogus = 1\n",
        "[grid]\nL = 6\ncolour = 3\n",
        "[solve.schedule]\nspeed = 2\n",
        "schema_version = 7\n",
        "[grid]\nL = 20\n",
        "[grid]\nL = 6\nazimuth_count = 13\n",
        "[K]\npreset = \"nope\"\n",
        "[K]\npreset = \"linear_eps\"\nparams = {bad = 1}\n",
        "[solve]\nt_cap = 0.5\n",
        "[degree]\nr = 1.2\n",
        "[grid\n",
    ],
)
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_large_L_override_flag():
    cfg = parse_dict({"grid": {"L": 17, "allow_large_L": True}, "K": {"preset": "constant6"}})
    assert cfg.L == 17


def test_negative_K_file_names_node(tmp_path):
    kfile = tmp_path / "k.json"
    kfile.write_text(json.dumps({"terms": [[[0, 0, 0, 0, 0], 1.0], [[0, 0, 0, 0, 1], 2.0]]}))
    with pytest.raises(NonPositiveKError, match="node"):
        parse_config(f'[grid]\nL = 6\n[K]\nfile = "{kfile.name}"\n', base=tmp_path)


def test_K_from_terms():
    cfg = parse_config("[grid]\nL = 6\n[K]\nterms = [[[0,0,0,0,0], 6.0], [[2,0,0,0,0], 0.5]]\n")
    assert cfg.K(np.eye(5)[:1])[0] == 6.5


def test_field_round_trip_bit_identical(tmp_path):
    g = build_grid(6)
    w = ScalarField(g, np.random.default_rng(0).normal(size=g.dim) * 1e-3)
    path = io.save_field(tmp_path / "w.json", w)
    back = io.load_field(path)
    assert np.array_equal(back.coeffs, w.coeffs)
    assert back.grid is g
    assert not list(tmp_path.glob(".*tmp"))


def test_field_file_validation(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"kind": "scalar_field", "schema_version": 1, "L": 6, "azimuth_count": 14, "coeffs": [0.0]}))
    with pytest.raises(ConfigError):
        io.load_field(p)
    with pytest.raises(ConfigError):
        io.load_field(tmp_path / "missing.json")


def test_trace_csv():
    rows = [{"s": 0.01, "xi": [0.0] * 5, "F": 1.5}, {"s": 0.03, "xi": [0.1] * 5, "F": 1.25}]
    text = io.trace_csv(rows)
    lines = text.strip().split("\n")
    assert lines[0] == "s,F,xi1,xi2,xi3,xi4,xi5"
    assert lines[2].startswith("0.03,1.25,0.1")


def _cfg(tmp_path, extra=""):
    return parse_config(f'[grid]\nL = 6\n[output]\ndir = "{tmp_path}"\n' + extra)


def test_verify_round_metric(tmp_path):
    status, body = dispatch("verify", _cfg(tmp_path))
    assert status == 0
    assert body["verification"]["sigma2_integral"] == pytest.approx(GAUSS_BONNET, rel=1e-13)
    saved = json.loads((tmp_path / "verify_report.json").read_text())
    assert saved["schema_version"] == 1 and saved["config"]["L"] == 6


def test_verify_reproduces_saved_report(tmp_path):
    g = build_grid(6)
    io.save_field(tmp_path / "w.json", project(g, 0.05 * g.nodes[:, 4] ** 2))
    cfg = _cfg(tmp_path, f'[verify]\nw = "{tmp_path / "w.json"}"\n')
    s1, b1 = dispatch("verify", cfg)
    s2, b2 = dispatch("verify", cfg)
    assert s1 == s2 == 1
    assert b1["verification"]["residual_inf"] == b2["verification"]["residual_inf"]


def test_degree_linear_eps(tmp_path):
    status, body = dispatch("degree", _cfg(tmp_path, '[K]\npreset = "linear_eps"\n'))
    assert status == 0
    assert body["degree"] == 0 and body["no_zeros"]
    assert body["index_sum"] == 1


def test_solve_linear_eps_obstructed(tmp_path):
    status, body = dispatch("solve", _cfg(tmp_path, '[K]\npreset = "linear_eps"\n'))
    assert status == 3
    assert body["error"]["code"] == "obstruction"
    assert not (tmp_path / "solution.json").exists()


def test_solve_writes_artifacts(tmp_path):
    status, body = dispatch("solve", _cfg(tmp_path, '[K]\npreset = "x5_squared"\n'))
    assert status == 0 and body["status"] == "converged_at_1"
    w = io.load_field(tmp_path / "solution.json")
    assert w.grid.L == 6
    assert (tmp_path / "trace.csv").read_text().startswith("s,")


def test_identities_and_gmap(tmp_path):
    status, body = dispatch("identities", _cfg(tmp_path))
    assert status == 0 and body["admissible"]
    status, body = dispatch("gmap", _cfg(tmp_path, '[K]\npreset = "linear_eps"\n'))
    assert status == 0
    assert body["values"][0]["G"][4] == pytest.approx(0.1, rel=1e-12)


def test_index_sum_error_status(tmp_path):
    status, body = dispatch("index-sum", _cfg(tmp_path))
    assert status == 5 and body["error"]["code"] == "nondegeneracy"


def test_main_entry(tmp_path, capsys):
    assert main(["verify", "--L", "6", "--out", str(tmp_path)]) == 0
    assert '"exit_status": 0' in capsys.readouterr().out
    assert main(["verify", "--L", "40", "--out", str(tmp_path)]) == 2
    assert main(["diagnose", "--L", "6", "--k", "constant6", "--out", str(tmp_path)]) == 0


def test_parser_flags():
    args = build_parser().parse_args(["gmap", "--xi", "0 0 0 0 0.1", "--xi", "0.1,0,0,0,0", "--k-param", "eps=0.2"])
    assert args.xi == [[0, 0, 0, 0, 0.1], [0.1, 0, 0, 0, 0]]
    assert args.k_param == [("eps", 0.2)]
