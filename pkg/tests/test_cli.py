import json

import pytest

from catsim import cli


def _run(tmp_path, verb, cfg=None, *flags):
    args = [verb, "--out", str(tmp_path / "out")]
    if cfg is not None:
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        args += ["--config", str(path)]
    return cli.main(args + list(flags))


def _header(path):
    lines = path.read_text().splitlines()
    return {l[2:].split(": ")[0]: l[2:].split(": ", 1)[1] for l in lines if l.startswith("#")}


def test_nogo_report(tmp_path, capsys):
    assert _run(tmp_path, "nogo", None, "--seed", "3") == 0
    doc = json.loads((tmp_path / "out" / "nogo.json").read_text())
    assert doc["report"]["commutant_dimension"] == 4
    assert doc["report"]["cnot_in_identity_component"] is False
    assert doc["header"]["seed"] == 3
    assert '"commutant_dimension": 4' in capsys.readouterr().out


def test_analytic_table(tmp_path, capsys):
    cfg = {"params": {"nbar": 7.0, "kappa1": 1e-3}}
    assert _run(tmp_path, "analytic", cfg) == 0
    text = (tmp_path / "out" / "analytic.csv").read_text()
    assert "98.2" in text and "97.3" in text
    hdr = _header(tmp_path / "out" / "analytic.csv")
    assert hdr["config_sha256"] == cli.config_hash({**cfg, "verb": "analytic"})
    assert "F=98.2%" in capsys.readouterr().out


@pytest.mark.parametrize("values", [[], [0.5, -1.0], ["x"]])
def test_bad_sweep_grid_exits_2(tmp_path, values):
    cfg = {"gate": "idle", "sweep": {"axis": "T", "values": values}}
    assert _run(tmp_path, "sweep", cfg) == cli.EXIT_CONFIG


def test_config_errors_exit_2(tmp_path):
    assert _run(tmp_path, "sweep", {"gate": "idle", "sweep": {"axis": "q", "values": [1]}}) == 2
    assert _run(tmp_path, "simulate-gate", {"gate": "swap"}) == 2
    assert _run(tmp_path, "simulate-gate", {"params": {"nbar": -1}}) == 2
    assert _run(tmp_path, "qec", {"qec": {"n": 3}}) == 2  # no seed
    assert _run(tmp_path, "qec", {"qec": {"n": 4}}, "--seed", "1") == 2
    assert _run(tmp_path, "qec", {"qec": {"gadget": "teleport"}}, "--seed", "1") == 2
    assert _run(tmp_path, "qec", {"qec": {"decoder": "lookup"}}, "--seed", "1") == 2
    assert _run(tmp_path, "analytic", {"params": {"nbar": 7.0}}) == 2
    bad = tmp_path / "broken.json"
    bad.write_text("{")
    assert cli.main(["nogo", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert cli.main(["nogo", "--threads", "0", "--out", str(tmp_path)]) == 2


def test_invariant_violation_exits_3(tmp_path):
    # loss faster than the confinement pulls the state out of the code space
    cfg = {"gate": "idle", "T": 0.3, "params": {"nbar": 2.0, "kappa1": 2.0}}
    assert _run(tmp_path, "simulate-gate", cfg) == cli.EXIT_NUMERIC
    cfg = {"gate": "idle", "T": 0.2, "dim": 12, "params": {"nbar": 4.0}}
    assert _run(tmp_path, "simulate-gate", cfg) == cli.EXIT_CONFIG  # truncation too small


def test_simulate_gate_idle(tmp_path):
    cfg = {"gate": "idle", "T": 0.5, "params": {"nbar": 2.0, "kappa1": 1e-3}}
    assert _run(tmp_path, "simulate-gate", cfg) == 0
    out = tmp_path / "out"
    assert {p.name for p in out.iterdir()} == {"chi.csv", "chi_err.csv", "report.json"}
    assert _header(out / "chi_err.csv")["verb"] == "simulate-gate"


def test_sweep_over_nbar(tmp_path):
    cfg = {"gate": "idle", "T": 1.0, "params": {"nbar": 1.0, "kappa1": 1e-3},
           "sweep": {"axis": "nbar", "values": [1.0, 2.0]}}
    assert _run(tmp_path, "sweep", cfg, "--threads", "2") == 0
    lines = [l for l in (tmp_path / "out" / "sweep.csv").read_text().splitlines()
             if not l.startswith("#")]
    cols = lines[0].split(",")
    rows = [dict(zip(cols, l.split(","))) for l in lines[1:]]
    assert [float(r["nbar"]) for r in rows] == [1.0, 2.0]
    # bit flips fall with the photon number
    assert float(rows[1]["p_X_type"]) < float(rows[0]["p_X_type"])


def test_wigner_frames(tmp_path):
    cfg = {"gate": "idle", "T": 0.2, "params": {"nbar": 1.0},
           "wigner": {"frames": 2, "range": [-2, 2], "step": 0.5, "initial": "+"}}
    assert _run(tmp_path, "wigner", cfg) == 0
    files = sorted(p.name for p in (tmp_path / "out").glob("wigner_*.csv"))
    assert len(files) == 3  # initial frame plus two evolved ones
    assert "t" in _header(tmp_path / "out" / files[0])
    cfg["wigner"]["initial"] = "cat"
    assert _run(tmp_path, "wigner", cfg) == 2


@pytest.mark.parametrize("decoder", ["mwpm", "weighted", "majority"])
def test_qec_csv_is_byte_identical(tmp_path, decoder):
    cfg = {"qec": {"n": 3, "r": 2, "p_idle": 1e-2, "p_meas": 1e-2, "shots": 3000,
                   "gadgets": ["memory", "CNOT_transversal"], "decoder": decoder}}
    assert _run(tmp_path, "qec", cfg, "--seed", "7") == 0
    first = (tmp_path / "out" / "qec.csv").read_bytes()
    assert _run(tmp_path, "qec", cfg, "--seed", "7") == 0
    assert (tmp_path / "out" / "qec.csv").read_bytes() == first
    assert _header(tmp_path / "out" / "qec.csv")["seed"] == "7"
    doc = json.loads((tmp_path / "out" / "qec.json").read_text())
    assert [r["gadget"] for r in doc["rates"]] == ["memory", "CNOT_transversal"]
    assert _run(tmp_path, "qec", cfg, "--seed", "8") == 0
    assert (tmp_path / "out" / "qec.csv").read_bytes() != first


def test_qec_from_cat_params(tmp_path):
    cfg = {"qec": {"n": 3, "r": 1, "shots": 500, "gadget": "memory",
                   "from_cat_params": {"nbar": 7.0, "kappa1": 1e-3}}}
    assert _run(tmp_path, "qec", cfg, "--seed", "1") == 0
    doc = json.loads((tmp_path / "out" / "qec.json").read_text())
    assert doc["params"]["p_idle"] > 0


def test_flags_override_file_fields(tmp_path):
    cfg = cli.load_config(None, {"verb": "nogo", "seed": 5})
    assert cfg == {"verb": "nogo", "seed": 5}
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"seed": 1, "samples": 10}))
    cfg = cli.load_config(str(path), {"verb": "nogo", "seed": 9, "plot": None})
    assert cfg == {"verb": "nogo", "seed": 9, "samples": 10}
    with pytest.raises(cli.ConfigError):
        cli.load_config(None, {"verb": "plot"})
