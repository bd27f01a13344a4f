"""Config-driven runner: schema strictness, CSV emission, exit codes.

Scenario fixtures here are deliberately tiny (coarse bases, short spans,
minimum ensemble sizes) so the whole module stays fast; the physics
behind the numbers is exercised by the module test suites.
"""

import hashlib
import json
import math

import numpy as np
import pytest
import yaml

from rotorengine import cli
from rotorengine.autonomous import ObservableTimeline
from rotorengine.cli import ConfigError, load_config, validate_config


def _write(tmp_path, name, payload):
    path = tmp_path / name
    if isinstance(payload, dict):
        path.write_text(yaml.safe_dump(payload))
    else:
        path.write_text(payload)
    return str(path)


def _read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


class TestConfigSchema:
    def test_defaults_fill_in(self):
        cfg = validate_config({"scenario": "autonomous-transient"})
        assert cfg["seed"] == 0
        assert cfg["output"] == "autonomous-transient"
        assert cfg["threads"] == 1
        assert cfg["solver_tol"] == 1e-8
        assert cfg["basis"] == {"l_min": -40, "l_max": 120}
        assert cfg["t_span"] == (0.0, 130.0)
        assert cfg["n_out"] == 201
        assert cfg["rate_dt"] is None
        assert cfg["edge_tol"] == 1e-6
        assert cfg["init"]["kind"] == "momentum" and cfg["init"]["excited"] is True
        p = cfg["params"]
        assert (p["g"], p["kappa"], p["n_h"], p["n_c"]) == (10.0, 1.0, 1.0, 0.1)
        assert p["inertia"] == 10.0 and p["gamma"] == 0.0 and p["kT_load"] is None

    def test_config_must_be_a_mapping(self):
        with pytest.raises(ConfigError):
            validate_config(["scenario"])
        with pytest.raises(ConfigError):
            validate_config(None)

    def test_scenario_is_required_and_closed(self):
        with pytest.raises(ConfigError, match="scenario"):
            validate_config({})
        with pytest.raises(ConfigError, match="scenario"):
            validate_config({"scenario": "driven"})

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="paramz"):
            validate_config({"scenario": "driven-sweep", "paramz": {}})

    def test_keys_are_scoped_to_their_scenario(self):
        # sweep belongs to the sweep scenarios, edge_tol to the transient
        with pytest.raises(ConfigError, match="does not apply"):
            validate_config({"scenario": "driven-phase-diagram",
                             "sweep": {"start": 1, "stop": 2, "points": 2}})
        with pytest.raises(ConfigError, match="does not apply"):
            validate_config({"scenario": "classical-compare", "edge_tol": 0.1,
                             "t_grid": {"stop": 1.0, "points": 2}})

    def test_param_sections_are_scenario_specific(self):
        # a sweep owns omega / gamma; fixing them per-point is a mistake
        with pytest.raises(ConfigError, match="params.omega"):
            validate_config({"scenario": "driven-sweep",
                             "params": {"omega": 1.0},
                             "sweep": {"start": 1, "stop": 2, "points": 2}})
        with pytest.raises(ConfigError, match="params.gamma"):
            validate_config({"scenario": "load-sweep",
                             "params": {"gamma": 1.0},
                             "sweep": {"start": 1, "stop": 2, "points": 2}})
        with pytest.raises(ConfigError, match="params.inertia"):
            validate_config({"scenario": "driven-sweep",
                             "params": {"inertia": 5.0},
                             "sweep": {"start": 1, "stop": 2, "points": 2}})

    def test_seed_bounds(self):
        for bad in (-1, 2**64, True, "7"):
            with pytest.raises(ConfigError, match="seed"):
                validate_config({"scenario": "driven-phase-diagram", "seed": bad})
        cfg = validate_config({"scenario": "driven-phase-diagram", "seed": 2**64 - 1})
        assert cfg["seed"] == 2**64 - 1

    def test_output_is_a_plain_basename(self):
        for bad in ("a/b", "", 3):
            with pytest.raises(ConfigError, match="output"):
                validate_config({"scenario": "driven-phase-diagram", "output": bad})

    def test_threads_positive_integer(self):
        for bad in (0, -2, True, 1.5):
            with pytest.raises(ConfigError, match="threads"):
                validate_config({"scenario": "driven-phase-diagram", "threads": bad})

    def test_solver_tol_window(self):
        for bad in (0.0, -1e-9, 1e-3, "tight"):
            with pytest.raises(ConfigError, match="solver_tol"):
                validate_config({"scenario": "autonomous-transient",
                                 "solver_tol": bad})

    def test_basis_ordering(self):
        with pytest.raises(ConfigError, match="l_min"):
            validate_config({"scenario": "autonomous-transient",
                             "basis": {"l_min": 10, "l_max": 10}})

    def test_booleans_are_not_numbers(self):
        with pytest.raises(ConfigError, match="wrong type"):
            validate_config({"scenario": "driven-sweep",
                             "params": {"kappa": True},
                             "sweep": {"start": 1, "stop": 2, "points": 2}})

    def test_params_cross_validated_by_construction(self):
        # library-level constraints (cold below hot, positive rates)
        # surface as config errors before anything runs
        with pytest.raises(ConfigError, match="invalid 'params'"):
            validate_config({"scenario": "driven-phase-diagram",
                             "params": {"n_h": 0.1, "n_c": 1.0}})
        with pytest.raises(ConfigError, match="invalid 'params'"):
            validate_config({"scenario": "classical-compare",
                             "params": {"kappa": -1.0},
                             "t_grid": {"stop": 1.0, "points": 2}})

    def test_sweep_grid_contract(self):
        base = {"scenario": "driven-sweep"}
        with pytest.raises(ConfigError, match="missing required"):
            validate_config({**base, "sweep": {"start": 1, "points": 2}})
        for sweep in ({"start": 0, "stop": 1, "points": 2},
                      {"start": 2, "stop": 1, "points": 2},
                      {"start": 1, "stop": 2, "points": 1}):
            with pytest.raises(ConfigError, match="sweep"):
                validate_config({**base, "sweep": sweep})

    def test_transient_init_contract(self):
        base = {"scenario": "autonomous-transient"}
        with pytest.raises(ConfigError, match="init.kind"):
            validate_config({**base, "init": {"kind": "thermal"}})
        with pytest.raises(ConfigError, match="var_phi"):
            validate_config({**base, "init": {"kind": "packet", "var_phi": 0.0}})
        for span in ([2.0, 1.0], [0.0], [0.0, 1.0, 2.0], "full"):
            with pytest.raises(ConfigError, match="t_span"):
                validate_config({**base, "t_span": span})
        with pytest.raises(ConfigError, match="n_out"):
            validate_config({**base, "n_out": 1})
        for tol in (0.0, 1.5):
            with pytest.raises(ConfigError, match="edge_tol"):
                validate_config({**base, "edge_tol": tol})
        with pytest.raises(ConfigError, match="rate_dt"):
            validate_config({**base, "rate_dt": -0.1})

    def test_steady_state_method_enum(self):
        with pytest.raises(ConfigError, match="method"):
            validate_config({"scenario": "load-sweep",
                             "sweep": {"start": 1, "stop": 2, "points": 2},
                             "steady_state": {"method": "newton"}})

    def test_classical_contract(self):
        base = {"scenario": "classical-compare",
                "t_grid": {"stop": 1.0, "points": 2}}
        with pytest.raises(ConfigError, match="n_traj"):
            validate_config({**base, "n_traj": 999})
        with pytest.raises(ConfigError, match="t_grid"):
            validate_config({"scenario": "classical-compare",
                             "t_grid": {"stop": 0.0, "points": 2}})
        with pytest.raises(ConfigError, match="missing required"):
            validate_config({"scenario": "classical-compare",
                             "t_grid": {"points": 2}})
        for models in ([], ["coin", "coin"], ["dice"], "coin"):
            with pytest.raises(ConfigError, match="models"):
                validate_config({**base, "models": models})
        with pytest.raises(ConfigError, match="variances"):
            validate_config({**base, "init": {"var_ell": 0.0}})
        with pytest.raises(ConfigError, match="dt"):
            validate_config({**base, "dt": -1e-4})

    def test_section_must_be_mapping(self):
        with pytest.raises(ConfigError, match="must be a mapping"):
            validate_config({"scenario": "driven-sweep", "sweep": 3})
        # an explicit null section falls back to defaults
        cfg = validate_config({"scenario": "driven-phase-diagram", "params": None})
        assert cfg["params"]["omega"] == 1.0


class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(str(tmp_path / "nope.yaml"))

    def test_invalid_yaml(self, tmp_path):
        path = _write(tmp_path, "bad.yaml", "scenario: [unclosed\n")
        with pytest.raises(ConfigError, match="not valid YAML"):
            load_config(path)

    def test_sha256_matches_file_bytes(self, tmp_path):
        path = _write(tmp_path, "ok.yaml", {"scenario": "driven-phase-diagram"})
        cfg = load_config(path)
        digest = hashlib.sha256(open(path, "rb").read()).hexdigest()
        assert cfg["_sha256"] == digest


_TIMELINE_COLS = [
    "t_kappa", "mean_L_hbar", "std_L_hbar", "W_int", "W_kin", "W_net",
    "Q_BA", "W_erg", "W_erg_rate", "S_sys_rate", "S_h_rate", "S_c_rate",
    "S_net_rate", "trace_err", "edge_pop",
]


def _toy_timeline(n):
    rng = np.random.default_rng(5)
    fields = {c: rng.standard_normal(n) * 10.0 ** rng.integers(-12, 3)
              for c in _TIMELINE_COLS}
    return ObservableTimeline(truncation_valid=True, **fields)


class TestTimelineCsv:
    def test_empty_timeline_writes_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        cli.emit_timeline(_toy_timeline(0), path)
        assert path.read_text() == ",".join(_TIMELINE_COLS) + "\n"

    def test_rows_round_trip_exactly(self, tmp_path):
        # 17 significant digits reproduce every float64 bit for bit
        tl = _toy_timeline(3)
        path = tmp_path / "round.csv"
        cli.emit_timeline(tl, path)
        header, rows = _read_csv(path)
        assert header == _TIMELINE_COLS
        assert len(rows) == 3
        for j, col in enumerate(_TIMELINE_COLS):
            got = np.array([float(r[j]) for r in rows])
            assert np.array_equal(got, getattr(tl, col))


def _run_and_load(tmp_path, payload, name="cfg.yaml", **kwargs):
    path = _write(tmp_path, name, payload)
    code = cli.run(path, output_dir=str(tmp_path / "out"), **kwargs)
    return code, tmp_path / "out"


class TestScenarioRuns:
    def test_driven_sweep(self, tmp_path):
        code, out = _run_and_load(tmp_path, {
            "scenario": "driven-sweep", "output": "sw",
            "sweep": {"start": 0.5, "stop": 2.0, "points": 3, "log": True},
        })
        assert code == 0
        header, rows = _read_csv(out / "sw.csv")
        assert header == ["omega_over_kappa", "W_cyc_over_hg",
                          "Qh_cyc_over_hw0", "eta_normalized"]
        omegas = np.array([float(r[0]) for r in rows])
        assert np.allclose(omegas, np.geomspace(0.5, 2.0, 3))
        meta = json.loads((out / "sw.meta.json").read_text())
        assert meta["scenario"] == "driven-sweep"
        assert meta["result"] == "sw.csv"
        assert meta["config_sha256"] == hashlib.sha256(
            (tmp_path / "cfg.yaml").read_bytes()).hexdigest()

    def test_driven_phase_diagram(self, tmp_path):
        code, out = _run_and_load(tmp_path, {
            "scenario": "driven-phase-diagram", "output": "pd",
        })
        assert code == 0
        header, rows = _read_csv(out / "pd.csv")
        assert header == ["cos_phi", "p_e"]
        assert len(rows) > 10
        pe = np.array([float(r[1]) for r in rows])
        assert np.all((0 <= pe) & (pe <= 1))
        meta = json.loads((out / "pd.meta.json").read_text())
        assert isinstance(meta["signed_area_over_hg"], float)
        assert meta["signed_area_over_hg"] != 0.0
        assert isinstance(meta["n_cycles"], int)

    def test_autonomous_transient(self, tmp_path):
        code, out = _run_and_load(tmp_path, {
            "scenario": "autonomous-transient", "output": "tr",
            "basis": {"l_min": -15, "l_max": 25},
            "t_span": [0.0, 2.0], "n_out": 5, "edge_tol": 0.5,
        })
        assert code == 0
        header, rows = _read_csv(out / "tr.csv")
        assert header == _TIMELINE_COLS
        assert len(rows) == 5
        meta = json.loads((out / "tr.meta.json").read_text())
        assert meta["truncation_window"] == [-15, 25]
        assert 0.0 < meta["max_edge_pop"] < 0.5

    def test_transient_packet_init(self, tmp_path):
        code, out = _run_and_load(tmp_path, {
            "scenario": "autonomous-transient", "output": "pk",
            "basis": {"l_min": -15, "l_max": 25},
            "init": {"kind": "packet", "mu_phi": 1.5, "var_phi": 0.2},
            "t_span": [0.0, 1.0], "n_out": 3, "edge_tol": 0.5,
        })
        assert code == 0
        meta = json.loads((out / "pk.meta.json").read_text())
        assert meta["init"]["kind"] == "packet"

    def test_momentum_init_outside_window_is_config_error(self, tmp_path, capsys):
        code, _ = _run_and_load(tmp_path, {
            "scenario": "autonomous-transient",
            "basis": {"l_min": -5, "l_max": 5},
            "init": {"kind": "momentum", "l0": 40},
            "t_span": [0.0, 1.0], "n_out": 3, "edge_tol": 1.0,
        })
        assert code == 2
        assert "init.l0" in capsys.readouterr().err

    def test_load_sweep(self, tmp_path):
        code, out = _run_and_load(tmp_path, {
            "scenario": "load-sweep", "output": "ld",
            "basis": {"l_min": -20, "l_max": 20},
            "sweep": {"start": 1.0, "stop": 10.0, "points": 2, "log": True},
            "steady_state": {"method": "direct"},
        })
        assert code == 0
        header, rows = _read_csv(out / "ld.csv")
        assert header[:2] == ["gamma_over_kappa", "W_load"]
        assert header[-3:] == ["method", "windows", "convergence"]
        assert [r[8] for r in rows] == ["direct", "direct"]
        # rows come back in ascending gamma with a finite convergence figure
        gammas = [float(r[0]) for r in rows]
        assert gammas == sorted(gammas)
        assert all(float(r[10]) < 1e-8 for r in rows)

    def test_classical_compare(self, tmp_path):
        code, out = _run_and_load(tmp_path, {
            "scenario": "classical-compare", "output": "cc",
            "n_traj": 1000, "t_grid": {"stop": 0.5, "points": 3},
            "models": ["coin", "magnet"],
        })
        assert code == 0
        header, rows = _read_csv(out / "cc_coin.csv")
        assert header == ["t_kappa", "mean_L_hbar", "var_L_hbar2",
                          "sem_L_hbar", "mean_C", "sem_spin"]
        assert len(rows) == 3
        header, _ = _read_csv(out / "cc_magnet.csv")
        assert header[4] == "mean_mz"
        meta = json.loads((out / "cc_coin.meta.json").read_text())
        assert meta["n_traj"] == 1000
        assert meta["dt"] > 0
        assert len(meta["flip_counts"]) == 2
        mag = json.loads((out / "cc_magnet.meta.json").read_text())
        assert 0.0 <= mag["clamp_fraction"] < 1.0


class TestDeterminism:
    CFG = {
        "scenario": "classical-compare", "output": "det",
        "n_traj": 1000, "t_grid": {"stop": 0.3, "points": 2},
        "models": ["coin"],
    }

    def test_rerun_is_byte_identical(self, tmp_path):
        path = _write(tmp_path, "det.yaml", self.CFG)
        assert cli.run(path, output_dir=str(tmp_path / "a")) == 0
        assert cli.run(path, output_dir=str(tmp_path / "b")) == 0
        first = (tmp_path / "a" / "det_coin.csv").read_bytes()
        second = (tmp_path / "b" / "det_coin.csv").read_bytes()
        assert first == second

    def test_thread_count_does_not_change_bytes(self, tmp_path):
        path = _write(tmp_path, "det.yaml", self.CFG)
        assert cli.run(path, output_dir=str(tmp_path / "a"), threads=1) == 0
        assert cli.run(path, output_dir=str(tmp_path / "b"), threads=3) == 0
        assert ((tmp_path / "a" / "det_coin.csv").read_bytes()
                == (tmp_path / "b" / "det_coin.csv").read_bytes())
        meta = json.loads((tmp_path / "b" / "det_coin.meta.json").read_text())
        assert meta["threads"] == 3

    def test_seed_override_changes_the_draws(self, tmp_path):
        path = _write(tmp_path, "det.yaml", self.CFG)
        assert cli.run(path, output_dir=str(tmp_path / "a")) == 0
        assert cli.run(path, output_dir=str(tmp_path / "b"), seed=7) == 0
        meta = json.loads((tmp_path / "b" / "det_coin.meta.json").read_text())
        assert meta["seed"] == 7
        assert ((tmp_path / "a" / "det_coin.csv").read_bytes()
                != (tmp_path / "b" / "det_coin.csv").read_bytes())


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path, capsys):
        path = _write(tmp_path, "bad.yaml", {"scenario": "driven-sweep",
                                             "paramz": {}})
        assert cli.run(path) == 2
        assert "config error" in capsys.readouterr().err
        assert cli.validate(path) == 2

    def test_missing_config_is_2(self, tmp_path):
        assert cli.run(str(tmp_path / "absent.yaml")) == 2

    def test_runtime_value_error_is_2(self, tmp_path, capsys):
        # dt passes the schema but violates the stability bound downstream
        code, _ = _run_and_load(tmp_path, {
            "scenario": "classical-compare",
            "n_traj": 1000, "t_grid": {"stop": 0.3, "points": 2},
            "models": ["coin"], "dt": 0.1,
        })
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_truncation_breach_is_3_but_still_writes(self, tmp_path, capsys):
        code, out = _run_and_load(tmp_path, {
            "scenario": "autonomous-transient", "output": "br",
            "basis": {"l_min": -15, "l_max": 25},
            "t_span": [0.0, 2.0], "n_out": 5, "edge_tol": 1e-3,
        })
        assert code == 3
        err = capsys.readouterr().err
        assert "numerical failure" in err and "edge population" in err
        # the run is reported, not discarded: results and metadata exist
        assert (out / "br.csv").exists()
        meta = json.loads((out / "br.meta.json").read_text())
        assert meta["max_edge_pop"] > 1e-3

    def test_output_collision_is_4(self, tmp_path, capsys):
        path = _write(tmp_path, "ok.yaml", {"scenario": "driven-phase-diagram"})
        blocker = tmp_path / "blocked"
        blocker.write_text("a file, not a directory\n")
        assert cli.run(path, output_dir=str(blocker)) == 4
        assert "i/o error" in capsys.readouterr().err

    def test_bad_cli_seed_is_2(self, tmp_path):
        path = _write(tmp_path, "ok.yaml", {"scenario": "driven-phase-diagram"})
        assert cli.run(path, seed=-1) == 2


class TestMain:
    def test_validate_subcommand(self, tmp_path, capsys):
        path = _write(tmp_path, "ok.yaml", {"scenario": "driven-phase-diagram",
                                            "seed": 11})
        assert cli.main(["validate", path]) == 0
        out = capsys.readouterr().out
        assert "config ok" in out and "seed=11" in out

    def test_run_subcommand_with_overrides(self, tmp_path, capsys):
        path = _write(tmp_path, "cc.yaml", {
            "scenario": "classical-compare", "output": "m",
            "n_traj": 1000, "t_grid": {"stop": 0.3, "points": 2},
            "models": ["coin"],
        })
        out_dir = tmp_path / "res"
        assert cli.main(["run", path, "--output-dir", str(out_dir),
                         "--seed", "3", "--threads", "2"]) == 0
        printed = capsys.readouterr().out.strip()
        assert printed.endswith("m_coin.csv")
        meta = json.loads((out_dir / "m_coin.meta.json").read_text())
        assert meta["seed"] == 3 and meta["threads"] == 2
