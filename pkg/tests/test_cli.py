import json

import numpy as np
import pytest

from fstchain.cli import (
    EXIT_BAD_INPUT,
    EXIT_OK,
    EXIT_TOLERANCE,
    EXIT_VALIDATION,
    main,
    parse_angle,
)


def _result(out_dir):
    return json.loads((out_dir / "result.json").read_text())


def _result_without_wall_time(out_dir):
    d = _result(out_dir)
    d.pop("wall_time_s")
    return d


class TestParseAngle:
    @pytest.mark.parametrize(
        "text,value",
        [("pi", np.pi), ("0.5pi", np.pi / 2), ("-pi", -np.pi),
         ("2pi", 2 * np.pi), ("1.5707963", 1.5707963), ("0.25 pi", np.pi / 4)],
    )
    def test_values(self, text, value):
        assert parse_angle(text) == pytest.approx(value, rel=1e-12)

    def test_garbage(self):
        from fstchain.cli import CliError

        with pytest.raises(CliError):
            parse_angle("piapple")


class TestSynthesize:
    def test_writes_chain_csv(self, tmp_path):
        out = tmp_path / "o"
        code = main(["--out", str(out), "synthesize", "--n", "5",
                     "--theta", "0.5pi", "--tau", "1.0"])
        assert code == EXIT_OK
        lines = (out / "chain.csv").read_text().strip().split("\n")
        assert lines[0] == "n,J_n,Delta_n"
        assert len(lines) == 6
        res = _result(out)["result"]
        assert len(res["couplings"]) == 4
        assert res["detuning_range_matches_formula"] is False

    def test_j_max_in_hz(self, tmp_path):
        out = tmp_path / "o"
        main(["--out", str(out), "synthesize", "--n", "4", "--theta", "pi",
              "--j-max", "1e6"])
        res = _result(out)["result"]
        # J_max = 2 pi * 1 MHz rad/s; PST even chain tau = N pi / (4 J_max)
        assert max(res["couplings"]) == pytest.approx(2 * np.pi * 1e6, rel=1e-9)
        assert res["tau"] == pytest.approx(4 * np.pi / (4 * 2 * np.pi * 1e6))

    def test_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        argv = ["synthesize", "--n", "7", "--theta", "0.3pi", "--tau", "2.0"]
        main(["--out", str(a)] + argv)
        main(["--out", str(b)] + argv)
        assert (a / "chain.csv").read_bytes() == (b / "chain.csv").read_bytes()
        assert _result_without_wall_time(a) == _result_without_wall_time(b)

    def test_theta_clamped_with_warning(self, tmp_path, capsys):
        out = tmp_path / "o"
        code = main(["--out", str(out), "synthesize", "--n", "4",
                     "--theta", "1.5pi", "--tau", "1.0"])
        assert code == EXIT_OK
        assert "clamped" in capsys.readouterr().err
        assert _result(out)["inputs"]["theta"] == pytest.approx(np.pi)

    def test_bad_n_is_validation_error(self, tmp_path):
        code = main(["--out", str(tmp_path / "o"), "synthesize", "--n", "1",
                     "--theta", "pi", "--tau", "1.0"])
        assert code == EXIT_VALIDATION

    def test_missing_required_arg(self, tmp_path):
        code = main(["--out", str(tmp_path / "o"), "synthesize", "--n", "4"])
        assert code == EXIT_BAD_INPUT


class TestSpectrumAndMapping:
    def test_spectrum_ok(self, tmp_path):
        out = tmp_path / "o"
        code = main(["--out", str(out), "spectrum", "--n", "6",
                     "--theta", "0.4pi", "--tau", "1.0"])
        assert code == EXIT_OK
        lines = (out / "spectrum.csv").read_text().strip().split("\n")
        assert len(lines) == 7

    def test_verify_mapping_ok(self, tmp_path):
        out = tmp_path / "o"
        code = main(["--out", str(out), "verify-mapping", "--n", "5",
                     "--theta", "0.5pi", "--tau", "1.0"])
        assert code == EXIT_OK
        res = _result(out)["result"]
        assert res["ok"] is True
        assert res["distance"] < 1e-8


class TestEvolve:
    def test_fig2a_endpoint(self, tmp_path):
        out = tmp_path / "o"
        code = main(["--out", str(out), "evolve", "--n", "15",
                     "--theta", "0.5pi", "--tau", "1.0", "--excite", "1",
                     "--time", "2", "--time-in-tau", "--method", "sector"])
        assert code == EXIT_OK
        pops = _result(out)["result"]["populations"]
        assert pops[14] == pytest.approx(1.0, abs=1e-6)

    def test_state_file_round_trip(self, tmp_path):
        out1 = tmp_path / "a"
        main(["--out", str(out1), "evolve", "--n", "4", "--theta", "0.5pi",
              "--tau", "1.0", "--excite", "1", "--time", "0.5"])
        out2 = tmp_path / "b"
        code = main(["--out", str(out2), "evolve", "--n", "4",
                     "--theta", "0.5pi", "--tau", "1.0",
                     "--state-file", str(out1 / "state.json"),
                     "--time", "0.5"])
        assert code == EXIT_OK
        out3 = tmp_path / "c"
        main(["--out", str(out3), "evolve", "--n", "4", "--theta", "0.5pi",
              "--tau", "1.0", "--excite", "1", "--time", "1.0"])
        np.testing.assert_allclose(
            _result(out2)["result"]["populations"],
            _result(out3)["result"]["populations"],
            atol=1e-9,
        )


class TestDecomposeAndSweep:
    def test_decompose_counts(self, tmp_path):
        out = tmp_path / "o"
        code = main(["--out", str(out), "decompose", "--n", "6",
                     "--theta", "0.5pi", "--j-max", "1e6"])
        assert code == EXIT_OK
        res = _result(out)["result"]
        assert res["fswap_count"] == 12
        assert res["iswap_count"] == 3
        circ = json.loads((out / "circuit.json").read_text())
        assert circ["n_sites"] == 6
        j = 2 * np.pi * 1e6
        assert res["total_duration"] == pytest.approx(6 * np.pi / (2 * j))

    def test_decompose_rejects_n2(self, tmp_path):
        code = main(["--out", str(tmp_path / "o"), "decompose", "--n", "2",
                     "--theta", "pi", "--j-max", "1e6"])
        assert code == EXIT_VALIDATION

    def test_speed_sweep(self, tmp_path):
        out = tmp_path / "o"
        code = main(["--out", str(out), "speed-sweep", "--n", "5..10",
                     "--theta", "0.5pi,pi"])
        assert code == EXIT_OK
        lines = (out / "speed_sweep.csv").read_text().strip().split("\n")
        assert len(lines) == 1 + 6 * 2
        assert _result(out)["result"]["min_ratio"] >= np.sqrt(3) - 1e-9

    def test_speed_sweep_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        argv = ["speed-sweep", "--n", "5..8", "--theta", "pi"]
        main(["--out", str(a)] + argv)
        main(["--out", str(b)] + argv)
        assert (a / "speed_sweep.csv").read_bytes() == (b / "speed_sweep.csv").read_bytes()


class TestParity:
    def test_basis_string(self, tmp_path):
        out = tmp_path / "o"
        code = main(["--out", str(out), "parity", "--basis", "0101"])
        assert code == EXIT_OK
        res = _result(out)["result"]
        assert res["inferred_parity"] == "even"
        assert res["left_ancilla_one_probability"] == pytest.approx(1.0, abs=1e-8)

    def test_odd_basis(self, tmp_path):
        out = tmp_path / "o"
        main(["--out", str(out), "parity", "--basis", "100"])
        assert _result(out)["result"]["inferred_parity"] == "odd"

    def test_shots_deterministic_with_seed(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            main(["--out", str(out), "parity", "--basis", "0110",
                  "--shots", "1000", "--seed", "7"])
            outs.append(_result(out)["result"]["shot_ones"])
        assert outs[0] == outs[1] == 1000

    def test_missing_input(self, tmp_path):
        assert main(["--out", str(tmp_path / "o"), "parity"]) == EXIT_BAD_INPUT

    def test_bad_basis(self, tmp_path):
        code = main(["--out", str(tmp_path / "o"), "parity", "--basis", "01a"])
        assert code == EXIT_BAD_INPUT


class TestScenario:
    def _scenario_file(self, tmp_path, body):
        f = tmp_path / "scenario.json"
        f.write_text(json.dumps(body))
        return f

    def test_fig2a_refocusing(self, tmp_path):
        f = self._scenario_file(
            tmp_path,
            {"n_sites": 15, "theta": 0.5 * np.pi, "excitations": [1]},
        )
        out = tmp_path / "o"
        code = main(["--out", str(out), "scenario", str(f), "--steps", "40"])
        assert code == EXIT_OK
        final = _result(out)["result"]["final_populations"]
        assert final[14] == pytest.approx(1.0, abs=1e-6)
        lines = (out / "populations.csv").read_text().strip().split("\n")
        assert len(lines) == 42

    def test_missing_file(self, tmp_path):
        code = main(["--out", str(tmp_path / "o"), "scenario",
                     str(tmp_path / "nope.json")])
        assert code == EXIT_BAD_INPUT

    def test_determinism(self, tmp_path):
        f = self._scenario_file(
            tmp_path, {"n_sites": 6, "theta": 1.0, "excitations": [2]}
        )
        a, b = tmp_path / "a", tmp_path / "b"
        main(["--out", str(a), "scenario", str(f), "--steps", "20"])
        main(["--out", str(b), "scenario", str(f), "--steps", "20"])
        assert (a / "populations.csv").read_bytes() == (b / "populations.csv").read_bytes()
        assert _result_without_wall_time(a) == _result_without_wall_time(b)


class TestDeviceZZScan:
    def test_scan_finds_sign_change(self, tmp_path):
        out = tmp_path / "o"
        code = main(["--out", str(out), "device-zz-scan", "--phi-min", "0.3",
                     "--phi-max", "0.45", "--points", "7"])
        assert code == EXIT_OK
        assert _result(out)["result"]["sign_changes_zeta12"] >= 1
        lines = (out / "zz_scan.csv").read_text().strip().split("\n")
        assert lines[0] == "phi,zeta12,zeta23"
        assert len(lines) == 8


def test_unknown_command(tmp_path):
    assert main(["--out", str(tmp_path / "o"), "frobnicate"]) == EXIT_BAD_INPUT
