import json
import subprocess
import sys

import pytest

from nmk import sample
from nmk.serialize import script_to_json, state_to_json
from nmk.steps import Step


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "nmk", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
        timeout=300,
    )


def result_of(proc):
    assert proc.stdout, proc.stderr
    return json.loads(proc.stdout)


class TestAnalyze:
    def test_markov_example(self):
        proc = run_cli("analyze", "zoo:ghz_diag")
        assert proc.returncode == 0
        out = result_of(proc)
        assert out["entropy"]["m_i_bits"] == pytest.approx(0.0, abs=1e-10)
        assert out["markov"]["verdict"] is True

    def test_non_markov_example(self):
        proc = run_cli("analyze", "zoo:bell_e0")
        assert proc.returncode == 0
        out = result_of(proc)
        assert out["entropy"]["m_i_bits"] == pytest.approx(1.0, abs=1e-10)
        assert out["markov"]["verdict"] is False

    def test_malformed_file_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        rho = sample("density_hs", (2,), 1)
        payload = state_to_json(rho)
        payload["matrix"]["re"][0][0] += 0.4
        bad.write_text(json.dumps(payload))
        proc = run_cli("analyze", str(bad))
        assert proc.returncode == 2
        assert "unit_trace" in proc.stderr

    def test_unreadable_ref_exits_2(self):
        proc = run_cli("analyze", "zoo:not_a_state")
        assert proc.returncode == 2

    def test_explicit_partition_flags(self):
        # Regroup Eve's register into Bob's side: the pair (B, E) holds one
        # full bit about A conditioned on nothing.
        proc = run_cli("analyze", "zoo:ghz_diag", "--alice", "A", "--bob", "B,E", "--eve", "")
        out = result_of(proc)
        assert out["entropy"]["b"] == ["B", "E"]
        assert out["entropy"]["m_i_bits"] == pytest.approx(0.5, abs=1e-10)

    def test_bad_party_in_state_file_exits_2(self, tmp_path):
        bad = tmp_path / "party.json"
        bad.write_text(
            json.dumps(
                {
                    "registers": [{"label": "A", "dim": 1, "party": "mallory"}],
                    "matrix": {"re": [[1.0]], "im": [[0.0]]},
                }
            )
        )
        proc = run_cli("analyze", str(bad))
        assert proc.returncode == 2


class TestNmf:
    def test_bell_bracket(self):
        proc = run_cli("nmf", "zoo:bell_e0", "--seed", "1")
        out = result_of(proc)
        assert out["lower_bits"] == pytest.approx(1.0, abs=1e-9)
        assert out["upper_bits"] == pytest.approx(1.0, abs=1e-9)
        assert out["certified"] is True

    def test_classical_corr_bracket(self):
        proc = run_cli("nmf", "zoo:classical_corr_e0", "--k", "2", "--seed", "2")
        out = result_of(proc)
        assert out["lower_bits"] == pytest.approx(0.5, abs=1e-9)
        assert out["upper_bits"] == pytest.approx(0.5, abs=1e-3)

    def test_budget_exit_3(self):
        proc = run_cli("nmf", "zoo:hs_random?dims=2,2,2", "--ext", "8,8,8", "--seed", "0")
        assert proc.returncode == 3
        assert "budget" in proc.stderr.lower()

    def test_seed_drawn_when_missing(self):
        proc = run_cli("nmf", "zoo:bell_e0")
        assert proc.returncode == 0
        assert "drew" in proc.stderr
        assert isinstance(result_of(proc)["seed"], int)


class TestEsqc:
    def test_bell(self):
        proc = run_cli("esqc", "zoo:bell_e0", "--seed", "3")
        out = result_of(proc)
        assert out["upper_bits"] == pytest.approx(1.0, abs=1e-6)

    def test_crosscheck_flag(self):
        proc = run_cli("esqc", "zoo:classical_corr_e0", "--seed", "4", "--crosscheck")
        out = result_of(proc)
        assert out["upper_bits"] <= 1e-3
        assert out["crosscheck"]["gap"] <= 1e-3


class TestScript:
    def test_zoo_script(self):
        proc = run_cli("script", "zoo:nonfree_script?cls=quantum_e_to_a")
        out = result_of(proc)
        assert out["classification"] == "omega_q"
        assert out["ledger"]["qc_bits"] == pytest.approx(1.0)
        assert out["after"]["m_i_bits"] == pytest.approx(1.0, abs=1e-9)

    def test_empty_script_file(self, tmp_path):
        script = tmp_path / "empty.json"
        script.write_text(json.dumps(script_to_json(())))
        proc = run_cli("script", str(script), "zoo:ghz_diag")
        out = result_of(proc)
        assert out["steps_applied"] == 0
        assert out["before"] == out["after"]

    def test_script_file_with_steps(self, tmp_path):
        steps = (Step.discard_a(("A",)),)
        script = tmp_path / "discard.json"
        script.write_text(json.dumps(script_to_json(steps)))
        proc = run_cli("script", str(script), "zoo:ghz_diag")
        out = result_of(proc)
        assert out["classification"] == "omega"
        assert out["after"]["m_i_bits"] == pytest.approx(0.0, abs=1e-10)

    def test_invalid_step_exits_2(self, tmp_path):
        script = tmp_path / "bad.json"
        script.write_text(json.dumps({"steps": [{"kind": "discard_the_moon"}]}))
        proc = run_cli("script", str(script), "zoo:ghz_diag")
        assert proc.returncode == 2

    def test_preparation_protocol_through_cli(self, tmp_path):
        # Free preparation of a block state from the trivial start: costs
        # nothing and ends Markov.
        from nmk import preparation_script, zoo
        from nmk.serialize import state_to_json

        mc = zoo("markov_random", {"entries": 2}, seed=13)
        start, steps = preparation_script(mc)
        script = tmp_path / "prep.json"
        script.write_text(json.dumps(script_to_json(steps)))
        state = tmp_path / "start.json"
        state.write_text(json.dumps(state_to_json(start.state)))
        proc = run_cli("script", str(script), str(state))
        out = result_of(proc)
        assert out["classification"] == "omega"
        assert out["ledger"] == {"qc_bits": 0.0, "cdown_bits": 0.0}
        assert out["after"]["m_i_bits"] == pytest.approx(0.0, abs=1e-9)


class TestFuzz:
    def test_ssa_passes(self):
        proc = run_cli("fuzz", "ssa", "--trials", "50", "--seed", "5")
        assert proc.returncode == 0
        out = result_of(proc)
        assert out["failure_count"] == 0
        assert out["passes"] == out["trials"]

    def test_violations_exit_1_and_persist(self, tmp_path, monkeypatch, capsys):
        # Synthetic failing suite exercises the counterexample path.
        from nmk import cli
        from nmk.fuzz import FuzzReport

        def broken(trials, seed, jobs=1):
            return FuzzReport("ssa", trials, trials - 1, [{"trial": 0, "cqmi": -1.0}])

        monkeypatch.setitem(cli.SUITES, "ssa", broken)
        code = cli.main(
            ["fuzz", "ssa", "--trials", "3", "--seed", "1", "--counterexample-dir", str(tmp_path)]
        )
        assert code == 1
        out = json.loads(capsys.readouterr().out)
        assert out["failure_count"] == 1
        files = list(tmp_path.glob("counterexample_ssa_*.json"))
        assert len(files) == 1
        assert json.loads(files[0].read_text())["cqmi"] == -1.0


class TestZooCommand:
    def test_list_matches_manifest(self):
        proc = run_cli("zoo", "list")
        out = result_of(proc)
        names = [e["name"] for e in out["catalog"]]
        assert "ghz_diag" in names and "nonfree_script" in names

    def test_build_writes_state(self, tmp_path):
        target = tmp_path / "state.json"
        proc = run_cli("zoo", "build", "zoo:hs_random?dims=2,2&seed=3", "--out", str(target))
        assert proc.returncode == 0
        payload = json.loads(target.read_text())
        assert "registers" in payload


class TestDeterminism:
    def test_nmf_repeat_byte_identical(self):
        a = run_cli("nmf", "zoo:classical_corr_e0", "--k", "2", "--seed", "9")
        b = run_cli("nmf", "zoo:classical_corr_e0", "--k", "2", "--seed", "9")
        assert a.stdout == b.stdout

    def test_fuzz_repeat_byte_identical(self):
        a = run_cli("fuzz", "ssa", "--trials", "25", "--seed", "11")
        b = run_cli("fuzz", "ssa", "--trials", "25", "--seed", "11")
        assert a.stdout == b.stdout


def test_csv_output(tmp_path):
    target = tmp_path / "report.csv"
    proc = run_cli("analyze", "zoo:ghz_diag", "--csv", str(target))
    assert proc.returncode == 0
    lines = target.read_text().splitlines()
    assert lines[0] == "key,value"
    assert any(line.startswith("entropy.m_i_bits,") for line in lines)


def test_markov_build_roundtrip(tmp_path):
    out_file = tmp_path / "built.json"
    proc = run_cli("markov-build", "zoo:markov_random?entries=2&seed=7", "--out", str(out_file))
    assert proc.returncode == 0
    out = result_of(proc)
    assert out["markov"]["verdict"] is True
    check = run_cli("analyze", str(out_file))
    assert check.returncode == 0
    assert result_of(check)["markov"]["verdict"] is True
