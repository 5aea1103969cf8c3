import json
import re

import pytest

from trapsim import cli, harness, strategies

TRAP = "trap_n10_k2_t2_m1"


def scenario_text(**over):
    body = {"name": "tiny", "n": 4, "k": 0, "t": 0, "policy": "fifo", "seeds": [0, 2],
            "expect": {"classes": {"Correct": [1]}, "agreement": True}}
    body.update(over)
    return json.dumps(body, indent=2)


def test_bundled_scenarios_listed():
    assert set(harness.bundled_scenarios()) == {
        "honest_n4", TRAP, "tightness_n10_m0", "infeasible_n7_k1_t2"}


@pytest.mark.parametrize("name", ["honest_n4", TRAP, "tightness_n10_m0", "infeasible_n7_k1_t2"])
def test_bundled_scenarios_pass(name):
    report = harness.run_scenario(harness.load_scenario(name))
    assert report["passed"], report["assertions"]
    assert report["assertions"]


def test_trap_scenario_outcome():
    report = harness.run_scenario(harness.load_scenario(TRAP))
    for run in report["runs"]:
        assert run["winner"] is not None and len(run["slashed"]) == 3
        assert set(run["run_class"].values()) <= {1, 3, 4}


def test_schema_error_names_line_and_field():
    text = scenario_text(n="ten")
    with pytest.raises(harness.ScenarioError) as exc:
        harness.parse_scenario(text, "bad.json")
    msg = str(exc.value)
    line = next(i for i, l in enumerate(text.splitlines(), 1) if '"n"' in l)
    assert f"bad.json:{line}: field n:" in msg


def test_schema_rejects_unknown_fields_and_policies():
    with pytest.raises(harness.ScenarioError, match="field <root>"):
        harness.parse_scenario(scenario_text(colour="red"))
    with pytest.raises(harness.ScenarioError, match="field policy"):
        harness.parse_scenario(scenario_text(policy="lifo"))
    with pytest.raises(harness.ScenarioError, match="empty interval"):
        harness.parse_scenario(scenario_text(seeds=[3, 1]))
    with pytest.raises(harness.ScenarioError, match="not valid JSON"):
        harness.parse_scenario("{")


def test_feasibility_tag_is_enforced():
    with pytest.raises(harness.ScenarioError, match="infeasible"):
        harness.parse_scenario(scenario_text(n=7, k=1, t=2))
    with pytest.raises(harness.ScenarioError, match="feasible"):
        harness.parse_scenario(scenario_text(expect_infeasible=True))


def test_report_digest_is_stable_and_thread_independent(monkeypatch):
    sc = harness.load_scenario(TRAP)
    sc.seeds = (0, 5)
    one = harness.run_scenario(sc, threads=1)
    again = harness.run_scenario(sc, threads=1)
    monkeypatch.setenv("TRAP_THREADS", "4")
    four = harness.run_scenario(sc)
    assert one["report_digest"] == again["report_digest"] == four["report_digest"]
    assert one == four


def test_trap_threads_validation(monkeypatch):
    monkeypatch.setenv("TRAP_THREADS", "0")
    with pytest.raises(harness.ScenarioError):
        harness.threads_from_env()
    monkeypatch.setenv("TRAP_THREADS", "")
    assert harness.threads_from_env() == 1


def test_aggregate_reports_mean_min_max():
    sc = harness.load_scenario(TRAP)
    sc.seeds = (0, 3)
    agg = harness.run_scenario(sc)["aggregate"]
    bait = agg["utility"]["Bait"]
    assert set(bait) >= {"mean", "min", "max"}
    assert agg["class_histogram"]["Disagree"] == {"4": 12}


# -- CLI --------------------------------------------------------------------

def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_params(capsys):
    code, out, _ = run_cli(capsys, "params", "10", "2", "2")
    assert code == 0
    assert "m: 1\n" in out and "d_min: 1/6\n" in out and "worst_case_d: 1/6\n" in out
    _, out, _ = run_cli(capsys, "params", "100", "--d", "0.01")
    assert "t_max: 30\n" in out
    _, out, _ = run_cli(capsys, "params", "100", "--d", "1/300")
    assert "t_max: 24\n" in out
    _, out, _ = run_cli(capsys, "params", "7", "1", "2")
    assert "feasible: no\n" in out


def test_cli_params_usage_errors(capsys):
    assert run_cli(capsys, "params", "10", "2")[0] == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["params", "ten"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        cli.main(["params", "10", "--d", "x/y"])


def test_cli_params_json(capsys):
    code, out, _ = run_cli(capsys, "params", "10", "2", "2", "--json")
    assert code == 0 and json.loads(out)["d_min"] == "1/6"


def test_cli_simulate_writes_report_and_traces(capsys, tmp_path):
    out_file = tmp_path / "r.json"
    code, out, _ = run_cli(capsys, "simulate", TRAP, "--seeds", "0", "1", "--out", str(out_file),
                           "--trace-dir", str(tmp_path / "traces"))
    assert code == 0 and out.startswith("PASS trap_n10_k2_t2_m1")
    report = json.loads(out_file.read_text())
    assert report["report_digest"] == harness.report_digest(report)
    logs = sorted((tmp_path / "traces").iterdir())
    assert [p.name for p in logs] == [f"{TRAP}.seed0.log", f"{TRAP}.seed1.log"]
    line = re.compile(r"^\d+\|\d+\|delivered:\[(\d+(,\d+)*)?\]\|.+$")
    assert all(line.match(l) for l in logs[0].read_text().splitlines())


def test_cli_simulate_schema_error(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(scenario_text(seeds=[0]))
    code, _, err = run_cli(capsys, "simulate", str(bad))
    assert code == 2 and "field seeds" in err


def test_cli_simulate_failing_assertion(capsys, tmp_path):
    f = tmp_path / "wrong.json"
    f.write_text(scenario_text(name="wrong", expect={"class_seen": [2]}))
    code, out, _ = run_cli(capsys, "simulate", str(f))
    assert code == 1 and "assertion class_seen failed" in out


def test_cli_sweep(capsys):
    code, out, _ = run_cli(capsys, "sweep", "--n", "10", "--k", "1-3", "--t", "0-2", "--d", "1/3")
    rows = json.loads(out)
    assert code == 0 and rows and all(r["feasible"] for r in rows)
    assert {(r["k"], r["t"]) for r in rows} >= {(2, 2), (1, 0)}


def test_cli_trace_matches_golden(capsys):
    code, out, _ = run_cli(capsys, "trace")
    assert code == 0 and "4 milestone lines match" in out


def test_golden_milestones_in_order():
    lines, out, obs = harness.replay_golden("baiting_n10")
    assert obs.stage == 5 and obs.steps == sorted(obs.steps)
    assert [re.search(r"!M(\d)", l).group(1) for l in lines] == ["1", "2", "3", "5"]
    assert "!M4" in lines[2]


def test_golden_catches_early_reveal(monkeypatch):
    def reveal_now(self):
        if self.committed and not self.revealed:
            for node in self.personas:
                node.reveal()
            self.revealed = True

    monkeypatch.setattr(strategies.SplitPlayer, "_reveal_when_safe", reveal_now)
    diff = harness.diff_golden("baiting_n10")
    assert any(l.startswith("-") and "!M5" in l for l in diff)
    assert any(l.startswith("+") and "bait-reveal" in l for l in diff)


def test_golden_never_healed(capsys):
    lines, out, _ = harness.replay_golden("baiting_n10", isolation_cap=-1)
    assert not any("!M5" in l for l in lines) and not out.terminated
    code, text, _ = run_cli(capsys, "trace", "--isolation-cap", "-1")
    assert code == 1 and "non-termination" in text and "-331|6|" in text


def test_cli_trace_unknown_name(capsys):
    assert run_cli(capsys, "trace", "nope")[0] == 2


def test_cli_verify_reports_failures(capsys, monkeypatch, tmp_path):
    from trapsim import acceptance
    from trapsim.game_params import FinancialParams

    # a zero reward breaks the dominance criterion
    monkeypatch.setattr(acceptance.FinancialParams, "from_params",
                        classmethod(lambda cls, p: FinancialParams(p.deposit_coeff * p.gain_total, 0 * p.gain_total)))
    summary = tmp_path / "s.json"
    code, out, _ = run_cli(capsys, "verify", "--only", "1,10", "--quick", "--json", str(summary))
    data = json.loads(summary.read_text())
    assert code == 1 and data["failing"] == [10]
    assert "[PASS] criterion  1" in out and "[FAIL] criterion 10" in out
