"""Command-line interface: subcommands, formats, exit codes."""

import json

import pytest

from qinlab import __version__
from qinlab.cli import main
from qinlab.querytree import QueryTree, tree_to_json


@pytest.fixture
def tree_file(tmp_path):
    children = {0: (1, 3), 1: (2,), 2: (), 3: (4,), 4: (5,), 5: ()}
    resp = {0: False, 1: False, 2: True, 3: False, 4: False, 5: True}
    doc = tree_to_json(QueryTree(0, children, resp))
    path = tmp_path / "tree.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def tree_with_reports(tmp_path):
    children = {0: (1, 3), 1: (2,), 2: (), 3: (4,), 4: (5,), 5: ()}
    resp = {0: False, 1: False, 2: True, 3: False, 4: False, 5: True}
    doc = tree_to_json(QueryTree(0, children, resp))
    doc["reports"] = {"1": {"resp": 0, "children": []}}
    path = tmp_path / "tree_reports.json"
    path.write_text(json.dumps(doc))
    return path


class TestAllocate:
    def test_shortest_path(self, tree_file, capsys):
        assert main(["allocate", "--tree", str(tree_file)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload == {"path": [0, 1, 2], "n": 2, "solver": 2}

    def test_reports_reroute_allocation(self, tree_with_reports, capsys):
        assert main(["allocate", "--tree", str(tree_with_reports)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["path"] == [0, 3, 4, 5]
        assert payload["n"] == 3

    def test_no_solver(self, tmp_path, capsys):
        doc = tree_to_json(QueryTree(0, {0: (1,), 1: ()},
                                     {0: False, 1: False}))
        path = tmp_path / "t.json"
        path.write_text(json.dumps(doc))
        assert main(["allocate", "--tree", str(path)]) == 0
        assert json.loads(capsys.readouterr().out)["path"] is None


class TestReward:
    def test_reward_vector_output(self, tree_file, capsys):
        code = main(["reward", "--tree", str(tree_file),
                     "--mechanism", "gcrm", "--alpha", "0.5"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["path"] == [0, 1, 2]
        assert payload["rewards"][0] == pytest.approx(1 / 3)
        assert payload["rewards"][1] == pytest.approx(4 / 9)
        assert payload["total"] == pytest.approx(7 / 9)

    def test_writes_file(self, tree_file, tmp_path):
        out = tmp_path / "r.json"
        main(["reward", "--tree", str(tree_file), "--mechanism", "geom",
              "--delta", "0.6", "--out", str(out)])
        payload = json.loads(out.read_text())
        assert payload["total"] == pytest.approx(1.0, abs=1e-12)


class TestAnalytics:
    def test_table_reports_optima(self, capsys):
        assert main(["analytics", "--alpha", "0.5"]) == 0
        out = capsys.readouterr().out
        assert "lambda* = 3" in out
        assert "lambda' = 0.86" in out
        assert "n' = 1.86" in out

    def test_csv_has_documented_header(self, capsys):
        main(["analytics", "--alpha", "0.5", "--format", "csv"])
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "alpha,lambda,f,lambda_prime,lambda_star,n_prime"
        assert len(lines) == 4  # three f rows for alpha = 0.5

    def test_check_rounding_reports_known_misses(self, capsys):
        main(["analytics", "--alpha", "0.76", "--alpha", "0.5",
              "--check-rounding"])
        payload = json.loads(capsys.readouterr().out)
        assert [m["alpha"] for m in payload["sybil"]] == [0.76]

    def test_json_profile(self, capsys):
        main(["analytics", "--alpha", "0.5", "--format", "json"])
        payload = json.loads(capsys.readouterr().out)
        assert payload[0]["lambda_star"] == 3


class TestAttack:
    def test_inline_scenario(self, capsys):
        code = main(["attack", "--mechanism", "gcrm", "--alpha", "0.5",
                     "--kind", "sybil", "--position", "1", "--size", "1",
                     "--n", "2"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["ratio"] == pytest.approx(7 / 6)
        assert payload["profitable"] is True

    def test_scenario_file_and_table_format(self, tmp_path, capsys):
        scenario = tmp_path / "s.json"
        scenario.write_text(json.dumps(
            {"kind": "collusion", "position": 1, "size": 2, "n": 3}))
        code = main(["attack", "--mechanism", "dgm", "--rho", "0.6",
                     "--scenario", str(scenario), "--format", "table"])
        assert code == 0
        assert "collusion" in capsys.readouterr().out

    def test_missing_scenario_parts_exit_2(self, capsys):
        code = main(["attack", "--mechanism", "gcrm", "--alpha", "0.5",
                     "--kind", "sybil"])
        assert code == 2


class TestAudit:
    def test_split_proof_schedule_passes(self, capsys):
        code = main(["audit", "--mechanism", "dgm", "--alpha", "0.375",
                     "--property", "sp", "--lambda-max", "20"])
        assert code == 0
        assert "pass" in capsys.readouterr().out

    def test_merge_proof_schedule_fails_split_audit(self, capsys):
        code = main(["audit", "--mechanism", "geom", "--delta", "0.6",
                     "--property", "sp"])
        assert code == 1
        out = capsys.readouterr().out
        assert "fail" in out
        assert "'lambda': 1" in out

    def test_json_format(self, capsys):
        code = main(["audit", "--mechanism", "gcrm", "--alpha", "0.5",
                     "--property", "po,bb", "--format", "json"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert [r["property"] for r in payload] == ["po", "bb"]
        assert all(r["verdict"] == "pass" for r in payload)

    def test_tree_checks_on_random_trees(self, capsys):
        code = main(["audit", "--mechanism", "gcrm", "--alpha", "0.5",
                     "--property", "ic,core", "--trees", "10",
                     "--seed", "4"])
        assert code == 0

    def test_tree_checks_on_supplied_tree(self, tree_file, capsys):
        code = main(["audit", "--mechanism", "geom", "--delta", "0.6",
                     "--property", "ic", "--tree", str(tree_file)])
        assert code == 0

    def test_impossibility_audit(self, capsys):
        code = main(["audit", "--mechanism", "dgm", "--rho", "0.6",
                     "--property", "impossibility", "--format", "json"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload[0]["details"]["cp_m2"] == "fail"

    def test_unknown_property_exit_2(self, capsys):
        assert main(["audit", "--mechanism", "gcrm", "--alpha", "0.5",
                     "--property", "bogus"]) == 2

    def test_all_properties_for_gcrm(self, capsys):
        code = main(["audit", "--mechanism", "gcrm", "--alpha", "0.5",
                     "--property", "po,bb,split,monotone,impossibility,ic",
                     "--trees", "5", "--n-max", "20"])
        assert code == 0


class TestSweep:
    def test_experiment_flag(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        code = main(["sweep", "--experiment", "budget_ratio",
                     "--n-max", "5", "--out", str(out)])
        assert code == 0
        assert out.exists()
        assert str(out) in capsys.readouterr().out
        manifest = json.loads(
            (tmp_path / "sweep.csv.manifest.json").read_text())
        assert manifest["version"] == __version__

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("experiment = sybil_ratio\n"
                       "lambda_max = 3\n"
                       f"output_path = {tmp_path / 'out.csv'}\n")
        assert main(["sweep", "--config", str(cfg)]) == 0
        assert (tmp_path / "out.csv").exists()

    def test_missing_experiment_exit_2(self):
        assert main(["sweep"]) == 2


class TestSpecBuilding:
    def test_dgm_needs_parameter(self):
        assert main(["audit", "--mechanism", "dgm", "--property", "po"]) == 2

    def test_tdgm_with_named_schedule(self, capsys):
        code = main(["audit", "--mechanism", "tdgm", "--alpha", "0.6",
                     "--beta", "cp", "--property", "bb", "--format", "json"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload[0]["details"]["strongly_bb"] is True

    def test_tdgm_with_table_file(self, tmp_path, capsys):
        table = tmp_path / "beta.json"
        table.write_text(json.dumps({"1": 0.5, "2": 0.4, "3": 0.3}))
        code = main(["audit", "--mechanism", "tdgm", "--alpha", "0.5",
                     "--beta-table", str(table), "--property", "po"])
        assert code == 0

    def test_out_of_range_parameter_exit_2(self, capsys):
        assert main(["audit", "--mechanism", "gcrm", "--alpha", "1.5",
                     "--property", "po"]) == 2

    def test_rho_shortcut_matches_direct_parameter(self, capsys):
        main(["analytics", "--alpha", "0.42195", "--format", "json"])
        direct = json.loads(capsys.readouterr().out)
        code = main(["audit", "--mechanism", "gcrm", "--rho", "0.6",
                     "--property", "split", "--format", "json"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload[0]["details"]["achieved_ratio"] == pytest.approx(
            0.6, rel=1e-12)
        assert direct[0]["lambda_star"] == 2
