"""Command-line surface: parsing, exit codes, file round-trips, referees."""

import json
import os
import shutil

import numpy as np
import pytest

import vng.cli_io as cli
from vng.errors import LPFailure

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    for name in os.listdir(FIXTURES):
        shutil.copy(os.path.join(FIXTURES, name), tmp_path / name)
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(*argv) -> int:
    return cli.main(list(argv))


class TestValidate:
    def test_kelly_ok(self, workdir, capsys):
        assert run("validate", "kelly.json") == 0
        out = capsys.readouterr().out
        assert "validate: OK" in out
        assert "nu" in out

    def test_malformed_json_is_parse_error(self, workdir):
        (workdir / "broken.json").write_text("{ not json")
        assert run("validate", "broken.json") == cli.EXIT_PARSE

    def test_missing_field_is_parse_error(self, workdir):
        doc = json.loads((workdir / "kelly.json").read_text())
        del doc["market"]["returns"]
        (workdir / "bad.json").write_text(json.dumps(doc))
        assert run("validate", "bad.json") == cli.EXIT_PARSE

    def test_unit_margin_rejected(self, workdir):
        doc = json.loads((workdir / "kelly.json").read_text())
        doc["market"]["margins"] = 1.0
        (workdir / "bad.json").write_text(json.dumps(doc))
        assert run("validate", "bad.json") == cli.EXIT_MARGIN

    def test_margin_below_nu_rejected(self, workdir):
        # nu_1 = 1.4 / 0.7 = 2 in the kelly tree, so 1.5 is too tight
        doc = json.loads((workdir / "kelly.json").read_text())
        doc["market"]["margins"] = 1.5
        (workdir / "bad.json").write_text(json.dumps(doc))
        assert run("validate", "bad.json") == cli.EXIT_MARGIN


class TestSolveCertify:
    def test_pipeline_exit_codes(self, workdir):
        assert run("solve", "kelly.json") == 0
        assert run("certify", "kelly.json", "kelly.solution.json") == 0
        cert = json.loads((workdir / "kelly.certificate.json").read_text())
        assert cert["verdict"] == "certified"
        assert "supermartingale" in cert

    def test_solution_roundtrip_lossless(self, workdir):
        run("solve", "single_asset.json")
        doc = json.loads((workdir / "single_asset.solution.json").read_text())
        rewritten = json.dumps(doc, indent=1, sort_keys=True) + "\n"
        assert rewritten == (workdir / "single_asset.solution.json").read_text()
        for v in doc["z"]:
            assert float(repr(float(v))) == float(v)

    def test_nonconvergence_exit(self, workdir):
        assert run("solve", "kelly.json", "--max-iter", "3") == cli.EXIT_NONCONVERGENCE
        # the flagged best-effort file is written but certify refuses it
        assert (
            run("certify", "kelly.json", "kelly.solution.json")
            == cli.EXIT_NONCONVERGENCE
        )

    def test_digest_mismatch(self, workdir):
        run("solve", "kelly.json")
        assert (
            run("certify", "single_asset.json", "kelly.solution.json")
            == cli.EXIT_DIGEST
        )

    def test_options_change_invalidates_digest(self, workdir):
        run("solve", "kelly.json", "--tol", "1e-09")
        doc = json.loads((workdir / "kelly.solution.json").read_text())
        doc["options"]["tol"] = 1e-8
        (workdir / "kelly.solution.json").write_text(json.dumps(doc))
        assert (
            run("certify", "kelly.json", "kelly.solution.json") == cli.EXIT_DIGEST
        )

    def test_tampered_path_refuted_with_witness(self, workdir):
        run("solve", "kelly.json")
        doc = json.loads((workdir / "kelly.solution.json").read_text())
        doc["path"]["up"] = [v * 1.05 for v in doc["path"]["up"]]
        (workdir / "kelly.solution.json").write_text(json.dumps(doc))
        assert (
            run("certify", "kelly.json", "kelly.solution.json") == cli.EXIT_REFUTED
        )
        cert = json.loads((workdir / "kelly.certificate.json").read_text())
        assert cert["verdict"] == "refuted"
        assert cert["witness"] is not None

    def test_certificate_reverification_reproduces_residuals(self, workdir):
        import vng
        run("solve", "two_asset_margin.json")
        run("certify", "two_asset_margin.json", "two_asset_margin.solution.json")
        first = json.loads((workdir / "two_asset_margin.certificate.json").read_text())
        run("certify", "two_asset_margin.json", "two_asset_margin.solution.json")
        second = json.loads((workdir / "two_asset_margin.certificate.json").read_text())
        assert first["normalization_by_t"] == second["normalization_by_t"]
        assert first["transition_by_node"] == second["transition_by_node"]
        # re-running verification on the stored path + dual reproduces the
        # stored residuals
        problem, _, _ = cli.load_problem("two_asset_margin.json")
        path = cli._path_from_dict(problem.tree, first["path"], problem.market.m)
        dual = cli.dual_from_doc(problem.tree, first["dual"], problem.market.m)
        cert = vng.verify_rapid(path, dual, problem.tree, problem.market,
                                tol=first["tolerance"])
        for t, value in enumerate(first["normalization_by_t"]):
            assert abs(cert.normalization_by_t[t] - value) <= 1e-12
        for node_id, value in first["transition_by_node"].items():
            assert abs(cert.transition_by_node[node_id] - value) <= 1e-12

    def test_tol_flag_plumbs_into_report(self, workdir):
        run("solve", "kelly.json", "--tol", "1e-10", "--out", "tight.json")
        doc = json.loads((workdir / "tight.json").read_text())
        assert doc["options"]["tol"] == 1e-10
        assert doc["residuals"]["complementarity"] <= 1e-10

    def test_prices_input_equivalent_to_returns(self, workdir):
        doc = json.loads((workdir / "single_asset.json").read_text())
        del doc["market"]["returns"]
        doc["market"]["prices"] = {"root": [100.0], "up": [120.0], "down": [90.0]}
        (workdir / "priced.json").write_text(json.dumps(doc))
        assert run("solve", "priced.json") == 0
        run("solve", "single_asset.json")
        a = json.loads((workdir / "priced.solution.json").read_text())
        b = json.loads((workdir / "single_asset.solution.json").read_text())
        assert a["objective_value"] == b["objective_value"]

    def test_objective_override(self, workdir):
        assert run("solve", "kelly.json", "--objective", "linear",
                   "--out", "lin.json") == 0
        doc = json.loads((workdir / "lin.json").read_text())
        assert doc["converged"] is True


class TestCompare:
    def test_compare_writes_expected_columns(self, workdir):
        run("solve", "kelly.json")
        run("certify", "kelly.json", "kelly.solution.json")
        assert run(
            "compare", "kelly.json", "strategies.json",
            "--certificate", "kelly.certificate.json",
        ) == 0
        lines = (workdir / "kelly.compare.csv").read_text().strip().splitlines()
        assert lines[0] == (
            "strategy_id,t,node_count,max_conditional_growth,mean_growth,F_value"
        )
        assert len(lines) == 1 + 3 * 2  # three strategies, two periods
        for line in lines[1:]:
            parts = line.split(",")
            assert float(parts[3]) <= 1.0 + 1e-8

    def test_rapid_vs_itself_all_ones(self, workdir):
        run("solve", "kelly.json")
        run("certify", "kelly.json", "kelly.solution.json")
        (workdir / "only_rapid.json").write_text(
            json.dumps({"strategies": [{"id": "rapid", "type": "rapid"}]})
        )
        run("compare", "kelly.json", "only_rapid.json",
            "--certificate", "kelly.certificate.json")
        lines = (workdir / "kelly.compare.csv").read_text().strip().splitlines()
        for line in lines[1:]:
            parts = line.split(",")
            assert float(parts[3]) == pytest.approx(1.0, abs=1e-8)
            assert float(parts[4]) == pytest.approx(1.0, abs=1e-8)

    def test_empty_strategy_list_header_only(self, workdir):
        (workdir / "none.json").write_text(json.dumps({"strategies": []}))
        assert run("compare", "kelly.json", "none.json") == 0
        lines = (workdir / "kelly.compare.csv").read_text().splitlines()
        assert len(lines) == 1

    def test_lp_failure_exit_code(self, workdir, monkeypatch):
        def boom(*args, **kwargs):
            raise LPFailure("synthetic breakdown")

        monkeypatch.setattr("vng.certification.dual_cone_violation", boom)
        assert run("compare", "kelly.json", "strategies.json") == cli.EXIT_LP


class TestGolden:
    """Byte-identical summaries and CSV under a fixed seed."""

    def _golden(self, name):
        return os.path.join(os.path.dirname(__file__), "golden", name)

    @pytest.mark.parametrize(
        "fixture", ["kelly", "single_asset", "two_asset_margin"]
    )
    def test_pipeline_golden(self, workdir, capsys, fixture):
        assert run("validate", f"{fixture}.json") == 0
        assert run("solve", f"{fixture}.json") == 0
        assert run("certify", f"{fixture}.json", f"{fixture}.solution.json") == 0
        assert run(
            "compare", f"{fixture}.json", "strategies.json"
            if fixture != "single_asset" else "single_strategies.json",
            "--certificate", f"{fixture}.certificate.json",
        ) == 0
        out = capsys.readouterr().out
        with open(self._golden(f"{fixture}.summary.txt")) as fh:
            assert out == fh.read()
        with open(self._golden(f"{fixture}.compare.csv"), "rb") as fh:
            assert (workdir / f"{fixture}.compare.csv").read_bytes() == fh.read()
