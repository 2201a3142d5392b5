"""
Unit tests for the command-line entry point

Tests the JSON bodies and exit codes of each subcommand, and the mapping of
library errors to error bodies.
"""

import json
from unittest.mock import Mock, patch

import pytest

from src.cli import EXIT_BUDGET, EXIT_ERROR, EXIT_OK, _caps, _int_range, main, render_table
from src.constructions import butterfly_lower
from src.core_sets import levels_between
from src.errors import BudgetExhausted
from src.models import ExtremalResult
from src.posets import butterfly, poset_id


@pytest.fixture(autouse=True)
def isolated_catalog(tmp_path, monkeypatch):
    """Point the default catalog at a temporary file and quiet the logs."""
    path = tmp_path / "catalog.json"
    monkeypatch.setenv("TRACEPOSET_CATALOG", str(path))
    monkeypatch.setenv("TRACEPOSET_LOG_LEVEL", "WARNING")
    return path


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


class TestArgumentParsing:
    """Test suite for argument helpers and parser exits"""

    def test_int_range(self):
        """Test "3..6" and "3,5" forms"""
        assert _int_range("3..6") == [3, 4, 5, 6]
        assert _int_range("3,5") == [3, 5]

    def test_caps(self):
        """Test the k=cap list"""
        assert _caps("3=6,4=7") == {3: 6, 4: 7}

    def test_missing_required_arguments_exit_one(self, capsys):
        """Test that argparse errors map to exit code 1"""
        assert main(["solve", "--kind", "tr"]) == EXIT_ERROR

    def test_version_exits_zero(self, capsys):
        """Test --version"""
        assert main(["--version"]) == EXIT_OK
        assert "trace-posets" in capsys.readouterr().out


class TestSolve:
    """Test suite for the solve command"""

    def test_exact_solve_is_stored(self, capsys, isolated_catalog):
        """Test Tr(3,B) end to end, including the catalog write"""
        code, body = run(capsys, "solve", "--kind", "tr", "--poset", "butterfly", "--n", "3")

        assert code == EXIT_OK
        assert body["value"] == 6
        assert body["status"] == "exact"
        assert len(body["witness_ref"]) == 64
        stored = json.loads(isolated_catalog.read_text())["entries"]
        assert [e["value"] for e in stored] == [6]

    def test_no_store_leaves_the_catalog_alone(self, capsys, isolated_catalog):
        """Test --no-store"""
        code, body = run(capsys, "solve", "--kind", "la_d", "--poset", "butterfly", "--n", "3", "--no-store")

        assert code == EXIT_OK
        assert body["value"] == 5
        assert body["witness_ref"] is None
        assert not isolated_catalog.exists()

    def test_unique_max_identity(self, capsys):
        """Test Tr(5,D) through the closed form"""
        code, body = run(capsys, "solve", "--kind", "tr", "--poset", "diamond", "--n", "5", "--unique-max")

        assert code == EXIT_OK
        assert body["value"] == 6
        assert body["bounds"]["method"] == "unique_max_identity"

    def test_confirm_records_the_seed(self, capsys):
        """Test --confirm with a seed"""
        code, body = run(capsys, "--seed", "3", "solve", "--kind", "tr", "--poset", "butterfly", "--n", "3",
                         "--confirm", "--no-store")

        assert code == EXIT_OK
        assert body["bounds"]["confirmed_seed"] == 3

    @patch("src.cli.ExtremalSearch")
    def test_partial_result_exits_two(self, mock_search_class, capsys):
        """Test that a lower bound maps to exit code 2"""
        mock_search = Mock()
        mock_search.solve_tr.return_value = ExtremalResult(
            kind="tr", n=6, poset_id=poset_id(butterfly()), poset_label="butterfly", value=9,
            status="lower_bound_only", witness=None, nodes=50,
        )
        mock_search_class.return_value = mock_search

        code, body = run(capsys, "solve", "--kind", "tr", "--poset", "butterfly", "--n", "6")

        assert code == EXIT_BUDGET
        assert body["status"] == "lower_bound_only"
        assert body["witness_ref"] is None

    @patch("src.cli.ExtremalSearch")
    def test_budget_exhausted_exits_two(self, mock_search_class, capsys):
        """Test the BudgetExhausted error body"""
        mock_search_class.return_value.solve_tr.side_effect = BudgetExhausted("ran out")

        code, body = run(capsys, "solve", "--kind", "tr", "--poset", "butterfly", "--n", "6")

        assert code == EXIT_BUDGET
        assert body["error"]["type"] == "BudgetExhausted"

    def test_tr_l_needs_l(self, capsys):
        """Test the usage error body"""
        code, body = run(capsys, "solve", "--kind", "tr_l", "--poset", "butterfly", "--n", "4")

        assert code == EXIT_ERROR
        assert body["message"] == "solve failed"
        assert body["error"]["type"] == "UsageError"

    def test_unknown_poset(self, capsys):
        """Test that an unknown name is reported, not raised"""
        code, body = run(capsys, "solve", "--kind", "tr", "--poset", "pentagon", "--n", "3")

        assert code == EXIT_ERROR
        assert "pentagon" in body["error"]["message"]

    def test_poset_from_a_file(self, capsys, tmp_path):
        """Test a .json poset argument"""
        poset_file = tmp_path / "b.json"
        poset_file.write_text(json.dumps(butterfly().to_json()))

        code, body = run(capsys, "solve", "--kind", "la_u", "--poset", str(poset_file), "--n", "3")

        assert code == EXIT_OK
        assert body["value"] == 5


class TestOtherCommands:
    """Test suite for arrow, construct, chains, embed, params and probe"""

    def test_arrow(self, capsys):
        """Test (5,9) -> (3,6)"""
        code, body = run(capsys, "arrow", "--n", "5", "--m", "9", "--k", "3", "--l", "6")

        assert code == EXIT_OK
        assert body["holds"] is True

    def test_arrow_needs_all_parameters(self, capsys):
        """Test the missing --l message"""
        code, body = run(capsys, "arrow", "--n", "5", "--m", "9", "--k", "3")

        assert code == EXIT_ERROR
        assert "--l" in body["error"]["message"]

    def test_arrow_bound(self, capsys):
        """Test the Tr(4,B) bound from the k = 3 cap"""
        code, body = run(capsys, "arrow", "--n", "4", "--bound-poset", "butterfly", "--ks", "3", "--caps", "3=6")

        assert code == EXIT_OK
        assert body["value"] == 9

    def test_sauer_suite(self, capsys):
        """Test --sauer-suite"""
        code, body = run(capsys, "arrow", "--n", "4", "--k", "2", "--sauer-suite")

        assert code == EXIT_OK
        assert body["passed"] is True

    def test_construct_passes(self, capsys):
        """Test the butterfly lower construction at n = 6"""
        code, body = run(capsys, "construct", "--name", "butterfly_lower", "--n", "6")

        assert code == EXIT_OK
        assert body["size"] == 10
        assert body["passed"] is True

    def test_construct_failure_exits_one(self, capsys):
        """Test a failed --verify override"""
        code, body = run(capsys, "construct", "--name", "levels", "--n", "5", "--j", "1", "--k", "3",
                         "--verify", "p_free", "--poset", "butterfly")

        assert code == EXIT_ERROR
        assert body["passed"] is False
        assert body["violation"] is not None

    def test_chains_scd(self, capsys):
        """Test the decomposition body"""
        code, body = run(capsys, "chains", "scd", "--n", "4")

        assert code == EXIT_OK
        assert len(body["chains"]) == 6
        assert body["failures"] == []

    def test_chains_lubell(self, capsys, tmp_path):
        """Test λ of the bottom two levels over [3]"""
        family_file = tmp_path / "f.json"
        family_file.write_text(json.dumps(butterfly_lower(3).to_json()))

        code, body = run(capsys, "chains", "lubell", "--family", str(family_file))

        assert code == EXIT_OK
        assert body["antichain"] is False
        assert body["lubell"] == "7/3"

    def test_embed_reports_a_trace_copy(self, capsys, tmp_path):
        """Test embed --l on two levels over [4]"""
        family_file = tmp_path / "f.json"
        family_file.write_text(json.dumps(levels_between(4, 2, 3).to_json()))

        code, body = run(capsys, "embed", "--family", str(family_file), "--poset", "butterfly", "--l", "3")

        assert code == EXIT_OK
        assert body["free"] is False
        assert body["violation"]["L"]

    def test_missing_family_file(self, capsys, tmp_path):
        """Test that an absent file is a usage error"""
        code, body = run(capsys, "embed", "--family", str(tmp_path / "none.json"), "--poset", "butterfly")

        assert code == EXIT_ERROR
        assert body["error"]["type"] == "UsageError"

    def test_probe(self, capsys):
        """Test the codimension-one probe body"""
        with patch("src.certificates.certified_e", return_value=(2, {})):
            code, body = run(capsys, "probe", "--conjecture", "butterfly-codim1", "--n", "3")

        assert code == EXIT_OK
        assert body["points"][0]["note"] == "finite data point, not evidence of the limit"

    def test_level_trace_conjecture_accepts_its_numeric_name(self, capsys):
        """Test that --conjecture 1.5 runs the level-trace command"""
        with patch("src.certificates.certified_e", return_value=(2, {})):
            code, body = run(capsys, "probe", "--conjecture", "1.5", "--n", "3", "--k", "1")

        assert code == EXIT_OK
        assert body["conjecture"] == "level-trace"
        assert body["points"][0]["predicted_coefficient"] == 1


class TestCatalogCommands:
    """Test suite for catalog show, merge and verify"""

    def test_show_and_verify_after_a_solve(self, capsys):
        """Test that a stored result is listed and replays"""
        run(capsys, "solve", "--kind", "tr", "--poset", "butterfly", "--n", "3")

        code, shown = run(capsys, "catalog", "show")
        assert code == EXIT_OK
        assert shown["entries"][0]["value"] == 6

        code, verified = run(capsys, "catalog", "verify")
        assert code == EXIT_OK
        assert verified["passed"] is True

    def test_merge_needs_another_file(self, capsys):
        """Test the usage error"""
        code, _ = run(capsys, "catalog", "merge")

        assert code == EXIT_ERROR

    def test_merge_folds_other_catalogs(self, capsys, tmp_path, isolated_catalog):
        """Test merging a second catalog into the default one"""
        other = tmp_path / "other.json"
        run(capsys, "--catalog", str(other), "solve", "--kind", "la_d", "--poset", "butterfly", "--n", "3")
        run(capsys, "solve", "--kind", "tr", "--poset", "butterfly", "--n", "3")

        code, body = run(capsys, "catalog", "merge", str(other))

        assert code == EXIT_OK
        assert body["entries"] == 2


class TestMain:
    """Test suite for configuration, logging and output handling in main"""

    @patch("src.cli.Configuration")
    def test_configuration_error(self, mock_config_class, capsys):
        """Test that a bad environment yields an error body"""
        mock_config_class.load.side_effect = ValueError("TRACEPOSET_WORKERS must be an integer, got 'x'")

        code, body = run(capsys, "chains", "scd", "--n", "3")

        assert code == EXIT_ERROR
        assert body["error"]["type"] == "ValueError"
        assert "TRACEPOSET_WORKERS" in body["error"]["message"]

    @patch("src.cli.Logger")
    def test_command_is_logged(self, mock_logger_class, capsys):
        """Test the start and completion log lines"""
        mock_logger = Mock()
        mock_logger_class.return_value = mock_logger

        code, _ = run(capsys, "chains", "scd", "--n", "3")

        messages = [c.args[0] for c in mock_logger.info.call_args_list]
        assert messages[0] == "Starting command"
        assert messages[-1] == "Command completed"
        assert mock_logger.info.call_args.kwargs["exit_code"] == code

    @patch("src.cli.Logger")
    def test_failure_is_logged_as_error(self, mock_logger_class, capsys):
        """Test that library errors reach logger.error"""
        mock_logger = Mock()
        mock_logger_class.return_value = mock_logger

        run(capsys, "solve", "--kind", "tr", "--poset", "pentagon", "--n", "3")

        mock_logger.error.assert_called_once()
        assert mock_logger.error.call_args.kwargs["error_type"] == "UsageError"

    def test_table_format(self, capsys):
        """Test --format table"""
        code = main(["--format", "table", "construct", "--name", "butterfly_lower", "--n", "4"])
        out = capsys.readouterr().out

        assert code == EXIT_OK
        assert any(line.startswith("passed") for line in out.splitlines())

    def test_render_table_keeps_nested_values_as_json(self):
        """Test a nested field"""
        text = render_table({"value": 6, "bounds": {"sauer": 7}, "exact": True})

        assert text.splitlines() == ["value   6", 'bounds  {"sauer": 7}', "exact   true"]
