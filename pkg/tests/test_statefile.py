import pytest
import sys
import os
import json

import numpy as np

# Add project root to Python path so relative imports work
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.errors import ParseError, PhysicalityError
from src.models import StateRecipe
from src.tools.fock import moments_of
from src.tools.statefile import (
    JSON_FORMAT,
    format_text,
    load_state_file,
    parse_json,
    parse_state,
    parse_text,
    state_from_dict,
    state_to_dict,
    to_state,
    write_state,
)
from tests.conftest import make_state


class TestParseText:
    def test_thermal_fixture(self, fixture_path):
        state = parse_state(fixture_path("thermal1.state"))
        assert state.label == "thermal1"
        assert state.n == 1
        assert np.array_equal(state.cov, 3 * np.eye(2))
        assert np.array_equal(state.mean, [0.0, 0.0])

    def test_inline_mean(self, fixture_path):
        state = parse_state(fixture_path("coherent1.state"))
        assert np.array_equal(state.mean, [2.0, 0.0])

    def test_label_defaults_to_stem(self, tmp_path):
        path = tmp_path / "unnamed.state"
        path.write_text("n 1\nmean 0 0\ncov\n1 0\n0 1\n")
        assert load_state_file(path).label is None
        assert parse_state(path).label == "unnamed"

    def test_unphysical_file(self, fixture_path):
        with pytest.raises(PhysicalityError) as exc_info:
            parse_state(fixture_path("subvacuum.state"))
        assert exc_info.value.report.min_symplectic_eigenvalue == pytest.approx(0.5)

    def test_two_modes(self, fixture_path):
        state = parse_state(fixture_path("vacuum2.state"))
        assert state.n == 2
        assert np.array_equal(state.cov, np.eye(4))

    def test_comments_and_blank_lines(self):
        text = "# header\n\nn 1  # one mode\nmean\n0   0\n\ncov\n2 0 # row\n0 2\n"
        doc = parse_text(text)
        assert doc.n == 1
        assert doc.cov == [[2.0, 0.0], [0.0, 2.0]]

    def test_hash_inside_a_token_is_kept(self):
        doc = parse_text("label run#3 # note\nn 1\nmean 0 0\ncov\n1 0\n0 1\n")
        assert doc.label == "run#3"

    def test_quoted_label(self):
        doc = parse_text('label "my #1 state" # note\nn 1\nmean 0 0\ncov\n1 0\n0 1\n')
        assert doc.label == "my #1 state"

    def test_bad_quoted_label(self):
        with pytest.raises(ParseError) as exc_info:
            parse_text('label "open\nn 1\nmean 0 0\ncov\n1 0\n0 1\n')
        assert exc_info.value.field == "label"
        assert exc_info.value.line == 1

    def test_mean_split_over_lines(self):
        doc = parse_text("n 2\nmean 1 0\n0 1\ncov\n1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n")
        assert doc.mean == [1.0, 0.0, 0.0, 1.0]

    def test_bad_number_reports_line_and_field(self, fixture_path):
        with pytest.raises(ParseError) as exc_info:
            parse_state(fixture_path("malformed.state"))
        assert exc_info.value.line == 6
        assert exc_info.value.field == "cov"
        assert "line 6" in str(exc_info.value)

    def test_unknown_section(self):
        with pytest.raises(ParseError) as exc_info:
            parse_text("n 1\nmean 0 0\nvariance\n1 0\n0 1\n")
        assert exc_info.value.field == "variance"
        assert exc_info.value.line == 3

    def test_duplicate_section(self):
        with pytest.raises(ParseError) as exc_info:
            parse_text("n 1\nn 1\n")
        assert exc_info.value.field == "n"

    def test_missing_section(self):
        with pytest.raises(ParseError) as exc_info:
            parse_text("n 1\nmean 0 0\n")
        assert exc_info.value.field == "cov"

    def test_short_row(self):
        with pytest.raises(ParseError) as exc_info:
            parse_text("n 1\nmean 0 0\ncov\n1 0\n0\n")
        assert exc_info.value.line == 5

    def test_missing_rows(self):
        with pytest.raises(ParseError, match="2 rows"):
            parse_text("n 1\nmean 0 0\ncov\n1 0\n")

    def test_wrong_mean_length(self):
        with pytest.raises(ParseError) as exc_info:
            parse_text("n 1\nmean 0 0 0\ncov\n1 0\n0 1\n")
        assert exc_info.value.field == "mean"

    def test_mode_count_must_come_first(self):
        with pytest.raises(ParseError, match="'n' must precede"):
            parse_text("mean 0 0\nn 1\n")

    def test_bad_mode_count(self):
        with pytest.raises(ParseError):
            parse_text("n two\n")
        with pytest.raises(ParseError):
            parse_text("n 0\n")

    def test_nearly_symmetric_is_repaired(self, fixture_path):
        state = parse_state(fixture_path("nearly_symmetric.state"))
        assert np.array_equal(state.cov, state.cov.T)
        assert state.cov[0, 1] == pytest.approx(5e-13)


class TestParseJson:
    def test_json_fixture(self, fixture_path):
        state = parse_state(fixture_path("coherent1.json"))
        text_state = parse_state(fixture_path("coherent1.state"))
        assert np.array_equal(state.mean, text_state.mean)
        assert np.array_equal(state.cov, text_state.cov)

    def test_recipe_is_carried(self, fixture_path):
        doc = load_state_file(fixture_path("correlated2.json"))
        assert doc.recipe == StateRecipe(thermal=[0.5, 0.0], displacement=[0.5, 0.0], beam_splitter=np.pi / 4)

    def test_bad_shape(self, fixture_path):
        with pytest.raises(ParseError) as exc_info:
            load_state_file(fixture_path("bad_shape.json"))
        assert exc_info.value.field == "mean"

    def test_unsupported_format(self):
        with pytest.raises(ParseError) as exc_info:
            parse_json('{"format": "other/2", "n": 1, "mean": [0, 0], "cov": [[1, 0], [0, 1]]}')
        assert exc_info.value.field == "format"

    def test_invalid_json(self):
        with pytest.raises(ParseError) as exc_info:
            parse_json('{"n": 1,\n "mean": [0, 0')
        assert exc_info.value.line == 2

    def test_schema_violation_names_field(self):
        with pytest.raises(ParseError) as exc_info:
            parse_json('{"n": 1, "mean": ["a", 0], "cov": [[1, 0], [0, 1]]}')
        assert exc_info.value.field == "mean.0"

    def test_detected_by_content(self, tmp_path):
        path = tmp_path / "state.txt"
        path.write_text(json.dumps({"n": 1, "mean": [0, 0], "cov": [[2, 0], [0, 2]]}))
        assert parse_state(path).cov[0, 0] == 2.0

    def test_state_from_dict(self):
        state = state_from_dict({"n": 1, "mean": [0, 0], "cov": [[3, 0], [0, 3]], "label": "th"})
        assert state.label == "th"
        with pytest.raises(PhysicalityError) as exc_info:
            state_from_dict({"n": 1, "mean": [0, 0], "cov": [[0.5, 0], [0, 0.5]]})
        assert not exc_info.value.report.physical

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ParseError, match="cannot read"):
            load_state_file(tmp_path / "missing.state")


class TestWriteState:
    def test_text_round_trip_is_exact(self, rng, tmp_path):
        for k in range(5):
            state = make_state(rng, 1 + k % 3).model_copy(update={"label": f"random{k}"})
            path = write_state(state, tmp_path / f"random{k}.state")
            again = parse_state(path)
            assert again.label == state.label
            assert np.array_equal(again.mean, state.mean)
            assert np.array_equal(again.cov, state.cov)

    @pytest.mark.parametrize("label", ["run#3", "my #1 state", "#first", " padded ", '"quoted"', "two\nlines"])
    def test_labels_round_trip(self, label, tmp_path):
        state = make_state(np.random.default_rng(7), 1).model_copy(update={"label": label})
        again = parse_state(write_state(state, tmp_path / "labelled.state"))
        assert again.label == label

    def test_plain_labels_stay_unquoted(self, rng):
        state = make_state(rng, 1).model_copy(update={"label": "run#3"})
        assert "label run#3" in format_text(state).splitlines()

    def test_text_layout(self, fixture_path):
        text = format_text(parse_state(fixture_path("thermal1.state")))
        assert text.splitlines() == ["# gaussfid state v1", "label thermal1", "n 1", "mean", "0 0", "cov", "3 0", "0 3"]

    def test_json_with_recipe(self, tmp_path):
        recipe = StateRecipe(thermal=[0.5], squeezing=[(0.2, 0.1)], displacement=[0.3 + 0.1j])
        state = moments_of(recipe)
        path = write_state(state, tmp_path / "squeezed.json", fmt="json", recipe=recipe)
        data = json.loads(path.read_text())
        assert data["format"] == JSON_FORMAT
        doc = load_state_file(path)
        assert doc.recipe == recipe
        assert np.array_equal(to_state(doc).cov, state.cov)

    def test_state_to_dict_omits_missing_label(self, rng):
        data = state_to_dict(make_state(rng, 2))
        assert "label" not in data
        assert "recipe" not in data
        assert data["n"] == 2

    def test_recipe_needs_json(self, tmp_path):
        recipe = StateRecipe(thermal=[0.0])
        with pytest.raises(ValueError):
            write_state(moments_of(recipe), tmp_path / "vac.state", recipe=recipe)

    def test_unknown_format(self, fixture_path, tmp_path):
        with pytest.raises(ValueError):
            write_state(parse_state(fixture_path("vacuum.state")), tmp_path / "v.yaml", fmt="yaml")
