import pytest

from pflab.config import SCHEMA, default_config, parse_config
from pflab.errors import ConfigError


def test_minimal_config_fills_defaults():
    cfg = parse_config("experiment = barenblatt-fit\n")
    assert cfg.kind == "barenblatt-fit"
    assert cfg["p"] == 3.0
    assert cfg["mu1"] == 1.0
    assert cfg["threshold_frac"] == 1e-6
    assert cfg["stepper"] == "implicit"


def test_comments_and_blank_lines():
    cfg = parse_config(
        "# a comment\n"
        "experiment = halfspace-fsp\n"
        "\n"
        "p = 3.5  # trailing comment\n")
    assert cfg["p"] == 3.5


def test_unknown_key_rejected_with_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("experiment = barenblatt-fit\nnot_a_key = 3\n")
    assert any(line == 2 and "not_a_key" in msg for line, msg in exc.value.errors)


def test_duplicate_key_names_both_lines():
    with pytest.raises(ConfigError) as exc:
        parse_config("experiment = barenblatt-fit\np = 3\np = 4\n")
    (entry,) = [e for e in exc.value.errors if "duplicate" in e[1]]
    assert entry[0] == 3
    assert "line 2" in entry[1]


def test_degenerate_range_error_cites_p():
    with pytest.raises(ConfigError) as exc:
        parse_config("experiment = halfspace-fsp\np = 1.5\n")
    assert any("p > 2" in msg for _, msg in exc.value.errors)


def test_all_errors_collected():
    text = ("experiment = barenblatt-fit\n"
            "p = not_a_number\n"
            "mystery = 1\n"
            "cells = 0\n")
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert len(exc.value.errors) >= 2


def test_type_coercions():
    cfg = parse_config(
        "experiment = fluid2d-taylor-green\n"
        "dimension = 2\n"
        "p = 2\n"
        "cells = 64,32\n"
        "bounds = 0:6.28,0:3.14\n"
        "svg = false\n"
        "lambda_set = 0.25,4\n")
    assert cfg["cells"] == (64, 32)
    assert cfg["bounds"] == ((0.0, 6.28), (0.0, 3.14))
    assert cfg["svg"] is False
    assert cfg["lambda_set"] == (0.25, 4.0)


def test_flag_overrides_win():
    cfg = parse_config("experiment = barenblatt-fit\np = 3\n",
                       overrides={"p": "3.5"})
    assert cfg["p"] == 3.5


def test_missing_experiment():
    with pytest.raises(ConfigError, match="experiment"):
        parse_config("p = 3\n")


def test_fluid_requires_2d():
    with pytest.raises(ConfigError) as exc:
        parse_config("experiment = fluid2d-taylor-green\ndimension = 1\np = 2\n")
    assert any("2-D" in msg for _, msg in exc.value.errors)


def test_bad_syntax_line_number():
    with pytest.raises(ConfigError) as exc:
        parse_config("experiment = exponent-identities\njust words\n")
    assert any(line == 2 for line, _ in exc.value.errors)


def test_default_config_helper():
    cfg = default_config("stampacchia-suite", a1_cases=7, seed=3)
    assert cfg["a1_cases"] == 7 and cfg["seed"] == 3


def test_schema_defaults_are_valid():
    # every kind parses with pure defaults (plus dimension fix for fluids)
    from pflab.config import EXPERIMENT_KINDS

    for kind in EXPERIMENT_KINDS:
        over = {}
        if kind.startswith("fluid2d"):
            over = {"dimension": "2", "p": "2" if kind.endswith("green") else "3.5"}
        cfg = parse_config(f"experiment = {kind}\n", over)
        assert set(SCHEMA) >= set(cfg.values)
