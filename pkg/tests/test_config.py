import pytest

from blowuplab.config import CHECKS, DEFAULTS, ConfigError, from_mapping, load


def write(tmp_path, text):
    p = tmp_path / "run.yaml"
    p.write_text(text)
    return p


def test_defaults():
    cfg = from_mapping({})
    assert cfg.family == {"name": "pure_exp", "params": {}}
    assert cfg.solver["J"] == 800 and cfg.solver["u_cap"] is None
    assert cfg.checks == ["certify"]
    assert cfg.tol == 1e-12 and cfg.A0 == 3.0
    assert set(cfg.as_dict()) == set(DEFAULTS)


def test_partial_sections_merge_with_defaults(tmp_path):
    cfg = load(write(tmp_path, "solver:\n  J: 200\ninitial:\n  a: 3.5\n"))
    assert cfg.solver["J"] == 200 and cfg.solver["safety"] == 0.05
    assert cfg.initial == {"kind": "bump", "a": 3.5, "m": 1.0, "r0": 0.0}


def test_family_params(tmp_path):
    cfg = load(write(tmp_path, "family:\n  name: power_log\n  params: {q: 2}\n"))
    assert cfg.make_family().params["q"] == 2


def test_unknown_section_reports_line(tmp_path):
    with pytest.raises(ConfigError) as e:
        load(write(tmp_path, "family:\n  name: pure_exp\nsolvr:\n  J: 10\n"))
    assert e.value.field == "solvr" and e.value.line == 3


def test_unknown_key_reports_dotted_field(tmp_path):
    with pytest.raises(ConfigError) as e:
        load(write(tmp_path, "solver:\n  J: 100\n  theta: 0.5\n"))
    assert e.value.field == "solver.theta" and e.value.line == 3
    assert "line 3" in str(e.value)


def test_unknown_family_names_field(tmp_path):
    with pytest.raises(ConfigError) as e:
        load(write(tmp_path, "checks: [certify]\nfamily:\n  name: pure_expo\n"))
    assert e.value.field == "family.name" and e.value.line == 3


def test_bad_family_params(tmp_path):
    with pytest.raises(ConfigError) as e:
        load(write(tmp_path, "family:\n  name: oscillating_cos_power\n  params: {nu: 0.4, gamma: 0.3}\n"))
    assert e.value.field == "family.params"


@pytest.mark.parametrize("text, field", [
    ("domain:\n  n: 0\n", "domain.n"),
    ("domain:\n  n: 1.5\n", "domain.n"),
    ("domain:\n  bc: periodic\n", "domain.bc"),
    ("initial:\n  kind: spike\n", "initial.kind"),
    ("solver:\n  J: 4\n", "solver.J"),
    ("solver:\n  safety: '0.1'\n", "solver.safety"),
    ("solver:\n  diffusion: 1\n", "solver.diffusion"),
    ("checks: [simulate, plots]\n", "checks"),
    ("tol: 0.1\n", "tol"),
])
def test_field_validation(tmp_path, text, field):
    with pytest.raises(ConfigError) as e:
        load(write(tmp_path, text))
    assert e.value.field == field


def test_yaml_syntax_error_has_line(tmp_path):
    with pytest.raises(ConfigError) as e:
        load(write(tmp_path, "solver:\n  J: [1, 2\n"))
    assert e.value.line is not None


def test_top_level_must_be_mapping(tmp_path):
    with pytest.raises(ConfigError):
        load(write(tmp_path, "- 1\n- 2\n"))


def test_check_names_known():
    assert set(CHECKS) >= {"certify", "simulate", "profiles"}
