import math

import pytest

from blowuplab.config import from_mapping
from blowuplab.nonlin import BUILTIN_NAMES, make_builtin
from blowuplab.pipeline import NumericFailure, certify_family, closed_form_oracles, default_u_cap, run, stage
from blowuplab.pde import SolverError


def test_closed_form_oracles_pass(tables):
    rep = closed_form_oracles(tables["pure_exp"])
    assert rep["passed"]
    assert max(rep["max_rel_error"].values()) <= 1e-10


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_certify_family_parts(tables, name):
    rep = certify_family(make_builtin(name), tables[name])
    assert rep["slow_variation"]["passed"]
    assert rep["uniform_ratio"]["passed"]
    assert ("closed_form" in rep) == (name == "pure_exp")
    # the inverse-gap threshold is unattainable at Y = 1e-12 (see README)
    assert not rep["lemmas"]["passed"]


def test_default_u_cap_is_ten_decades(tables):
    cap = default_u_cap(tables["pure_exp"], 4.0)
    assert cap == pytest.approx(4.0 + 10 * math.log(10.0), rel=1e-10)


def test_stage_wraps_numeric_errors():
    with pytest.raises(NumericFailure) as e:
        with stage("simulate"):
            raise SolverError("boom")
    assert e.value.stage == "simulate"
    with pytest.raises(KeyError):
        with stage("simulate"):
            raise KeyError("not numeric")


def test_certify_only_run_does_not_simulate(tmp_path):
    status, summary = run(from_mapping({"checks": ["certify"]}), tmp_path)
    assert "T_est" not in summary
    assert (tmp_path / "certify.json").exists()
    assert not (tmp_path / "trajectory.csv").exists()
    assert status == 1  # inverse-gap lemma


def test_profiles_run_reports_verdicts(tmp_path):
    cfg = from_mapping({"checks": ["profiles"], "solver": {"J": 400}})
    status, summary = run(cfg, tmp_path)
    ver = summary["checks"]["profiles"]["verdicts"]
    assert ver["refined_decreasing"]
    assert "final_profile_decreasing" in ver
    assert (tmp_path / "comparison.csv").exists()
    assert status == 0
