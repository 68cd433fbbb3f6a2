import json

import numpy as np
import pytest

from hcmm import scenarios
from hcmm.scenarios import BUILTINS, ConfigError, builtin, load, parse

MINIMAL = {
    "name": "tiny",
    "model": "exponential",
    "cluster": {"groups": [{"count": 2, "a": 1.0, "mu": 1.0}]},
    "r": 10,
}


def errors_for(data):
    with pytest.raises(ConfigError) as info:
        parse(json.dumps(data))
    return info.value.errors


def test_first_exponential_scenario():
    sc = builtin("exp-scenario-1")
    c = sc.cluster()
    assert c.n == 100 and sc.r == 10000
    assert [(g.count, g.a, g.mu) for g in sc.groups] == [(50, 1.0, 1.0), (50, 4.0, 0.5)]
    assert all(m.alpha is None for m in c.models)


def test_second_weibull_scenario():
    sc = builtin("weibull-scenario-2")
    assert [(g.count, g.a, g.mu, g.alpha) for g in sc.groups] == [
        (25, 1.0, 0.5, 0.9), (25, 4.0, 2.0, 1.2), (50, 12.0, 0.25, 1.5)]


def test_random_scenarios():
    sc = builtin("weibull-scenario-3")
    assert sc.random.a == (1.0, 4.0, 12.0)
    assert sc.random.mu == (0.5, 2.0, 0.25)
    assert sc.random.alpha == (0.9, 1.2, 1.5)
    c1, c2 = sc.cluster(), sc.cluster()
    assert c1 == c2 and c1.n == 100
    a, mu, alpha = c1.params()
    assert set(a) <= {1.0, 4.0, 12.0} and set(mu) <= {0.5, 2.0, 0.25}
    # coordinates are drawn independently, so (a, mu) pairs mix across the sets
    assert len(set(zip(a, mu))) > 3


def test_budget_scenarios():
    sc = builtin("budget-1")
    bs = sc.budget_scenario()
    assert [(c.a, c.mu, c.count) for c in bs.classes] == [(0.5, 2.0, 10), (0.25, 4.0, 10)]
    assert (bs.cost.kappa, bs.cost.gamma, bs.r, bs.budget) == (1.0, 2.0, 100, 860.0)
    bs2 = builtin("budget-2").budget_scenario()
    assert [(c.a, c.mu) for c in bs2.classes] == [(1.0, 1.0), (0.5, 2.0), (0.125, 8.0)]
    assert bs2.budget == 475.0
    with pytest.raises(ValueError):
        builtin("exp-scenario-1").budget_scenario()


def test_lt_scenarios():
    sc = builtin("ec2-scenario-3")
    spec = sc.lt_spec()
    assert (spec.k, spec.c, spec.delta, spec.planned_symbols) == (10000, 0.03, 0.1, 11300)
    assert sc.straggler.p == 0.5 and sc.straggler.slowdown == 4.0
    assert builtin("ec2-scenario-1").cluster().n == 10
    assert builtin("ec2-scenario-2").cluster().n == 15


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtin_round_trip(name):
    sc = builtin(name)
    text = sc.to_json()
    again = parse(text)
    assert again == sc
    assert again.to_json() == text
    assert again.cluster() == sc.cluster()


def test_file_round_trip(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(builtin("exp-scenario-3").to_json())
    assert load(str(path)) == builtin("exp-scenario-3")
    assert load("exp-scenario-3") is BUILTINS["exp-scenario-3"]


def test_unknown_builtin():
    with pytest.raises(ConfigError):
        builtin("nope")


def test_minimal_defaults():
    sc = parse(json.dumps(MINIMAL))
    assert sc.trials == 5000 and sc.coding.kind == "rlc" and sc.straggler.p == 0.0
    assert len(sc.schemes) == 4


def test_alpha_on_exponential_group():
    data = json.loads(json.dumps(MINIMAL))
    data["cluster"]["groups"][0]["alpha"] = 1.5
    assert errors_for(data) == ["cluster.groups[0].alpha: not allowed for the exponential model"]


def test_negative_mu():
    data = json.loads(json.dumps(MINIMAL))
    data["cluster"]["groups"][0]["mu"] = -1
    assert any(e.startswith("cluster.groups[0].mu:") for e in errors_for(data))


def test_many_errors_reported_together():
    data = {"name": "x", "model": "weibull", "cluster": {"groups": [{"count": 1, "a": 1, "mu": 1}]},
            "r": 0, "coding": {"kind": "lt", "c": 0.1}, "straggler": {"p": 2}, "extra": 1}
    errs = errors_for(data)
    for prefix in ("cluster.groups[0].alpha", "r:", "coding.delta", "coding.epsilon", "straggler.p", "extra"):
        assert any(e.startswith(prefix) for e in errs), prefix


def test_cluster_shape_errors():
    data = dict(MINIMAL, cluster={"groups": [], "random": {}})
    assert any(e.startswith("cluster:") for e in errors_for(data))
    data = dict(MINIMAL, cluster={"random": {"n": 3, "seed": 1, "a": [], "mu": [1.0]}})
    assert any(e.startswith("cluster.random.a") for e in errors_for(data))


def test_budget_section_checks():
    data = dict(MINIMAL, budget={"kappa": 1, "gamma": 0.5, "limit": 10})
    assert any(e.startswith("budget.gamma") for e in errors_for(data))
    data = dict(MINIMAL, cluster={"groups": [{"count": 1, "a": 1, "mu": 1}, {"count": 1, "a": 1, "mu": 2}]},
                budget={"kappa": 1, "gamma": 2, "limit": 10})
    assert any("a*mu" in e for e in errors_for(data))


def test_bad_json_and_missing_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        parse("{not json")
    assert info.value.errors[0].startswith("<json>")
    with pytest.raises(ConfigError):
        parse(tmp_path / "missing.json")


def test_random_sampling_is_independent_per_coordinate():
    rc = scenarios.RandomCluster(20000, 5, (1.0, 4.0, 12.0), (0.5, 2.0, 0.25))
    sc = scenarios.ScenarioConfig("r", "exponential", 10, random=rc)
    a, mu, _ = sc.cluster().params()
    joint = np.zeros((3, 3))
    for i, av in enumerate(rc.a):
        for j, mv in enumerate(rc.mu):
            joint[i, j] = np.mean((a == av) & (mu == mv))
    np.testing.assert_allclose(joint, 1 / 9, atol=0.01)
