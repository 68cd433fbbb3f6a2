"""Named scenarios and the JSON scenario-file schema.

A scenario file is one JSON object::

    {
      "name": "my-cluster",
      "model": "exponential" | "weibull",
      "cluster": {"groups": [{"count": 50, "a": 1.0, "mu": 1.0, "alpha": 1.2}, ...]}
              |  {"random": {"n": 100, "seed": 7, "a": [...], "mu": [...], "alpha": [...]}},
      "r": 10000,
      "schemes": ["hcmm", "uniform-uncoded", ...],
      "coding": {"kind": "rlc"} | {"kind": "lt", "c": 0.03, "delta": 0.1, "epsilon": 0.13},
      "straggler": {"p": 0.0, "slowdown": 4.0},
      "trials": 5000,
      "output": "results/my-cluster.csv",
      "budget": {"kappa": 1.0, "gamma": 2.0, "limit": 860.0}
    }

``alpha`` is required on Weibull groups and forbidden on exponential ones.
A ``budget`` section turns the cluster groups into machine classes (their
``count`` is the number available); it needs an exponential, grouped
cluster. ``description`` is an optional free-text field.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .allocator import Scheme
from .budget import BudgetScenario, CostModel, MachineClass
from .coding import LtCodeSpec, robust_soliton
from .models import EXPONENTIAL, WEIBULL, ClusterSpec, RuntimeModel
from .rng import make_rng
from .simulator import StragglerModel

RANDOM_SCENARIO_SEED = 0


class ConfigError(ValueError):
    """Invalid scenario; ``errors`` lists ``field.path: message`` strings."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class Group:
    count: int
    a: float
    mu: float
    alpha: float | None = None


@dataclass(frozen=True)
class RandomCluster:
    """Workers with each parameter drawn independently and uniformly from a set."""

    n: int
    seed: int
    a: tuple
    mu: tuple
    alpha: tuple | None = None


@dataclass(frozen=True)
class Coding:
    kind: str = "rlc"
    c: float | None = None
    delta: float | None = None
    epsilon: float | None = None


@dataclass(frozen=True)
class Budget:
    kappa: float
    gamma: float
    limit: float


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    model: str
    r: int
    groups: tuple = ()
    random: RandomCluster | None = None
    schemes: tuple = tuple(s.value for s in Scheme)
    coding: Coding = field(default_factory=Coding)
    straggler: StragglerModel = field(default_factory=StragglerModel)
    trials: int = 5000
    output: str | None = None
    budget: Budget | None = None
    description: str = ""

    def cluster(self):
        weibull = self.model == WEIBULL
        if self.random is not None:
            rc = self.random
            rng = make_rng(rc.seed)
            a = rng.choice(rc.a, rc.n)
            mu = rng.choice(rc.mu, rc.n)
            alpha = rng.choice(rc.alpha, rc.n) if weibull else [None] * rc.n
            return ClusterSpec.from_models(
                RuntimeModel(float(x), float(m), None if s is None else float(s))
                for x, m, s in zip(a, mu, alpha)
            )
        return ClusterSpec.from_groups(
            (g.count, RuntimeModel(float(g.a), float(g.mu), None if g.alpha is None else float(g.alpha)))
            for g in self.groups
        )

    @property
    def n(self):
        return self.random.n if self.random is not None else sum(g.count for g in self.groups)

    @property
    def lt(self):
        return self.coding.kind == "lt"

    def lt_spec(self, k=None):
        if not self.lt:
            raise ValueError(f"scenario {self.name!r} does not use LT coding")
        return robust_soliton(k or self.r, self.coding.c, self.coding.delta, self.coding.epsilon)

    @property
    def lt_epsilon(self):
        return self.coding.epsilon if self.lt else None

    def budget_scenario(self, limit=None):
        if self.budget is None:
            raise ValueError(f"scenario {self.name!r} has no budget section")
        classes = [MachineClass(g.a, g.mu, g.count) for g in self.groups]
        cost = CostModel(self.budget.kappa, self.budget.gamma)
        return BudgetScenario(tuple(classes), cost, self.r, self.budget.limit if limit is None else limit)

    def to_dict(self):
        d = {"name": self.name}
        if self.description:
            d["description"] = self.description
        d["model"] = self.model
        if self.random is not None:
            rc = self.random
            rnd = {"n": rc.n, "seed": rc.seed, "a": list(rc.a), "mu": list(rc.mu)}
            if rc.alpha is not None:
                rnd["alpha"] = list(rc.alpha)
            d["cluster"] = {"random": rnd}
        else:
            groups = []
            for g in self.groups:
                gd = {"count": g.count, "a": g.a, "mu": g.mu}
                if g.alpha is not None:
                    gd["alpha"] = g.alpha
                groups.append(gd)
            d["cluster"] = {"groups": groups}
        d["r"] = self.r
        d["schemes"] = list(self.schemes)
        coding = {"kind": self.coding.kind}
        if self.lt:
            coding.update(c=self.coding.c, delta=self.coding.delta, epsilon=self.coding.epsilon)
        d["coding"] = coding
        d["straggler"] = {"p": self.straggler.p, "slowdown": self.straggler.slowdown}
        d["trials"] = self.trials
        if self.output is not None:
            d["output"] = self.output
        if self.budget is not None:
            d["budget"] = {"kappa": self.budget.kappa, "gamma": self.budget.gamma, "limit": self.budget.limit}
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"


class _Checker:
    def __init__(self):
        self.errors = []

    def fail(self, path, msg):
        self.errors.append(f"{path}: {msg}")

    def get(self, obj, key, path, kind, required=True, default=None):
        if key not in obj:
            if required:
                self.fail(f"{path}.{key}" if path else key, "missing required field")
            return default
        value = obj[key]
        p = f"{path}.{key}" if path else key
        if kind == "number":
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                self.fail(p, f"expected a finite number, got {value!r}")
                return default
            return float(value)
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(p, f"expected an integer, got {value!r}")
                return default
            return value
        if kind == "str":
            if not isinstance(value, str):
                self.fail(p, f"expected a string, got {value!r}")
                return default
            return value
        if kind == "object":
            if not isinstance(value, dict):
                self.fail(p, "expected an object")
                return default
            return value
        if kind == "list":
            if not isinstance(value, list):
                self.fail(p, "expected a list")
                return default
            return value
        raise AssertionError(kind)

    def positive(self, value, path):
        if value is not None and not value > 0:
            self.fail(path, f"must be positive, got {value!r}")

    def unknown(self, obj, allowed, path):
        for key in obj:
            if key not in allowed:
                self.fail(f"{path}.{key}" if path else key, "unknown field")


def _number_set(ck, obj, key, path, required=True):
    values = ck.get(obj, key, path, "list", required=required)
    if values is None:
        return None
    out = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            ck.fail(f"{path}.{key}[{i}]", f"must be a positive number, got {v!r}")
        else:
            out.append(float(v))
    if not values:
        ck.fail(f"{path}.{key}", "must not be empty")
    return tuple(out)


def from_dict(data):
    """Validate a decoded scenario object; raises ConfigError listing every problem."""
    ck = _Checker()
    if not isinstance(data, dict):
        raise ConfigError(["<root>: expected a JSON object"])
    ck.unknown(data, {"name", "description", "model", "cluster", "r", "schemes", "coding",
                      "straggler", "trials", "output", "budget"}, "")
    name = ck.get(data, "name", "", "str")
    description = ck.get(data, "description", "", "str", required=False, default="")
    model = ck.get(data, "model", "", "str")
    if model is not None and model not in (EXPONENTIAL, WEIBULL):
        ck.fail("model", f"must be {EXPONENTIAL!r} or {WEIBULL!r}, got {model!r}")
    weibull = model == WEIBULL

    groups, random = (), None
    cluster = ck.get(data, "cluster", "", "object")
    if cluster is not None:
        ck.unknown(cluster, {"groups", "random"}, "cluster")
        if ("groups" in cluster) == ("random" in cluster):
            ck.fail("cluster", "exactly one of 'groups' or 'random' is required")
        elif "groups" in cluster:
            raw = ck.get(cluster, "groups", "cluster", "list") or []
            if not raw and isinstance(cluster.get("groups"), list):
                ck.fail("cluster.groups", "must not be empty")
            parsed = []
            for i, g in enumerate(raw):
                p = f"cluster.groups[{i}]"
                if not isinstance(g, dict):
                    ck.fail(p, "expected an object")
                    continue
                ck.unknown(g, {"count", "a", "mu", "alpha"}, p)
                count = ck.get(g, "count", p, "int")
                if count is not None and count < 1:
                    ck.fail(f"{p}.count", f"must be at least 1, got {count!r}")
                a = ck.get(g, "a", p, "number")
                mu = ck.get(g, "mu", p, "number")
                ck.positive(a, f"{p}.a")
                ck.positive(mu, f"{p}.mu")
                alpha = None
                if weibull:
                    alpha = ck.get(g, "alpha", p, "number")
                    ck.positive(alpha, f"{p}.alpha")
                elif "alpha" in g:
                    ck.fail(f"{p}.alpha", "not allowed for the exponential model")
                parsed.append(Group(count, a, mu, alpha))
            groups = tuple(parsed)
        else:
            rc = ck.get(cluster, "random", "cluster", "object")
            if rc is not None:
                p = "cluster.random"
                ck.unknown(rc, {"n", "seed", "a", "mu", "alpha"}, p)
                n = ck.get(rc, "n", p, "int")
                if n is not None and n < 1:
                    ck.fail(f"{p}.n", f"must be at least 1, got {n!r}")
                seed = ck.get(rc, "seed", p, "int")
                if seed is not None and seed < 0:
                    ck.fail(f"{p}.seed", "must be non-negative")
                a_set = _number_set(ck, rc, "a", p)
                mu_set = _number_set(ck, rc, "mu", p)
                alpha_set = None
                if weibull:
                    alpha_set = _number_set(ck, rc, "alpha", p)
                elif "alpha" in rc:
                    ck.fail(f"{p}.alpha", "not allowed for the exponential model")
                random = RandomCluster(n, seed, a_set, mu_set, alpha_set)

    r = ck.get(data, "r", "", "int")
    if r is not None and r < 1:
        ck.fail("r", f"must be at least 1, got {r!r}")

    schemes = tuple(s.value for s in Scheme)
    if "schemes" in data:
        raw = ck.get(data, "schemes", "", "list") or []
        parsed = []
        for i, s in enumerate(raw):
            try:
                parsed.append(Scheme(s).value)
            except ValueError:
                ck.fail(f"schemes[{i}]", f"unknown scheme {s!r}")
        if not raw:
            ck.fail("schemes", "must not be empty")
        schemes = tuple(parsed)

    coding = Coding()
    if "coding" in data:
        cd = ck.get(data, "coding", "", "object")
        if cd is not None:
            ck.unknown(cd, {"kind", "c", "delta", "epsilon"}, "coding")
            kind = ck.get(cd, "kind", "coding", "str")
            if kind == "lt":
                c = ck.get(cd, "c", "coding", "number")
                delta = ck.get(cd, "delta", "coding", "number")
                eps = ck.get(cd, "epsilon", "coding", "number")
                ck.positive(c, "coding.c")
                if delta is not None and not 0 < delta < 1:
                    ck.fail("coding.delta", f"must lie in (0, 1), got {delta!r}")
                if eps is not None and eps < 0:
                    ck.fail("coding.epsilon", f"must be non-negative, got {eps!r}")
                coding = Coding("lt", c, delta, eps)
            elif kind == "rlc":
                for key in ("c", "delta", "epsilon"):
                    if key in cd:
                        ck.fail(f"coding.{key}", "only allowed with kind 'lt'")
            elif kind is not None:
                ck.fail("coding.kind", f"must be 'rlc' or 'lt', got {kind!r}")

    straggler = StragglerModel()
    if "straggler" in data:
        sd = ck.get(data, "straggler", "", "object")
        if sd is not None:
            ck.unknown(sd, {"p", "slowdown"}, "straggler")
            p = ck.get(sd, "p", "straggler", "number", required=False, default=0.0)
            slow = ck.get(sd, "slowdown", "straggler", "number", required=False, default=4.0)
            if p is not None and not 0 <= p <= 1:
                ck.fail("straggler.p", f"must lie in [0, 1], got {p!r}")
            elif slow is not None and slow < 1:
                ck.fail("straggler.slowdown", f"must be >= 1, got {slow!r}")
            else:
                straggler = StragglerModel(p, slow)

    trials = ck.get(data, "trials", "", "int", required=False, default=5000)
    if trials is not None and trials < 1:
        ck.fail("trials", f"must be at least 1, got {trials!r}")
    output = ck.get(data, "output", "", "str", required=False)

    budget = None
    if "budget" in data:
        bd = ck.get(data, "budget", "", "object")
        if bd is not None:
            ck.unknown(bd, {"kappa", "gamma", "limit"}, "budget")
            kappa = ck.get(bd, "kappa", "budget", "number")
            gamma = ck.get(bd, "gamma", "budget", "number")
            limit = ck.get(bd, "limit", "budget", "number")
            ck.positive(kappa, "budget.kappa")
            ck.positive(limit, "budget.limit")
            if gamma is not None and gamma < 1:
                ck.fail("budget.gamma", f"must be >= 1, got {gamma!r}")
            if model != EXPONENTIAL:
                ck.fail("budget", "requires the exponential model")
            if random is not None:
                ck.fail("budget", "requires a grouped cluster")
            xis = [g.a * g.mu for g in groups if g.a and g.mu]
            if xis and max(xis) - min(xis) > 1e-9:
                ck.fail("cluster.groups", "budget scenarios need the same a*mu in every group")
            budget = Budget(kappa, gamma, limit)

    if ck.errors:
        raise ConfigError(ck.errors)
    return ScenarioConfig(
        name=name, model=model, r=r, groups=groups, random=random, schemes=schemes,
        coding=coding, straggler=straggler, trials=trials, output=output, budget=budget,
        description=description,
    )


def parse(source):
    """Parse a scenario from a path or a JSON string."""
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([f"<file>: cannot read {path}: {exc.strerror}"]) from exc
    else:
        text = source
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<json>: line {exc.lineno} column {exc.colno}: {exc.msg}"]) from exc
    return from_dict(data)


# Shifted-exponential fits per row for 10^6-element rows (a, 1/mu), seconds.
_R4_2XLARGE = (1.37e-3, 8.25e-6)
_R4_XLARGE = (2.00e-3, 8.72e-6)
_LT = Coding("lt", 0.03, 0.1, 0.13)
_EC2_STRAGGLERS = StragglerModel(0.5, 4.0)
_SETS_A = (1.0, 4.0, 12.0)
_SETS_MU = (0.5, 2.0, 0.25)
_SETS_ALPHA = (0.9, 1.2, 1.5)


def _ec2_group(count, fit, row_scale):
    a, inv_mu = fit
    return Group(count, a * row_scale, 1.0 / (inv_mu * row_scale))


def _builtins():
    e, w = EXPONENTIAL, WEIBULL
    reg = [
        ScenarioConfig("exp-scenario-1", e, 10000, (Group(50, 1.0, 1.0), Group(50, 4.0, 0.5)),
                       description="2-mode heterogeneity, shifted exponential"),
        ScenarioConfig("exp-scenario-2", e, 10000,
                       (Group(25, 1.0, 0.5), Group(25, 4.0, 2.0), Group(50, 12.0, 0.25)),
                       description="3-mode heterogeneity, shifted exponential"),
        ScenarioConfig("exp-scenario-3", e, 10000,
                       random=RandomCluster(100, RANDOM_SCENARIO_SEED, _SETS_A, _SETS_MU),
                       description="random heterogeneity, shifted exponential"),
        ScenarioConfig("weibull-scenario-1", w, 10000,
                       (Group(50, 1.0, 1.0, 1.2), Group(50, 4.0, 0.5, 0.8)),
                       description="2-mode heterogeneity, shifted Weibull"),
        ScenarioConfig("weibull-scenario-2", w, 10000,
                       (Group(25, 1.0, 0.5, 0.9), Group(25, 4.0, 2.0, 1.2), Group(50, 12.0, 0.25, 1.5)),
                       description="3-mode heterogeneity, shifted Weibull"),
        ScenarioConfig("weibull-scenario-3", w, 10000,
                       random=RandomCluster(100, RANDOM_SCENARIO_SEED, _SETS_A, _SETS_MU, _SETS_ALPHA),
                       description="random heterogeneity, shifted Weibull"),
        ScenarioConfig("ec2-scenario-1", e, 10000,
                       (_ec2_group(4, _R4_2XLARGE, 0.5), _ec2_group(6, _R4_XLARGE, 0.5)),
                       coding=_LT, straggler=_EC2_STRAGGLERS, trials=2000,
                       description="4 r4.2xlarge + 6 r4.xlarge workers, 500000-element rows"),
        ScenarioConfig("ec2-scenario-2", e, 10000,
                       (_ec2_group(6, _R4_2XLARGE, 0.5), _ec2_group(9, _R4_XLARGE, 0.5)),
                       coding=_LT, straggler=_EC2_STRAGGLERS, trials=2000,
                       description="6 r4.2xlarge + 9 r4.xlarge workers, 500000-element rows"),
        ScenarioConfig("ec2-scenario-3", e, 10000,
                       (_ec2_group(6, _R4_2XLARGE, 1.0), _ec2_group(9, _R4_XLARGE, 1.0)),
                       coding=_LT, straggler=_EC2_STRAGGLERS, trials=2000,
                       description="6 r4.2xlarge + 9 r4.xlarge workers, 10^6-element rows"),
        ScenarioConfig("budget-1", e, 100, (Group(10, 0.5, 2.0), Group(10, 0.25, 4.0)),
                       schemes=("hcmm",), budget=Budget(1.0, 2.0, 860.0),
                       description="two machine classes, budget 860"),
        ScenarioConfig("budget-2", e, 100,
                       (Group(10, 1.0, 1.0), Group(10, 0.5, 2.0), Group(10, 0.125, 8.0)),
                       schemes=("hcmm",), budget=Budget(1.0, 2.0, 475.0),
                       description="three machine classes, budget 475"),
        ScenarioConfig("emulator-rlc", e, 1000, (Group(5, 1.0, 1.0), Group(5, 4.0, 0.5)),
                       trials=20, description="10-worker random linear coding job for the emulator"),
    ]
    return {s.name: s for s in reg}


BUILTINS = _builtins()


def builtin(name):
    try:
        return BUILTINS[name]
    except KeyError:
        raise ConfigError([f"<scenario>: unknown builtin {name!r}; choose from {', '.join(BUILTINS)}"]) from None


def load(ref):
    """Resolve a builtin name or a scenario file path."""
    if ref in BUILTINS:
        return BUILTINS[ref]
    return parse(Path(ref))
