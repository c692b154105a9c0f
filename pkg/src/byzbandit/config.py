"""YAML experiment configuration.

Grammar (all sections are mappings)::

    name: my-experiment          # optional
    root_seed: 7
    horizon: 10000
    runs: 50
    env:
      arms:                      # or the shorthand ``means: [0.5, 0.45]``
        - {kind: bernoulli, p: 0.5}
        - {kind: beta, a: 2, b: 3}
      overrides:                 # optional per-agent laws with the same means
        3: [{kind: uniform, low: 0.0, high: 1.0}, ...]
    graph:
      kind: er_fixed             # er_fixed | er_per_round | fixed | complete | min_degree
      q: 0.8                     # er_* only
      edges: [[0, 1], [1, 2]]    # fixed only; or ``edge_file: path``
      symmetric: false           # fixed only
      d_min: 3                   # min_degree only
      target_mean_degree: 5.0    # min_degree only
    agents:
      n: 5
      byzantine: [0]
      f: 1
      kappa: 1.0                 # scalar, per-agent list, or {uniform: [low, high]}
    policy: {kind: resilient_ucb, tuned: false}
    attack: {kind: constant, means: [0.4, 0.5, 0.4, 0.3]}

Distribution kinds: bernoulli(p), point(value), beta(a, b), uniform(low, high).
Policy kinds: resilient_ucb(tuned), single_ucb1, resilient_greedy,
softmax_top3(temperature), running_consensus. Attack kinds: constant(means),
gaussian(variance), adaptive, consensus_constant(value), honest.
"""
from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Any, Union

import yaml

from .adversary import Adaptive, ConsensusConstant, ConstantBroadcast, GaussianBias, Honest
from .core import ArmEnvironment, Bernoulli, ConfigError, PointMass, beta_distribution, uniform_distribution
from .engine import ExperimentConfig, KappaUniform
from .policies import ResilientGreedy, ResilientUCB, RunningConsensusTrimmed, SingleUCB1, SoftmaxTop3
from .topology import (DirectedGraph, ErRandomFixed, ErRandomPerRound, Fixed, MinDegreeConstrained,
                       load_edge_list)

PRESET_PACKAGE = "byzbandit.presets"


class _Section:
    """Mapping wrapper that tracks the key path and unused keys."""

    def __init__(self, data: Any, path: str):
        if not isinstance(data, dict):
            raise ConfigError("expected a mapping", path or "<root>")
        self.data = data
        self.path = path
        self.used: set = set()

    def _key(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def has(self, key: str) -> bool:
        return key in self.data

    def get(self, key: str, default: Any = ..., kind: type = None):
        self.used.add(key)
        if key not in self.data:
            if default is ...:
                raise ConfigError("missing required field", self._key(key))
            return default
        value = self.data[key]
        if kind is not None:
            value = _coerce(value, kind, self._key(key))
        return value

    def section(self, key: str) -> "_Section":
        return _Section(self.get(key), self._key(key))

    def finish(self):
        extra = sorted(set(map(str, self.data)) - set(map(str, self.used)))
        if extra:
            raise ConfigError(f"unknown field {extra[0]!r}", self._key(extra[0]))


def _coerce(value: Any, kind: type, path: str):
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError("expected true or false", path)
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("expected an integer", path)
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("expected a number", path)
        return float(value)
    if kind is list:
        if not isinstance(value, list):
            raise ConfigError("expected a list", path)
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError("expected a string", path)
        return value
    raise TypeError(kind)


def _wrap(path: str, fn, *args):
    try:
        return fn(*args)
    except ConfigError as exc:
        if exc.path:
            raise
        raise ConfigError(str(exc), path) from None


# ---------------------------------------------------------------- parsing


def _parse_dist(data: Any, path: str):
    sec = _Section(data, path)
    kind = sec.get("kind", kind=str)
    if kind == "bernoulli":
        dist = _wrap(path, Bernoulli, sec.get("p", kind=float))
    elif kind == "point":
        dist = _wrap(path, PointMass, sec.get("value", kind=float))
    elif kind == "beta":
        dist = _wrap(path, beta_distribution, sec.get("a", kind=float), sec.get("b", kind=float))
    elif kind == "uniform":
        dist = _wrap(path, uniform_distribution, sec.get("low", kind=float), sec.get("high", kind=float))
    else:
        raise ConfigError(f"unknown distribution kind {kind!r}", f"{path}.kind")
    sec.finish()
    return dist


def _parse_env(sec: _Section) -> ArmEnvironment:
    if sec.has("means") == sec.has("arms"):
        raise ConfigError("give exactly one of 'arms' or 'means'", sec.path)
    if sec.has("means"):
        means = sec.get("means", kind=list)
        arms = [_wrap(f"{sec.path}.means[{k}]", Bernoulli, _coerce(p, float, f"{sec.path}.means[{k}]"))
                for k, p in enumerate(means)]
    else:
        arms = [_parse_dist(d, f"{sec.path}.arms[{k}]") for k, d in enumerate(sec.get("arms", kind=list))]
    overrides = {}
    raw = sec.get("overrides", {})
    if not isinstance(raw, dict):
        raise ConfigError("expected a mapping", f"{sec.path}.overrides")
    for agent, dists in raw.items():
        p = f"{sec.path}.overrides.{agent}"
        agent = _coerce(agent, int, p)
        overrides[agent] = [_parse_dist(d, f"{p}[{k}]") for k, d in enumerate(_coerce(dists, list, p))]
    sec.finish()
    return _wrap(sec.path, ArmEnvironment, arms, overrides)


def _parse_graph(sec: _Section, n: int, base_dir: Path):
    kind = sec.get("kind", kind=str)
    p = sec.path
    if kind in ("er_fixed", "er_per_round"):
        q = sec.get("q", kind=float)
        model = _wrap(f"{p}.q", ErRandomFixed if kind == "er_fixed" else ErRandomPerRound, q)
    elif kind == "complete":
        model = Fixed(DirectedGraph.complete(n))
    elif kind == "fixed":
        symmetric = sec.get("symmetric", False, kind=bool)
        if sec.has("edges") == sec.has("edge_file"):
            raise ConfigError("give exactly one of 'edges' or 'edge_file'", p)
        if sec.has("edges"):
            edges = []
            for idx, e in enumerate(sec.get("edges", kind=list)):
                ep = f"{p}.edges[{idx}]"
                e = _coerce(e, list, ep)
                if len(e) != 2:
                    raise ConfigError("an edge is a pair [j, i]", ep)
                edges.append((_coerce(e[0], int, ep), _coerce(e[1], int, ep)))
            graph = _wrap(f"{p}.edges", DirectedGraph.from_edges, n, edges, symmetric)
        else:
            path = base_dir / sec.get("edge_file", kind=str)
            try:
                graph = _wrap(f"{p}.edge_file", load_edge_list, path, n, symmetric)
            except OSError as exc:
                raise ConfigError(f"cannot read edge file: {exc.strerror}", f"{p}.edge_file") from None
        model = Fixed(graph)
    elif kind == "min_degree":
        model = MinDegreeConstrained(sec.get("d_min", kind=int), sec.get("target_mean_degree", kind=float))
        _wrap(p, model.base_q, n)
    else:
        raise ConfigError(f"unknown graph kind {kind!r}", f"{p}.kind")
    sec.finish()
    return model


def _parse_kappa(value: Any, path: str):
    if isinstance(value, dict):
        sec = _Section(value, path)
        lo, hi = _coerce(sec.get("uniform", kind=list), list, f"{path}.uniform")
        sec.finish()
        return _wrap(path, KappaUniform, _coerce(lo, float, path), _coerce(hi, float, path))
    if isinstance(value, list):
        return tuple(_coerce(v, float, f"{path}[{i}]") for i, v in enumerate(value))
    return _coerce(value, float, path)


def _parse_policy(sec: _Section):
    kind = sec.get("kind", kind=str)
    if kind == "resilient_ucb":
        policy = ResilientUCB(sec.get("tuned", False, kind=bool))
    elif kind == "single_ucb1":
        policy = SingleUCB1()
    elif kind == "resilient_greedy":
        policy = ResilientGreedy()
    elif kind == "softmax_top3":
        policy = _wrap(sec.path, SoftmaxTop3, sec.get("temperature", 1.0, kind=float))
    elif kind == "running_consensus":
        policy = RunningConsensusTrimmed()
    else:
        raise ConfigError(f"unknown policy kind {kind!r}", f"{sec.path}.kind")
    sec.finish()
    return policy


def _parse_attack(sec: _Section):
    kind = sec.get("kind", kind=str)
    p = sec.path
    if kind == "constant":
        means = sec.get("means", kind=list)
        attack = ConstantBroadcast(tuple(_coerce(v, float, f"{p}.means[{k}]") for k, v in enumerate(means)))
    elif kind == "gaussian":
        attack = _wrap(p, GaussianBias, sec.get("variance", 0.01, kind=float))
    elif kind == "adaptive":
        attack = Adaptive()
    elif kind == "consensus_constant":
        value = sec.get("value", 1 / 3)
        if isinstance(value, list):
            value = tuple(_coerce(v, float, f"{p}.value[{k}]") for k, v in enumerate(value))
        else:
            value = _coerce(value, float, f"{p}.value")
        attack = ConsensusConstant(value)
    elif kind == "honest":
        attack = Honest()
    else:
        raise ConfigError(f"unknown attack kind {kind!r}", f"{p}.kind")
    sec.finish()
    return attack


def config_from_dict(data: Any, base_dir: Union[str, Path] = ".") -> ExperimentConfig:
    root = _Section(data, "")
    agents = root.section("agents")
    n = agents.get("n", kind=int)
    if n < 1:
        raise ConfigError("at least one agent is required", "agents.n")
    byzantine = tuple(_coerce(b, int, f"agents.byzantine[{i}]")
                      for i, b in enumerate(agents.get("byzantine", [], kind=list)))
    f = agents.get("f", 0, kind=int)
    kappa = _parse_kappa(agents.get("kappa", 1.0), "agents.kappa")
    agents.finish()
    env = _parse_env(root.section("env"))
    graph = _parse_graph(root.section("graph"), n, Path(base_dir))
    policy = _parse_policy(root.section("policy")) if root.has("policy") else ResilientUCB()
    attack = _parse_attack(root.section("attack")) if root.has("attack") else Honest()
    config = ExperimentConfig(
        env=env, graph=graph, n_agents=n, byzantine=byzantine, f=f, kappa=kappa,
        policy=policy, attack=attack,
        horizon=root.get("horizon", kind=int),
        runs=root.get("runs", 1, kind=int),
        root_seed=root.get("root_seed", kind=int),
        name=root.get("name", "", kind=str),
    )
    root.finish()
    return config


def parse_config(path: Union[str, Path]) -> ExperimentConfig:
    """Load and validate a YAML config file.

    Raises ``OSError`` when the file cannot be read and ``ConfigError`` for
    malformed or invalid content.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_config_text(text, path.parent)


def parse_config_text(text: str, base_dir: Union[str, Path] = ".") -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}", "<file>") from None
    return config_from_dict(data, base_dir)


def list_presets() -> list[str]:
    files = resources.files(PRESET_PACKAGE).iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".yaml"))


def load_preset(name: str) -> ExperimentConfig:
    ref = resources.files(PRESET_PACKAGE) / f"{name}.yaml"
    if not ref.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(list_presets())}", "preset")
    return parse_config_text(ref.read_text(encoding="utf-8"))


def resolve_config(spec: str) -> ExperimentConfig:
    """A config file path, or the name of a shipped preset."""
    path = Path(spec)
    if path.exists() or spec.endswith((".yaml", ".yml")):
        return parse_config(path)
    return load_preset(spec)


# ---------------------------------------------------------------- serialization


def _graph_dict(model, n: int) -> dict:
    if isinstance(model, ErRandomFixed):
        return {"kind": "er_fixed", "q": model.q}
    if isinstance(model, ErRandomPerRound):
        return {"kind": "er_per_round", "q": model.q}
    if isinstance(model, MinDegreeConstrained):
        return {"kind": "min_degree", "d_min": model.d_min, "target_mean_degree": model.target_mean_degree}
    return {"kind": "fixed", "symmetric": False, "edges": [list(e) for e in model.graph.edges()]}


def _policy_dict(policy) -> dict:
    out = {"kind": policy.kind}
    if isinstance(policy, ResilientUCB):
        out["tuned"] = policy.tuned
    if isinstance(policy, SoftmaxTop3):
        out["temperature"] = policy.temperature
    return out


def _attack_dict(attack) -> dict:
    out = {"kind": attack.kind}
    if isinstance(attack, ConstantBroadcast):
        out["means"] = list(attack.means)
    elif isinstance(attack, GaussianBias):
        out["variance"] = attack.variance
    elif isinstance(attack, ConsensusConstant):
        out["value"] = list(attack.value) if isinstance(attack.value, tuple) else attack.value
    return out


def config_to_dict(config: ExperimentConfig) -> dict:
    """Canonical plain-data form; ``config_from_dict`` inverts it."""
    kappa = config.kappa
    if isinstance(kappa, KappaUniform):
        kappa = {"uniform": [kappa.low, kappa.high]}
    elif isinstance(kappa, tuple):
        kappa = list(kappa)
    env = {"arms": [d.to_dict() for d in config.env.arms]}
    if config.env.overrides:
        env["overrides"] = {int(i): [d.to_dict() for d in dists]
                            for i, dists in sorted(config.env.overrides.items())}
    return {
        "name": config.name,
        "root_seed": config.root_seed,
        "horizon": config.horizon,
        "runs": config.runs,
        "env": env,
        "graph": _graph_dict(config.graph, config.n_agents),
        "agents": {"n": config.n_agents, "byzantine": list(config.byzantine), "f": config.f, "kappa": kappa},
        "policy": _policy_dict(config.policy),
        "attack": _attack_dict(config.attack),
    }


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False)
