"""Run configuration and scenario definition files (YAML)."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .demand import DriverCurves
from .params import GROUPS, ConfigError, ModelParams, coerce, params_from_groups, params_to_groups

_PARAM_GROUP = {name: g for g, names in GROUPS.items() for name in names}
_CURVE_FIELDS = {f.name: f.type for f in dataclasses.fields(DriverCurves)}


@dataclass
class RunConfig:
    params: ModelParams = field(default_factory=ModelParams)
    drivers: str = "builtin"  # "builtin" or a CSV path
    curves: DriverCurves = field(default_factory=DriverCurves)
    scenario: str | None = None
    n_runs: int = 500
    master_seed: int = 0
    out: str = "results"
    snapshots: list = field(default_factory=list)
    per_run: bool = False

    def validate(self) -> "RunConfig":
        self.params.validate()
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be nonnegative")
        for y in self.snapshots:
            if not self.params.start_year <= y <= self.params.end_year:
                raise ConfigError(f"snapshot year {y} outside {self.params.start_year}..{self.params.end_year}")
        return self


def _mark_index(node, path=(), out=None):
    """Map key paths to (line, column) of the key, both 1-based."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = path + (k.value,)
            out[key] = (k.start_mark.line + 1, k.start_mark.column + 1)
            _mark_index(v, key, out)
    return out


def _where(marks, path, source):
    if path in marks:
        line, col = marks[path]
        return f"{source}:{line}:{col}: "
    return f"{source}: "


def parse_yaml(text: str, source: str = "<config>"):
    """Parse YAML, returning (data, key marks); syntax errors carry line and column."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        loc = f"{source}:{mark.line + 1}:{mark.column + 1}: " if mark else f"{source}: "
        raise ConfigError(f"{loc}parse error: {exc.problem or exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: parse error: {exc}") from None
    return data, (_mark_index(node) if node is not None else {})


def _params_tree(tree, marks, source):
    """Accept grouped ({group: {key: v}}) or flat ({key: v}) parameter overrides."""
    if tree is None:
        return {}
    if not isinstance(tree, dict):
        raise ConfigError(f"{_where(marks, ('params',), source)}'params' must be a mapping")
    grouped = {}
    for key, value in tree.items():
        where = _where(marks, ("params", key), source)
        if key in GROUPS:
            if value is None:
                continue
            if not isinstance(value, dict):
                raise ConfigError(f"{where}parameter group {key!r} must be a mapping")
            for sub in value:
                if sub not in GROUPS[key]:
                    raise ConfigError(f"{_where(marks, ('params', key, sub), source)}unknown key {key}.{sub}")
            grouped.setdefault(key, {}).update(value)
        elif key in _PARAM_GROUP:
            grouped.setdefault(_PARAM_GROUP[key], {})[key] = value
        else:
            raise ConfigError(f"{where}unknown key params.{key}")
    return grouped


def _curves(tree, marks, source) -> DriverCurves:
    if tree is None:
        return DriverCurves()
    if not isinstance(tree, dict):
        raise ConfigError(f"{source}: 'builtin_drivers' must be a mapping")
    kw = {}
    for key, value in tree.items():
        if key not in _CURVE_FIELDS:
            raise ConfigError(f"{_where(marks, ('builtin_drivers', key), source)}unknown key builtin_drivers.{key}")
        kind = _CURVE_FIELDS[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"builtin_drivers.{key} expects a number, got {value!r}")
        kw[key] = int(value) if kind == "int" else float(value)
    return DriverCurves(**kw)


_TOP = ("params", "drivers", "builtin_drivers", "scenario", "n_runs", "master_seed", "out",
        "snapshots", "per_run")


def config_from_text(text: str, source: str = "<config>") -> RunConfig:
    data, marks = parse_yaml(text, source)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    for key in data:
        if key not in _TOP:
            raise ConfigError(f"{_where(marks, (key,), source)}unknown key {key}")
    try:
        params = params_from_groups(_params_tree(data.get("params"), marks, source))
    except ConfigError as exc:
        msg = str(exc)
        raise ConfigError(msg if msg.startswith(source) else f"{source}: {msg}") from None

    def scalar(key, kind, default):
        v = data.get(key, default)
        if v is None:
            return default
        if kind is int and (isinstance(v, bool) or not isinstance(v, int)):
            raise ConfigError(f"{_where(marks, (key,), source)}{key} expects an integer, got {v!r}")
        if kind is bool and not isinstance(v, bool):
            raise ConfigError(f"{_where(marks, (key,), source)}{key} expects true/false, got {v!r}")
        if kind is str and not isinstance(v, str):
            raise ConfigError(f"{_where(marks, (key,), source)}{key} expects a string, got {v!r}")
        return v

    snaps = data.get("snapshots") or []
    if not isinstance(snaps, list) or any(isinstance(y, bool) or not isinstance(y, int) for y in snaps):
        raise ConfigError(f"{_where(marks, ('snapshots',), source)}snapshots must be a list of years")
    cfg = RunConfig(params=params, drivers=scalar("drivers", str, "builtin"),
                    curves=_curves(data.get("builtin_drivers"), marks, source),
                    scenario=scalar("scenario", str, None), n_runs=scalar("n_runs", int, 500),
                    master_seed=scalar("master_seed", int, 0), out=scalar("out", str, "results"),
                    snapshots=sorted(set(snaps)), per_run=scalar("per_run", bool, False))
    return cfg.validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    return config_from_text(text, str(path))


def config_to_dict(cfg: RunConfig) -> dict:
    return {
        "params": params_to_groups(cfg.params),
        "drivers": cfg.drivers,
        "builtin_drivers": dataclasses.asdict(cfg.curves),
        "scenario": cfg.scenario,
        "n_runs": cfg.n_runs,
        "master_seed": cfg.master_seed,
        "out": cfg.out,
        "snapshots": list(cfg.snapshots),
        "per_run": cfg.per_run,
    }


def dump_config(cfg: RunConfig) -> str:
    """Effective configuration as YAML; loading it back gives an equal RunConfig."""
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


# scenario files

def _spec_from(item, where):
    from .scenario import PolicySpec

    if isinstance(item, str):
        return PolicySpec(item)
    if isinstance(item, dict):
        if set(item) <= {"kind", "magnitude"} and "kind" in item:
            return PolicySpec(item["kind"], item.get("magnitude", 0.10))
        if len(item) == 1:
            (kind, m), = item.items()
            return PolicySpec(kind, 0.10 if m is None else m)
    raise ConfigError(f"{where}cannot read policy entry {item!r}")


def _portfolio_from(policies, where):
    from .scenario import Portfolio

    if policies is None:
        return Portfolio()
    if isinstance(policies, dict):
        items = [{k: v} for k, v in policies.items()]
    elif isinstance(policies, list):
        items = policies
    else:
        raise ConfigError(f"{where}'policies' must be a list or mapping")
    return Portfolio(tuple(_spec_from(x, where) for x in items))


def scenarios_from_text(text: str, source: str = "<scenario>"):
    """[(name, Portfolio)] from a scenario document.

    Either a single ``policies:`` entry or a ``scenarios:`` list whose items
    carry ``name`` and ``policies``. Policies are given as ``Kind: magnitude``
    mappings, bare kind names (default magnitude 0.1) or ``{kind, magnitude}``.
    """
    data, marks = parse_yaml(text, source)
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: scenario file must be a mapping")
    for key in data:
        if key not in ("policies", "scenarios"):
            raise ConfigError(f"{_where(marks, (key,), source)}unknown key {key}")
    if "scenarios" in data and "policies" in data:
        raise ConfigError(f"{source}: use either 'policies' or 'scenarios', not both")
    if "policies" in data:
        return [("scenario_1", _portfolio_from(data["policies"], _where(marks, ("policies",), source)))]
    items = data.get("scenarios") or []
    if not isinstance(items, list):
        raise ConfigError(f"{source}: 'scenarios' must be a list")
    out = []
    for i, item in enumerate(items, 1):
        if not isinstance(item, dict) or not set(item) <= {"name", "policies"}:
            raise ConfigError(f"{source}: scenario #{i} must be a mapping with 'name' and 'policies'")
        out.append((str(item.get("name", f"scenario_{i}")), _portfolio_from(item.get("policies"), f"{source}: ")))
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise ConfigError(f"{source}: duplicate scenario names")
    return out


def load_scenarios(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read scenario file {path}: {exc.strerror}") from exc
    return scenarios_from_text(text, str(path))
