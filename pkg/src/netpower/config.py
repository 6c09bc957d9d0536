"""Run configuration: flat ``key = value`` files with dotted keys.

Example::

    seed = 20240501
    graph.n = 868
    graph.density = 0.022
    design.kind = bernoulli
    grid.alphas = 0.05, 0.25, 0.5
    grid.lambdas = null, 0.63   # null = no-effect point of each effect kind

Blank lines and ``#`` comments are ignored. Unknown keys are errors.
A preset fills in defaults; file values override it; command-line flags
override both. The only environment variable read is ``NETPOWER_OUT``: it
overrides ``output.dir`` from the file, and ``--out`` overrides it.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .graph import GENERATORS, GraphProfile
from .harness import PRESETS, TESTS, Scenario, ScenarioGrid

OUT_ENV = "NETPOWER_OUT"

_FLOAT = "float"
_INT = "int"
_BOOL = "bool"
_STR = "str"
_FLOATS = "floats"
_STRS = "strs"
_LAMBDAS = "lambdas"

KEYS = {
    "seed": _INT,
    "output.dir": _STR,
    "graph.path": _STR,
    "graph.n": _INT,
    "graph.density": _FLOAT,
    "graph.generator": _STR,
    "design.kind": _STR,
    "design.alpha": _FLOAT,
    "design.n_treated": _INT,
    "design.gamma": _FLOAT,
    "propagation.kind": _STR,
    "propagation.temperature": _FLOAT,
    "propagation.steps": _INT,
    "propagation.require_treated_neighbor": _BOOL,
    "effects.kind": _STR,
    "effects.lambda": _LAMBDAS,
    "estimators.joint": _STR,
    "exposure.replications": _INT,
    "grid.alphas": _FLOATS,
    "grid.temperatures": _FLOATS,
    "grid.lambdas": _LAMBDAS,
    "grid.effects": _STRS,
    "grid.propagations": _STRS,
    "grid.designs": _STRS,
    "grid.tests": _STRS,
    "grid.gammas": _FLOATS,
    "grid.replicates": _INT,
    "grid.permutations": _INT,
    "degcor.gammas": _FLOATS,
    "degcor.replicates": _INT,
}

DESIGN_KINDS = {"bernoulli": "bernoulli", "complete": "complete", "complete-count": "complete", "degree-tilted": "degree-tilted"}

# settings of the degree/treatment correlation study shared by both presets
DEGCOR_DEFAULTS = {
    "design.alpha": 0.05,
    "propagation.kind": "ising",
    "propagation.temperature": 50.0,
    "effects.kind": "multiplicative",
    "effects.lambda": (0.63,),
    "degcor.gammas": (-0.04, -0.02, 0.0, 0.02, 0.04, 0.06, 0.08, 0.10),
    "degcor.replicates": 200,
}


def _convert(key: str, raw: str, line: int | None = None):
    where = f" (line {line})" if line is not None else ""
    kind = KEYS.get(key)
    if kind is None:
        raise ConfigError(f"unknown key {key!r}{where}")
    text = raw.strip()
    try:
        if kind == _INT:
            value = int(text, 0)
        elif kind == _FLOAT:
            value = float(text)
        elif kind == _BOOL:
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            value = low in ("true", "1", "yes")
        elif kind == _STR:
            if not text:
                raise ValueError("empty")
            value = text
        else:
            items = [t.strip() for t in text.split(",") if t.strip()]
            if not items:
                raise ValueError("empty list")
            if kind == _FLOATS:
                value = tuple(float(t) for t in items)
            elif kind == _LAMBDAS:
                value = tuple(None if t.lower() == "null" else float(t) for t in items)
            else:
                value = tuple(items)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}{where}: {raw.strip()!r} ({exc})") from None
    if kind in (_FLOAT, _FLOATS) and any(isinstance(v, float) and math.isnan(v) for v in (value if isinstance(value, tuple) else (value,))):
        raise ConfigError(f"NaN is not allowed for {key}{where}")
    return value


def parse_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw, lineno)
    return values


def load(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_text(text)


def preset_values(name: str) -> dict:
    """Flat key values equivalent to a named preset."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    prof: GraphProfile = PRESETS[name]["graph"]
    grid: ScenarioGrid = PRESETS[name]["grid"]
    out = {
        "graph.n": prof.n,
        "graph.density": prof.target_density,
        "graph.generator": prof.generator,
        "design.kind": "bernoulli",
        "grid.alphas": grid.alphas,
        "grid.temperatures": grid.temperatures,
        "grid.lambdas": grid.lambdas,
        "grid.effects": grid.effect_kinds,
        "grid.propagations": grid.propagation_kinds,
        "grid.designs": grid.designs,
        "grid.tests": grid.tests,
        "grid.replicates": grid.replicates,
        "grid.permutations": grid.permutations,
    }
    out.update(DEGCOR_DEFAULTS)
    return out


@dataclass(frozen=True)
class RunConfig:
    seed: int
    out_dir: Path
    graph_path: Path | None = None
    profile: GraphProfile | None = None
    values: dict = field(default_factory=dict, repr=False)

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    # -- scalar scenario ------------------------------------------------------

    def design_kind(self) -> str:
        kind = self.get("design.kind", "bernoulli")
        if kind not in DESIGN_KINDS:
            raise ConfigError(f"unknown design.kind {kind!r}; choose from {sorted(DESIGN_KINDS)}")
        return DESIGN_KINDS[kind]

    def design(self, n: int):
        """The single design described by the ``design.*`` keys."""
        from .design import Bernoulli, CompleteCount, DegreeTilted

        kind = self.design_kind()
        if kind == "complete":
            if "design.n_treated" in self.values:
                return CompleteCount(int(self.values["design.n_treated"]))
            return CompleteCount(max(1, int(round(self._alpha() * n))))
        if kind == "degree-tilted":
            return DegreeTilted(self._alpha(), float(self.get("design.gamma", 0.0)))
        return Bernoulli(self._alpha())

    def _alpha(self) -> float:
        if "design.alpha" not in self.values:
            raise ConfigError("design.alpha is required")
        return float(self.values["design.alpha"])

    def scenario(self) -> Scenario:
        lam = self.get("effects.lambda", (None,))
        if len(lam) != 1:
            raise ConfigError("effects.lambda takes a single value")
        prop = self.get("propagation.kind", "ising")
        temp = self.get("propagation.temperature")
        if prop == "ising" and temp is None:
            raise ConfigError("propagation.temperature is required for ising propagation")
        return Scenario(
            design=self.design_kind(),
            alpha=self._alpha(),
            gamma=float(self.get("design.gamma", 0.0)),
            propagation=prop,
            temperature=temp if prop == "ising" else None,
            effect=self.get("effects.kind", "additive"),
            lam=lam[0],
            steps=int(self.get("propagation.steps", 1)),
            require_treated_neighbor=bool(self.get("propagation.require_treated_neighbor", False)),
        )

    # -- grid -------------------------------------------------------------------

    def grid(self) -> ScenarioGrid:
        def pick(grid_key, scalar_key, default=None):
            if grid_key in self.values:
                return tuple(self.values[grid_key])
            if scalar_key in self.values:
                v = self.values[scalar_key]
                return tuple(v) if isinstance(v, tuple) else (v,)
            if default is not None:
                return default
            raise ConfigError(f"{grid_key} (or {scalar_key}) is required")

        designs = tuple(DESIGN_KINDS.get(d, d) for d in pick("grid.designs", "design.kind", ("bernoulli",)))
        props = pick("grid.propagations", "propagation.kind", ("ising",))
        temps = pick("grid.temperatures", "propagation.temperature") if "ising" in props else (0.0,)
        return ScenarioGrid(
            alphas=pick("grid.alphas", "design.alpha"),
            temperatures=temps,
            lambdas=pick("grid.lambdas", "effects.lambda"),
            effect_kinds=pick("grid.effects", "effects.kind"),
            propagation_kinds=props,
            designs=designs,
            tests=tuple(self.get("grid.tests", TESTS)),
            replicates=int(self.get("grid.replicates", 200)),
            permutations=int(self.get("grid.permutations", 500)),
            seed=self.seed,
            gammas=tuple(self.get("grid.gammas", (self.get("design.gamma", 0.0),))),
            steps=int(self.get("propagation.steps", 1)),
            require_treated_neighbor=bool(self.get("propagation.require_treated_neighbor", False)),
            joint_method=self.joint_method(),
        )

    def joint_method(self) -> str:
        method = self.get("estimators.joint", "mc")
        if method not in ("mc", "closed"):
            raise ConfigError(f"estimators.joint must be 'mc' or 'closed', got {method!r}")
        return method

    def degcor(self) -> tuple[Scenario, tuple, int]:
        """Base scenario, tilts and replicates of the correlation study.

        Keys missing from the configuration take the study defaults
        (multiplicative 0.63, Ising F=50, alpha 0.05).
        """
        cfg = replace(self, values={**DEGCOR_DEFAULTS, **self.values})
        base = replace(cfg.scenario(), design="degree-tilted", gamma=0.0)
        return base, tuple(cfg.get("degcor.gammas")), int(cfg.get("degcor.replicates"))


def resolve(config_path=None, preset: str | None = None, seed: int | None = None, out: str | None = None) -> RunConfig:
    """Merge preset, file and flags into a validated :class:`RunConfig`."""
    values = preset_values(preset) if preset else {}
    if config_path is not None:
        file_values = load(config_path)
        if "graph.path" in file_values:
            for k in ("graph.n", "graph.density", "graph.generator"):
                values.pop(k, None)
        values.update(file_values)
    if seed is not None:
        values["seed"] = int(seed)
    if "seed" not in values:
        raise ConfigError("a seed is required (set 'seed' in the config or pass --seed)")
    s = int(values["seed"])
    if not 0 <= s < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {s}")

    out_dir = out or os.environ.get(OUT_ENV) or values.get("output.dir") or "."
    has_path = "graph.path" in values
    has_profile = any(k in values for k in ("graph.n", "graph.density"))
    if has_path and has_profile:
        raise ConfigError("give exactly one graph source: graph.path or graph.n/graph.density")
    graph_path = profile = None
    if has_path:
        graph_path = Path(values["graph.path"])
        if config_path is not None and not graph_path.is_absolute():
            graph_path = Path(config_path).parent / graph_path
    elif has_profile:
        if "graph.n" not in values or "graph.density" not in values:
            raise ConfigError("a graph profile needs both graph.n and graph.density")
        gen = values.get("graph.generator", "random-geometric")
        if gen not in GENERATORS:
            raise ConfigError(f"unknown graph.generator {gen!r}; choose from {list(GENERATORS)}")
        profile = GraphProfile(int(values["graph.n"]), float(values["graph.density"]), gen)
    else:
        raise ConfigError("no graph source: set graph.path or graph.n/graph.density, or use --preset")
    return RunConfig(s, Path(out_dir), graph_path, profile, values)


__all__ = ["RunConfig", "resolve", "parse_text", "load", "preset_values", "KEYS", "OUT_ENV"]
