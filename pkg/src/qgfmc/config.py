"""Flat ``key = value`` run configuration with dotted section names."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable


class ConfigError(ValueError):
    """Malformed, unknown or inconsistent configuration entry."""


def default_interaction() -> str:
    return str(resources.files("qgfmc") / "data" / "toy_sd.int")


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_int(s: str) -> int | None:
    return None if s.strip().lower() in ("", "none", "any") else int(s)


def _opt_float(s: str) -> float | None:
    return None if s.strip().lower() in ("", "none", "auto") else float(s)


def _list(conv: Callable[[str], Any]) -> Callable[[str], list]:
    def parse(s: str) -> list:
        items = [x.strip() for x in s.split(",") if x.strip()]
        return [conv(x) for x in items]

    return parse


def _int_like(s: str) -> int:
    return int(float(s)) if "e" in s.lower() else int(s)


def _pair(s: str) -> tuple[int, int]:
    i, j = s.split("-")
    return int(i), int(j)


def _choice(*options: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        v = s.strip().lower()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v

    return parse


# dotted key -> (attribute, parser)
KEYS: dict[str, tuple[str, Callable[[str], Any]]] = {
    "interaction.file": ("interaction_file", str),
    "interaction.normalized": ("normalized", _bool),
    "interaction.neutron_tz2": ("neutron_tz2", int),
    "space.orbitals": ("orbitals", _list(str)),
    "space.species": ("species", _choice("n", "p", "np")),
    "space.particles": ("particles", int),
    "space.m2": ("m2", _opt_int),
    "space.tz2": ("tz2", _opt_int),
    "mapping.scheme": ("scheme", _choice("jw", "bk")),
    "target.level": ("level", int),
    "subspace.n": ("n", int),
    "subspace.dt": ("dt", _list(float)),
    "excitation.modes": ("modes", _list(_pair)),
    "excitation.theta": ("theta", float),
    "evolution.backend": ("backend", _choice("exact", "trotter")),
    "evolution.trotter_dt": ("trotter_dt", _list(float)),
    "shadow.mode": ("shadow_mode", _choice("exact", "shadow")),
    "shadow.ensemble": ("ensemble", _choice("local", "global")),
    "shadow.shots": ("shots", _list(_int_like)),
    "shadow.seed": ("shadow_seed", int),
    "gfmc.lambda": ("lam", _opt_float),
    "gfmc.gamma": ("gamma", float),
    "gfmc.walkers": ("walkers", _int_like),
    "gfmc.steps": ("steps", _int_like),
    "gfmc.equilibration": ("equilibration", float),
    "gfmc.history": ("history", int),
    "gfmc.seed": ("gfmc_seed", int),
    "gfmc.populations": ("populations", int),
    "sweep.repeats": ("repeats", int),
    "output.dir": ("output_dir", str),
    "output.checkpoints": ("checkpoints", int),
    "exact.levels": ("exact_levels", int),
}


@dataclass
class RunConfig:
    interaction_file: str = field(default_factory=default_interaction)
    normalized: bool = True
    neutron_tz2: int = 1
    orbitals: list[str] = field(default_factory=lambda: ["0d5/2", "1s1/2"])
    species: str = "n"
    particles: int = 2
    m2: int | None = 0
    tz2: int | None = None
    scheme: str = "jw"
    level: int = 1
    n: int = 4
    dt: list[float] = field(default_factory=lambda: [0.3])
    modes: list[tuple[int, int]] = field(default_factory=list)
    theta: float = 1.0
    backend: str = "exact"
    trotter_dt: list[float] = field(default_factory=lambda: [0.05])
    shadow_mode: str = "exact"
    ensemble: str = "local"
    shots: list[int] = field(default_factory=lambda: [100000])
    shadow_seed: int = 0
    lam: float | None = None
    gamma: float = 0.0
    walkers: int = 1000
    steps: int = 1000
    equilibration: float = 0.1
    history: int = 20
    gfmc_seed: int = 0
    populations: int = 1
    repeats: int = 5
    output_dir: str = "out"
    checkpoints: int = 20
    exact_levels: int = 4

    def set(self, key: str, raw: str) -> None:
        key = key.strip().lower()
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        attr, conv = KEYS[key]
        try:
            value = conv(raw.strip())
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
        setattr(self, attr, value)

    def validate(self) -> "RunConfig":
        if not Path(self.interaction_file).is_file():
            raise ConfigError(f"interaction.file {self.interaction_file!r} does not exist")
        for key in ("space.orbitals", "subspace.dt", "evolution.trotter_dt", "shadow.shots"):
            if not getattr(self, KEYS[key][0]):
                raise ConfigError(f"{key} must not be empty")
        checks = [
            ("space.particles", self.particles >= 1),
            ("target.level", self.level >= 0),
            ("subspace.n", self.n >= 1),
            ("subspace.dt", all(x > 0 for x in self.dt)),
            ("evolution.trotter_dt", all(x > 0 for x in self.trotter_dt)),
            ("shadow.shots", all(x >= 1 for x in self.shots)),
            ("gfmc.gamma", 0.0 <= self.gamma <= 1.0),
            ("gfmc.walkers", self.walkers >= 1),
            ("gfmc.steps", self.steps >= 2),
            ("gfmc.equilibration", 0.0 <= self.equilibration < 1.0),
            ("gfmc.history", self.history >= 0),
            ("gfmc.populations", self.populations >= 1),
            ("sweep.repeats", self.repeats >= 2),
            ("output.checkpoints", self.checkpoints >= 1),
            ("exact.levels", self.exact_levels >= 1),
            ("excitation.modes", not self.modes or len(self.modes) >= self.level),
        ]
        for key, ok in checks:
            if not ok:
                raise ConfigError(f"{key}: value out of range")
        return self

    def items(self) -> dict[str, Any]:
        """Dotted keys with their current values (for run manifests)."""
        return {k: getattr(self, attr) for k, (attr, _) in KEYS.items()}


def parse_config_text(text: str, cfg: RunConfig | None = None, source: str = "<config>") -> RunConfig:
    cfg = cfg or RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        try:
            cfg.set(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return cfg


def load_config(path: str | None = None, overrides: list[str] | None = None) -> RunConfig:
    """Defaults, then the file at ``path``, then ``key=value`` overrides; validated."""
    cfg = RunConfig()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path!r} does not exist")
        parse_config_text(p.read_text(encoding="utf-8"), cfg, str(p))
        # relative interaction paths resolve against the config file
        f = Path(cfg.interaction_file)
        if not f.is_absolute() and not f.exists() and (p.parent / f).exists():
            cfg.interaction_file = str(p.parent / f)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg.set(key, value)
    return cfg.validate()


def dump_config(cfg: RunConfig) -> str:
    def fmt(v) -> str:
        if isinstance(v, list):
            return ", ".join(fmt(a) for a in v)
        if isinstance(v, tuple):
            return f"{v[0]}-{v[1]}"
        if v is None:
            return "none"
        if isinstance(v, bool):
            return "true" if v else "false"
        return str(v)

    return "\n".join(f"{k} = {fmt(v)}" for k, v in cfg.items().items()) + "\n"
