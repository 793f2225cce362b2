"""Run configuration: key-value text files, presets and validation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["RunConfig", "ConfigError", "PRESETS", "load_config", "parse_pairs", "preset"]


class ConfigError(ValueError):
    """Invalid configuration (exit status 1 on the command line)."""


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one synthesis/simulation run.

    ``initial`` is one of ``paper-step``, ``double-step``, ``zero``,
    ``step:<lo>,<hi>,<breakpoint>``, ``file:<samples.csv>`` or
    ``coeffs:<coefficients.csv>``.  ``dt = None`` means a quarter of the
    axial cell width.
    """

    dimension: int = 1
    initial: str = "paper-step"
    T: float = 0.35
    tau: float = 0.05
    s: float = 1.65
    i_bar: int = 35
    j_bar: int = 0
    n_bar: int = 25
    cells: int = 100
    dt: float | None = None
    control_samples: int = 701
    cross_samples: int = 101
    snapshots: int = 36
    C1: float | None = None
    C2: float | None = None
    C3: float | None = None
    C4: float | None = None
    output: str = field(default="out", compare=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.dimension not in (1, 2, 3):
            raise ConfigError(f"dimension must be 1, 2 or 3 (got {self.dimension})")
        if not 0.0 < self.tau < self.T:
            raise ConfigError(f"invariant 0 < tau < T violated (tau={self.tau}, T={self.T})")
        if not 1.0 < self.s < 2.0:
            raise ConfigError(f"invariant 1 < s < 2 violated (s={self.s})")
        if self.i_bar < 2:
            raise ConfigError(f"i_bar must be at least 2 (got {self.i_bar})")
        if self.n_bar < 0 or self.j_bar < 0:
            raise ConfigError("orders must be non-negative")
        if self.dimension == 1 and self.j_bar != 0:
            raise ConfigError("j_bar must be 0 in dimension 1")
        if self.dimension >= 2 and self.j_bar < 1:
            raise ConfigError("j_bar must be positive in dimension >= 2")
        if self.i_bar + 11 > 64:
            raise ConfigError("i_bar too large for the derivative engine (i_bar <= 53)")
        if self.cells < 8:
            raise ConfigError("cells must be at least 8")
        if self.dt is not None and not 0.0 < self.dt <= 1.0 / self.cells:
            raise ConfigError(f"dt must lie in (0, h] with h = 1/cells (got {self.dt})")
        if self.control_samples < 2 or self.snapshots < 2 or self.cross_samples < 2:
            raise ConfigError("sample counts must be at least 2")
        kind = self.initial.split(":", 1)[0]
        if kind not in ("paper-step", "double-step", "zero", "step", "file", "coeffs"):
            raise ConfigError(f"unknown initial data '{self.initial}'")
        if kind == "double-step" and self.dimension != 2:
            raise ConfigError("double-step initial data needs dimension 2")
        if kind in ("paper-step", "step") and self.dimension != 1:
            raise ConfigError(f"'{kind}' initial data needs dimension 1")

    @property
    def time_step(self) -> float:
        return self.dt if self.dt is not None else 0.25 / self.cells

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_pairs(self) -> list[tuple[str, str]]:
        """Ordered ``(key, value)`` pairs, excluding the output directory."""
        out = []
        for f in dataclasses.fields(self):
            if f.name == "output":
                continue
            v = getattr(self, f.name)
            out.append((f.name, "auto" if v is None else (repr(v) if isinstance(v, float) else str(v))))
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_pairs())

    @classmethod
    def from_pairs(cls, pairs, base: "RunConfig | None" = None) -> "RunConfig":
        base = base or cls()
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        changes = {}
        for key, raw in pairs:
            key = key.strip().replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown config key '{key}'")
            changes[key] = _coerce(key, types[key], raw.strip())
        try:
            return dataclasses.replace(base, **changes)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def _coerce(key: str, typ: str, raw: str):
    optional = "None" in str(typ)
    if optional and raw.lower() in ("auto", "none", ""):
        return None
    try:
        if "int" in str(typ):
            return int(raw)
        if "float" in str(typ):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: '{raw}'") from exc
    return raw


def parse_pairs(text: str) -> list[tuple[str, str]]:
    """Parse ``key = value`` lines; ``#`` starts a comment line."""
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{line}'")
        k, _, v = line.partition("=")
        pairs.append((k.strip(), v.strip()))
    return pairs


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    return RunConfig.from_pairs(parse_pairs(text), base)


PRESETS = {
    "paper-1d": dict(dimension=1, initial="paper-step", T=0.35, tau=0.05, s=1.65, i_bar=35, j_bar=0, n_bar=25, cells=100),
    "paper-2d": dict(
        dimension=2,
        initial="double-step",
        T=0.35,
        tau=0.05,
        s=1.65,
        i_bar=35,
        j_bar=25,
        n_bar=25,
        cells=100,
        control_samples=141,
        snapshots=8,
    ),
    "zero": dict(dimension=1, initial="zero", T=0.35, tau=0.05, s=1.65, i_bar=35, j_bar=0, n_bar=25, cells=100),
}


def preset(name: str, **overrides) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}' (choose from {', '.join(PRESETS)})")
    return RunConfig(**{**PRESETS[name], **overrides})
