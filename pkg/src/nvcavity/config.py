"""Run configuration documents (JSON or YAML) for the command-line tool."""
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticError, field_validator, model_validator

from .errors import ConfigurationError

CONFIG_ENV = "NVCAVITY_CONFIG"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _existing(v):
    if v is None:
        return v
    p = Path(v)
    if not p.exists():
        raise ValueError(f"file not found: {v}")
    return p


class SweepSpec(_Strict):
    n_min: float = Field(1.0, ge=0)
    n_max: float = Field(1e5, gt=0)
    points: int = Field(101, ge=1)
    n_values: Optional[List[float]] = None
    include_zero: bool = False

    @model_validator(mode="after")
    def _order(self):
        if self.n_values is None and self.n_min <= 0:
            raise ValueError("log-spaced grids need n_min > 0 (use n_values for N = 0)")
        if self.n_values is None and self.n_max < self.n_min:
            raise ValueError("n_max must be >= n_min")
        if self.n_values is not None and any(v < 0 for v in self.n_values):
            raise ValueError("n_values must be >= 0")
        return self

    def grid(self):
        import numpy as np

        if self.n_values is not None:
            g = np.asarray(self.n_values, dtype=float)
        else:
            g = np.logspace(np.log10(self.n_min), np.log10(self.n_max), self.points)
        if self.include_zero:
            g = np.concatenate([[0.0], g])
        return g


class ModulationSpec(_Strict):
    n_high: float = Field(1e6, ge=0)
    extinction_db: float = Field(25.0, ge=0)
    duty: float = Field(0.5, gt=0, lt=1)
    f_eom_Hz: List[float] = Field(default_factory=lambda: [1e5, 5e5, 1e6])
    periods: int = Field(3, ge=1)
    samples_per_period: int = Field(400, ge=8)

    @field_validator("f_eom_Hz")
    @classmethod
    def _positive(cls, v):
        if not v or any(f <= 0 for f in v):
            raise ValueError("modulation frequencies must be positive")
        return v


class FitSpec(_Strict):
    datasets: List[Path] = Field(default_factory=list)
    free: Optional[List[str]] = None
    loss: str = "linear"
    restarts: int = Field(0, ge=0)
    spread_decades: float = Field(1.0, gt=0)
    max_iter: int = Field(500, ge=1)
    background_fraction: float = Field(0.0, ge=0, lt=1)

    @field_validator("datasets")
    @classmethod
    def _exist(cls, v):
        return [_existing(p) for p in v]

    @field_validator("loss")
    @classmethod
    def _loss(cls, v):
        if v not in ("linear", "log"):
            raise ValueError("loss must be 'linear' or 'log'")
        return v


class SynthSpec(_Strict):
    green_powers_mW: List[float] = Field(default_factory=lambda: [0.4, 1.3, 4.6])
    noise: float = Field(0.0, ge=0)
    channels: List[str] = Field(default_factory=lambda: ["NV-", "NV0"])


class RunConfig(_Strict):
    coefficients: Optional[Path] = None
    mode: Optional[Path] = None
    ledger: Optional[Path] = None
    grid: Optional[Path] = None
    ir_label: str = "966nm"
    green_power_mW: float = Field(4.6, ge=0)
    sweep: SweepSpec = Field(default_factory=SweepSpec)
    modulation: ModulationSpec = Field(default_factory=ModulationSpec)
    fit: FitSpec = Field(default_factory=FitSpec)
    synth: SynthSpec = Field(default_factory=SynthSpec)
    output: Optional[Path] = None
    seed: int = 0

    @field_validator("coefficients", "mode", "ledger", "grid")
    @classmethod
    def _exist(cls, v):
        return _existing(v)


def load_config(path=None) -> tuple:
    """Return ``(RunConfig, source_path)``; falls back to $NVCAVITY_CONFIG."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig(), None
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    text = path.read_text()
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            import yaml

            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text)
    except Exception as exc:  # parser errors differ by format
        raise ConfigurationError(f"{path}: cannot parse config ({exc})") from None
    # relative paths inside the document resolve against its directory
    base = path.parent
    for key in ("coefficients", "mode", "ledger", "grid"):
        if isinstance(data.get(key), str) and not Path(data[key]).is_absolute():
            data[key] = str(base / data[key])
    fit = data.get("fit")
    if isinstance(fit, dict) and isinstance(fit.get("datasets"), list):
        fit["datasets"] = [p if Path(p).is_absolute() else str(base / p) for p in fit["datasets"]]
    try:
        return RunConfig.model_validate(data), path
    except PydanticError as exc:
        raise ConfigurationError(f"{path}: invalid config\n{exc}") from None
