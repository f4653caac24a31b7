"""
Run configuration read from JSON. Unknown keys are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from typing_extensions import Self

from .core_model import InteractionSpec, LatticeSpec
from .errors import ConfigError
from .levy_functional import SearchOptions
from .symmetry_basis import SectorLabel, check_sector_values


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(Section):
    lattice: LatticeSpec
    interaction: InteractionSpec = Field(default_factory=InteractionSpec)
    particles: int = Field(ge=1)


class SectorSection(Section):
    K: tuple[int, ...]
    Mz: Optional[float] = None
    S: Optional[float] = None
    parity: Optional[Literal[-1, 1]] = None

    @model_validator(mode="after")
    def check_values(self):
        check_sector_values(self.Mz, self.S, self.parity)
        return self

    def label(self) -> SectorLabel:
        return SectorLabel(K=self.K, Mz=self.Mz, S=self.S, parity=self.parity)


class GridAxis(Section):
    start: float
    stop: float
    num: int = Field(ge=1)


class FunctionalSection(Section):
    grid: list[GridAxis] = Field(default_factory=list)
    points: list[list[float]] = Field(default_factory=list)
    facet: Optional[int] = None
    ray: bool = False
    ensemble: bool = False
    force: bool = False
    step: Optional[float] = Field(default=None, gt=0)


class SquareSection(Section):
    u: list[float] = Field(default_factory=lambda: [4.0])
    n2_points: int = Field(default=99, ge=1)
    figure: Optional[Literal[1, 2]] = None
    u_max: float = Field(default=100.0, gt=0)
    u_points: int = Field(default=40, ge=2)


class OutputSection(Section):
    csv: Optional[Path] = None


class Tolerances(Section):
    constraint: float = Field(default=1e-10, gt=0)
    value: float = Field(default=1e-6, gt=0)
    step_scale: float = Field(default=1e-5, gt=0)


class RunConfig(Section):
    model: Optional[ModelSection] = None
    sector: Optional[SectorSection] = None
    chart_order: Optional[list[int]] = None
    functional: FunctionalSection = Field(default_factory=FunctionalSection)
    square: SquareSection = Field(default_factory=SquareSection)
    output: OutputSection = Field(default_factory=OutputSection)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    restarts: int = Field(default=16, ge=1)

    @classmethod
    def from_path(cls, path: Path) -> Self:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"Cannot read config {path}: {e.strerror}")
        return cls.from_json(text)

    @classmethod
    def from_json(cls, text: str) -> Self:
        try:
            return cls.model_validate_json(text)
        except ValidationError as e:
            error = e.errors()[0]
            pointer = "/" + "/".join(str(part) for part in error["loc"])
            raise ConfigError(f"Invalid config at {pointer}: {error['msg']}", pointer)

    def to_path(self, path: Path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as f:
            f.write(self.model_dump_json(indent=2, by_alias=True, exclude_none=True))

    def require_model(self) -> ModelSection:
        if self.model is None:
            raise ConfigError("This command needs a model section", "/model")
        return self.model

    def search_options(self) -> SearchOptions:
        return SearchOptions(
            restarts=self.restarts,
            seed=self.seed,
            constraint_tolerance=self.tolerances.constraint,
            value_tolerance=self.tolerances.value,
        )

    @classmethod
    def schema_json(cls) -> str:
        return json.dumps(cls.model_json_schema(by_alias=True), indent=2)
