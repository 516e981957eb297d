"""Run configuration: one strict JSON document per run."""
from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, model_validator


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class StretchConfig(_Strict):
    band_width: PositiveFloat
    strength: float = Field(ge=0)


class SurfaceConfig(_Strict):
    kind: Literal["rectangle", "cylinder", "flat_torus", "disk"] = "rectangle"
    resolution: int = Field(32, ge=4, le=1024)
    dimensions: List[PositiveFloat] = [1.0, 1.0]
    stretch: Optional[StretchConfig] = None

    @model_validator(mode="after")
    def _dims(self):
        need = 1 if self.kind == "disk" else 2
        if len(self.dimensions) != need:
            raise ValueError(f"surface kind {self.kind!r} needs {need} dimension(s)")
        return self


class OperatorConfig(_Strict):
    kind: Literal["laplacian", "shifted_laplacian", "custom", "cmc_cylinder_stability"] = "laplacian"
    c0: Optional[float] = None
    radius: Optional[PositiveFloat] = None
    a: Optional[List[List[float]]] = None
    c: Optional[float] = None
    constraint: Literal["dirichlet", "volume_constrained"] = "dirichlet"

    @model_validator(mode="after")
    def _fields(self):
        if self.kind == "shifted_laplacian" and self.c0 is None:
            raise ValueError("shifted_laplacian needs c0")
        if self.kind == "custom" and (self.a is None or self.c is None):
            raise ValueError("custom operator needs a (2x2) and c")
        return self


class BasePointConfig(_Strict):
    """Either a vertex index or parameter coordinates (nearest vertex)."""

    vertex: Optional[int] = Field(None, ge=0)
    point: Optional[List[float]] = None

    @model_validator(mode="after")
    def _one(self):
        if (self.vertex is None) == (self.point is None):
            raise ValueError("give exactly one of vertex or point")
        if self.point is not None and len(self.point) != 2:
            raise ValueError("point needs two coordinates")
        return self


class SweepConfig(_Strict):
    k: int = Field(6, ge=1)
    t_start: Optional[float] = Field(None, ge=0)
    t_end: Optional[PositiveFloat] = None
    base: int = Field(64, ge=1)
    refine_depth: int = Field(8, ge=0, le=30)


class ToleranceConfig(_Strict):
    null_tol: Optional[PositiveFloat] = None
    mono_tol: Optional[PositiveFloat] = None
    eig_tol: PositiveFloat = 1e-12


class TraceConfig(_Strict):
    case: Literal["constant", "linear", "corner"] = "corner"
    L0: PositiveFloat = 1.0
    n: int = Field(1601, ge=3)
    r_resolution: int = Field(65, ge=3)
    delta0: PositiveFloat = 0.1
    halvings: int = Field(4, ge=0)
    f: Literal["zero_trace", "one", "zero"] = "zero_trace"


class RunConfig(_Strict):
    scenario: Literal["sweep", "trace", "mesh_info"] = "sweep"
    surface: SurfaceConfig = SurfaceConfig()
    operator: OperatorConfig = OperatorConfig()
    p0: Optional[BasePointConfig] = None
    perturbation_scale: float = Field(0.01, ge=0)
    sweep: SweepConfig = SweepConfig()
    tolerances: ToleranceConfig = ToleranceConfig()
    trace: TraceConfig = TraceConfig()
    seed: int = Field(0, ge=0)
    threads: int = Field(1, ge=1)
    output: str = "out"

    @model_validator(mode="after")
    def _range(self):
        s = self.sweep
        if s.t_start is not None and s.t_end is not None and not s.t_start < s.t_end:
            raise ValueError("sweep.t_start must be below sweep.t_end")
        return self


DEMOS = {
    "square_index": {
        "scenario": "sweep",
        "surface": {"kind": "rectangle", "resolution": 32, "dimensions": [1.0, 1.0]},
        "operator": {"kind": "shifted_laplacian", "c0": 50.0},
        "p0": {"point": [0.5, 0.5]},
        "sweep": {"k": 6},
        "seed": 0,
    },
    "cylinder_ring": {
        "scenario": "sweep",
        "surface": {"kind": "cylinder", "resolution": 32, "dimensions": [1.0, 1.6]},
        "operator": {"kind": "laplacian"},
        "p0": {"point": [0.5, 0.8]},
        "sweep": {"k": 4, "t_start": 0.02},
        "seed": 0,
    },
    "cmc_cylinder": {
        "scenario": "sweep",
        "surface": {"kind": "cylinder", "resolution": 32, "dimensions": [1.0, 1.6]},
        "operator": {"kind": "cmc_cylinder_stability", "radius": 0.15915494309189535},
        "p0": {"point": [0.5, 0.8]},
        "sweep": {"k": 6, "t_start": 0.02},
        "seed": 0,
    },
}


def demo_config(name, output="out"):
    if name not in DEMOS:
        raise KeyError(name)
    return RunConfig.model_validate({**DEMOS[name], "output": output})
