"""Scenario and report models"""

from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

# Matrix entries are plain numbers or [re, im] pairs
Entry = Union[float, List[float]]
Matrix = List[List[Entry]]
Vector = List[Entry]


class BlockSpec(BaseModel):
    """One block M_n ⊗ 1_m of a multimatrix algebra"""
    model_config = ConfigDict(extra="forbid")

    size: int = Field(ge=1)
    multiplicity: int = Field(default=1, ge=1)


class AlgebraSpec(BaseModel):
    """A multimatrix algebra.

    Blocks are sorted by (size, multiplicity) before use; matrices referring to the
    algebra are laid out in that sorted order.
    """
    model_config = ConfigDict(extra="forbid")

    blocks: List[BlockSpec] = Field(min_length=1)


class ModuleSpec(BaseModel):
    """span of generators and their right translates, inside B(G, C^target_dim)"""
    model_config = ConfigDict(extra="forbid")

    algebra: AlgebraSpec
    target_dim: int = Field(ge=1)
    generators: List[Matrix] = Field(min_length=1)


class CorrespondenceSpec(BaseModel):
    """Explicit generators and left images, a random realization of a multiplicity matrix,
    or the identity correspondence of ``algebra``"""
    model_config = ConfigDict(extra="forbid")

    mode: Literal["explicit", "random", "identity"] = "explicit"
    algebra: AlgebraSpec
    left: Optional[AlgebraSpec] = None
    target_dim: Optional[int] = Field(default=None, ge=1)
    generators: Optional[List[Matrix]] = None
    left_images: Optional[List[Matrix]] = None
    multiplicities: Optional[List[List[int]]] = None
    seed: Optional[int] = None

    @model_validator(mode="after")
    def check_mode(self):
        if self.mode == "explicit":
            missing = [name for name in ("target_dim", "generators", "left_images")
                       if getattr(self, name) is None]
            if missing:
                raise ValueError(f"explicit correspondence needs {', '.join(missing)}")
        if self.mode == "random" and self.multiplicities is None:
            raise ValueError("random correspondence needs multiplicities")
        return self


class CPMapSpec(BaseModel):
    """Kraus operators, images of the source basis, or a seeded random Kraus family"""
    model_config = ConfigDict(extra="forbid")

    source: AlgebraSpec
    target: AlgebraSpec
    kraus: Optional[List[Matrix]] = None
    action: Optional[List[Matrix]] = None
    random_rank: Optional[int] = Field(default=None, ge=1)
    unital: bool = False

    @model_validator(mode="after")
    def check_one_form(self):
        given = [x is not None for x in (self.kraus, self.action, self.random_rank)]
        if sum(given) != 1:
            raise ValueError("give exactly one of kraus, action or random_rank")
        return self


class EndomorphismSpec(BaseModel):
    """identity, Ad U, or the linear extension of domain[j] ↦ images[j] on the target space"""
    model_config = ConfigDict(extra="forbid")

    mode: Literal["identity", "inner", "linear"] = "identity"
    unitary: Optional[Matrix] = None
    domain: Optional[List[Matrix]] = None
    images: Optional[List[Matrix]] = None

    @model_validator(mode="after")
    def check_mode(self):
        if self.mode == "inner" and self.unitary is None:
            raise ValueError("inner endomorphism needs a unitary")
        if self.mode == "linear" and (self.domain is None or self.images is None):
            raise ValueError("linear endomorphism needs domain and images")
        return self


class SpatialDatumSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k: int = Field(ge=1)
    omega: Optional[Vector] = None


class CommutantPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    correspondence: CorrespondenceSpec


class GNSPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cp: CPMapSpec


class TensorPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    first: CorrespondenceSpec
    second: CorrespondenceSpec
    third: Optional[CorrespondenceSpec] = None


class FlipPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    first: CorrespondenceSpec
    second: CorrespondenceSpec


class LemmaPayload(BaseModel):
    """Random representations of B' with the given block multiplicities"""
    model_config = ConfigDict(extra="forbid")

    algebra: AlgebraSpec
    multiplicities: List[int] = Field(min_length=1)
    samples: int = Field(default=1, ge=1, le=500)


class UnitVectorPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    module: ModuleSpec
    expect: Optional[Literal["found", "impossible"]] = None


class EndoPayload(BaseModel):
    """Shared by endo-unit, endo-commutant, duality and dilation"""
    model_config = ConfigDict(extra="forbid")

    module: ModuleSpec
    endomorphism: EndomorphismSpec = Field(default_factory=EndomorphismSpec)
    unit_vector: Optional[Matrix] = None
    steps: int = Field(default=3, ge=1, le=6)
    expect_order: Optional[bool] = None


class UnitSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    xi1: Matrix
    central: bool = True


class ProductSystemSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    generator: CorrespondenceSpec
    units: List[UnitSpec] = Field(min_length=1)


class SpatialProductPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    first: ProductSystemSpec
    second: ProductSystemSpec
    fibers: int = Field(default=2, ge=1, le=4)


class PowersPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    g_dim: int = Field(ge=1)
    factor1: SpatialDatumSpec
    factor2: SpatialDatumSpec
    steps: int = Field(default=0, ge=0, le=3)


PAYLOADS: Dict[str, type] = {
    "commutant": CommutantPayload,
    "gns": GNSPayload,
    "tensor": TensorPayload,
    "flip": FlipPayload,
    "lemma": LemmaPayload,
    "unit-vector": UnitVectorPayload,
    "endo-unit": EndoPayload,
    "endo-commutant": EndoPayload,
    "duality": EndoPayload,
    "dilation": EndoPayload,
    "spatial-product": SpatialProductPayload,
    "powers": PowersPayload,
}

ScenarioKind = Literal[
    "commutant", "gns", "tensor", "flip", "lemma", "unit-vector", "endo-unit",
    "endo-commutant", "duality", "dilation", "spatial-product", "powers",
]


class ToleranceOverride(BaseModel):
    model_config = ConfigDict(extra="forbid")

    abs_eps: Optional[float] = Field(default=None, gt=0, lt=1.0)
    rel_eps: Optional[float] = Field(default=None, ge=0, lt=1.0)


class Scenario(BaseModel):
    """One self-describing scenario file"""
    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1)
    kind: ScenarioKind
    inputs: Dict[str, Any]
    tolerance: Optional[ToleranceOverride] = None
    seed: Optional[int] = None
    description: Optional[str] = None


class Report(BaseModel):
    """Outcome of one scenario"""
    scenario: str
    kind: str
    verdict: Literal["pass", "fail", "refused", "error"]
    seed: int
    tolerance: Dict[str, float]
    version: str
    results: Dict[str, Any] = Field(default_factory=dict)
    message: Optional[str] = None
    duration_s: Optional[float] = None


class SuiteReport(BaseModel):
    directory: str
    verdict: Literal["pass", "fail"]
    total: int
    counts: Dict[str, int]
    reports: List[Report]
    warnings: List[str] = Field(default_factory=list)
    duration_s: Optional[float] = None
