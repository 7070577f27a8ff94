from enum import Enum

from pydantic import Field, model_validator

from cchmm.schemas.common import BaseSchema


class Variant(str, Enum):
    full = "full"
    entangle = "entangle"
    no_scm = "no-scm"
    linear_scm = "linear-scm"
    no_prior = "no-prior"
    no_cond = "no-cond"
    no_gcn = "no-gcn"
    no_gru = "no-gru"


VARIANT_FLAGS: tuple[str, ...] = ("entangle", "no_scm", "linear_scm", "no_prior", "no_cond", "no_gcn", "no_gru")


class TrainConfig(BaseSchema):
    epochs: int = Field(default=30, ge=0)
    batch_size: int = Field(default=16, ge=1)
    lr: float = Field(default=1e-3, ge=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps_adam: float = Field(default=1e-8, gt=0.0)
    clip_norm: float = Field(default=5.0, gt=0.0)

    acyclicity_weight: float = Field(default=1.0, ge=0.0)
    alpha: float = Field(default=3.0, gt=0.0)
    latent_dim: int = Field(default=8, ge=1)
    history: int = Field(default=6, ge=1)
    mape_threshold: float = Field(default=1.0, ge=0.0)
    seed: int = 7

    entangle: bool = False
    no_scm: bool = False
    linear_scm: bool = False
    no_prior: bool = False
    no_cond: bool = False
    no_gcn: bool = False
    no_gru: bool = False

    @model_validator(mode="after")
    def check_variant(self) -> "TrainConfig":
        active = [flag for flag in VARIANT_FLAGS if getattr(self, flag)]
        if len(active) > 1:
            raise ValueError(f"variant flags are mutually exclusive, got {', '.join(active)}")
        return self

    @property
    def variant(self) -> Variant:
        for flag in VARIANT_FLAGS:
            if getattr(self, flag):
                return Variant(flag.replace("_", "-"))
        return Variant.full

    def with_variant(self, variant: Variant) -> "TrainConfig":
        flags = {flag: False for flag in VARIANT_FLAGS}
        if variant is not Variant.full:
            flags[variant.value.replace("-", "_")] = True
        return self.model_copy(update=flags)
