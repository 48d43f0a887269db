import json
import logging
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigError

logger = logging.getLogger(__name__)


class Config(BaseModel):
    """Pipeline parameters. Key names are the on-disk JSON names."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    square_count: int = Field(50, ge=2)
    square_size_factor: float = Field(0.2, gt=0.0, le=1.0)
    alpha: float = Field(0.7, ge=0.0, le=1.0)
    window: int = Field(20, ge=3)
    d_norm: float = Field(3.0, gt=0.0)
    h: float = Field(20.0, gt=0.0)
    K: int = Field(7, ge=1)
    score_variant: Literal["corrected", "paper-literal"] = "corrected"
    # eq4: alpha*g + (1-alpha)*e; eq5-literal: g + e with weight 1 each
    alpha_weighting: Literal["eq4", "eq5-literal"] = "eq4"
    distance_mode: Literal["vertical", "exact"] = "vertical"
    normalizer: Optional[float] = Field(None, gt=0.0)

    def with_overrides(self, **overrides):
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if not overrides:
            return self
        try:
            return Config.model_validate({**self.model_dump(), **overrides})
        except ValidationError as e:
            raise ConfigError(_summarize(e)) from e

    def provenance(self):
        return self.model_dump(mode="json")


def _summarize(err):
    parts = []
    for item in err.errors():
        loc = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{loc}: {item['msg']}")
    return "; ".join(parts)


def load_config(path):
    try:
        raw = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        return Config.model_validate(json.loads(raw))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"{path}: {_summarize(e)}") from e


def resolve_config(path=None, overrides=None):
    """File values first, CLI overrides on top."""
    base = load_config(path) if path else Config()
    cfg = base.with_overrides(**(overrides or {}))
    logger.info("resolved config: %s", json.dumps(cfg.provenance(), sort_keys=True))
    return cfg
