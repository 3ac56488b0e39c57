"""
Experiment Configuration
------------------------
Defaults, the ranking-model registry (models.yaml) and the validated
ExperimentConfig shared by every command.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import yaml
from dotenv import dotenv_values
from pydantic import BaseModel, Field, ValidationError, field_validator

from .errors import UsageError

models_file = Path(__file__).parent / "models.yaml"

try:
    with open(models_file, "r") as f:
        MODELS_CONFIG: Dict[str, Dict[str, Any]] = yaml.safe_load(f)
except Exception as e:
    logging.error(f"Failed to load models.yaml: {e}")
    raise RuntimeError(f"Could not load model registry: {e}")

MODEL_NAMES: List[str] = list(MODELS_CONFIG.keys())

DEFAULT_MU = 1000.0
DEFAULT_LAMBDA_ENS = 0.7
DEFAULT_ENSEMBLE_LAMBDAS = (0.5, 0.7)
DEFAULT_DEPTH = 1000
DEFAULT_CSLS_N = 10
DEFAULT_REFINE_ITERS = 1
DEFAULT_RUN_TAG = "xlir"
INDEX_FORMAT_VERSION = 1
BLI_CUTOFFS = (1, 5)
EVAL_CUTOFFS = (5, 10)


class ExperimentConfig(BaseModel):
    """All paths and parameters of one experiment step."""

    # inputs
    source_vectors: Optional[Path] = None
    target_vectors: Optional[Path] = None
    seed_dictionary: Optional[Path] = None
    test_dictionary: Optional[Path] = None
    init_map: Optional[Path] = None
    alignment: Optional[Path] = None
    collection: Optional[Path] = None
    index_dir: Optional[Path] = None
    topics: Optional[Path] = None
    qrels: Optional[Path] = None
    source_stopwords: Optional[Path] = None
    target_stopwords: Optional[Path] = None
    run1: Optional[Path] = None
    run2: Optional[Path] = None
    runs: List[Path] = Field(default_factory=list)

    # outputs
    output: Optional[Path] = None
    aligned_out: Optional[Path] = None
    report: Optional[Path] = None
    output_dir: Optional[Path] = None

    # parameters
    source_lang: str = "src"
    target_lang: str = "tgt"
    model: str = "tbt-qt"
    mu: float = Field(DEFAULT_MU, gt=0)
    lambda_ens: float = Field(DEFAULT_LAMBDA_ENS, ge=0, le=1)
    ensemble_lambdas: List[float] = Field(default_factory=lambda: list(DEFAULT_ENSEMBLE_LAMBDAS))
    depth: int = Field(DEFAULT_DEPTH, ge=1)
    max_vocab: Optional[int] = Field(None, ge=1)
    run_tag: str = DEFAULT_RUN_TAG
    metric: Literal["cosine", "csls"] = "cosine"
    csls_n: int = Field(DEFAULT_CSLS_N, ge=1)
    refine_iters: int = Field(DEFAULT_REFINE_ITERS, ge=0)
    center: bool = False
    jobs: int = Field(1, ge=1)

    @field_validator("model")
    @classmethod
    def _known_model(cls, value: str) -> str:
        if value not in MODEL_NAMES:
            raise ValueError(
                f"unknown model '{value}', valid models: {', '.join(MODEL_NAMES)}"
            )
        return value

    @field_validator("ensemble_lambdas", mode="before")
    @classmethod
    def _split_lambdas(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    @field_validator("ensemble_lambdas")
    @classmethod
    def _lambdas_in_range(cls, value: List[float]) -> List[float]:
        if any(not 0.0 <= lam <= 1.0 for lam in value):
            raise ValueError("ensemble_lambdas must lie in [0, 1]")
        return sorted(set(value))

    @field_validator("runs", mode="before")
    @classmethod
    def _split_runs(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    def require(self, *fields: str) -> None:
        """Raise UsageError naming every listed field that is unset."""
        missing = [name for name in fields if getattr(self, name) in (None, [])]
        if missing:
            flags = ", ".join(f"--{name.replace('_', '-')}" for name in missing)
            raise UsageError(f"missing required option(s): {flags}")


def read_config_file(path: Path) -> Dict[str, Optional[str]]:
    """Parse a key=value config file without touching the environment."""
    if not Path(path).exists():
        raise UsageError(f"config file not found: {path}")
    values = dotenv_values(path)
    unknown = sorted(set(values) - set(ExperimentConfig.model_fields))
    if unknown:
        raise UsageError(f"unknown config key(s) in {path}: {', '.join(unknown)}")
    return {k: v for k, v in values.items() if v is not None}


def build_config(
    config_file: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None
) -> ExperimentConfig:
    """Merge file values with explicit overrides (overrides win) and validate."""
    values: Dict[str, Any] = {}
    if config_file is not None:
        values.update(read_config_file(config_file))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        raise UsageError(f"invalid configuration: {e}") from e
