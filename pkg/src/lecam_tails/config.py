"""Run configuration: JSON document, dot-path overrides, resolution to domain objects."""

from __future__ import annotations

import copy
import json
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from .densities import ClassParams
from .estimators import EstimatorSpec, default_k_exponent
from .experiments import AccuracySequence, ExperimentConfig
from .sampling import SeedSpec


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ParamsSection(_Section):
    alpha0: float = 1.0
    C0: float = 1.0
    epsilon: float = 0.25
    rho: float = 1.0
    A: float = 2.0


class ScheduleSection(_Section):
    n: int = 1000
    lam: float = Field(1.0, alias="lambda")
    nu: float = 1.0 / 3.0


class EstimatorSection(_Section):
    kind: Literal["hill", "truncated_mle"] = "hill"
    k_fraction_exponent: Optional[float] = None
    k: Optional[int] = None
    threshold_quantile: Optional[float] = None
    threshold: Optional[float] = None


class AccuracySection(_Section):
    c: float = 1.0
    nu_prime: float = 1.0 / 3.0


class ExperimentSection(_Section):
    replications: int = 2000
    joint_threshold: float = 0.05
    common_random_numbers: bool = True


class SeedSection(_Section):
    base_seed: int = 20150805
    stream_id: int = 0


class Chi2Section(_Section):
    # a list switches the chi2 command to an order scan
    n_grid: Optional[List[int]] = None


class ScanSection(_Section):
    kind: Literal["order", "membership", "separation"] = "order"
    n_grid: List[int] = Field(default_factory=lambda: [100, 1000, 10000, 100000, 1000000])


class SampleSection(_Section):
    density: Literal["f0", "f1"] = "f1"
    size: int = 1000


class EstimateSection(_Section):
    input: Optional[str] = None


class RunConfig(_Section):
    params: ParamsSection = Field(default_factory=ParamsSection)
    schedule: ScheduleSection = Field(default_factory=ScheduleSection)
    estimator: EstimatorSection = Field(default_factory=EstimatorSection)
    accuracy: AccuracySection = Field(default_factory=AccuracySection)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    seed: SeedSection = Field(default_factory=SeedSection)
    chi2: Chi2Section = Field(default_factory=Chi2Section)
    scan: ScanSection = Field(default_factory=ScanSection)
    sample: SampleSection = Field(default_factory=SampleSection)
    estimate: EstimateSection = Field(default_factory=EstimateSection)

    def resolved(self) -> "RunConfig":
        """Copy with every implicit default written out."""
        out = self.model_copy(deep=True)
        est = out.estimator
        if est.kind == "hill" and est.k is None and est.k_fraction_exponent is None:
            est.k_fraction_exponent = default_k_exponent(out.params.rho)
        return out

    def to_json(self) -> str:
        return json.dumps(self.model_dump(by_alias=True), indent=2, sort_keys=True) + "\n"

    # domain objects

    def class_params(self) -> ClassParams:
        p = self.params
        return ClassParams(p.alpha0, p.C0, p.epsilon, p.rho, p.A)

    def estimator_spec(self) -> EstimatorSpec:
        e = self.resolved().estimator
        return EstimatorSpec(
            kind=e.kind, k_fraction_exponent=e.k_fraction_exponent, k=e.k,
            threshold_quantile=e.threshold_quantile, threshold=e.threshold,
        )

    def seed_spec(self) -> SeedSpec:
        return SeedSpec(self.seed.base_seed, self.seed.stream_id)

    def experiment_config(self) -> ExperimentConfig:
        s, x = self.schedule, self.experiment
        return ExperimentConfig(
            params=self.class_params(), lam=s.lam, nu=s.nu,
            accuracy=AccuracySequence(self.accuracy.c, self.accuracy.nu_prime),
            estimator=self.estimator_spec(), n=s.n, replications=x.replications,
            seed=self.seed_spec(), joint_threshold=x.joint_threshold,
            common_random_numbers=x.common_random_numbers,
        )


class OverrideError(ValueError):
    pass


def parse_override(text: str):
    """``"a.b=value"`` -> ``(["a", "b"], value)``; value parsed as JSON when possible."""
    if "=" not in text:
        raise OverrideError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    path = key.strip().split(".")
    if not all(path):
        raise OverrideError(f"bad override key {key!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def apply_overrides(doc: dict, overrides) -> dict:
    doc = copy.deepcopy(doc)
    for text in overrides:
        path, value = parse_override(text)
        node = doc
        for part in path[:-1]:
            nxt = node.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise OverrideError(f"{'.'.join(path)}: {part!r} is not a section")
            node = nxt
        node[path[-1]] = value
    return doc


def load_config(path: str | None = None, overrides=()) -> RunConfig:
    doc = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise OverrideError("config file must hold a JSON object")
    doc = apply_overrides(doc, overrides)
    return RunConfig.model_validate(doc).resolved()
