import json
import os
from dataclasses import asdict, dataclass, field, fields, replace

from sceneparse.features import FeatureRegistry
from sceneparse.segmentation import SegmentParams


@dataclass(frozen=True)
class Config:
    """Every knob that influences training and parsing.

    A copy is stored in each model bundle, so parsing depends on nothing
    but the bundle and the per-call overrides.
    """

    segmentation: SegmentParams = field(default_factory=SegmentParams)
    features: FeatureRegistry = field(default_factory=FeatureRegistry)
    k_m: int = 1000
    tau: float = 0.3
    k_max: int = 50
    likelihood_eps: float = 1.0
    fallback_k: int = 20
    lam: float = 16.0
    prob_floor: float = 1e-6
    cooccurrence_eps: float = 1.0
    max_sweeps: int = 10
    loo_max_images: int = None
    loo_seed: int = 0
    shuffle_queries: bool = False
    shuffle_seed: int = 0
    scene_separator: str = "_"

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["segmentation"] = asdict(self.segmentation)
        d["features"] = self.features.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "segmentation" in d:
            d["segmentation"] = SegmentParams(**d["segmentation"])
        if "features" in d:
            d["features"] = FeatureRegistry.from_dict(d["features"])
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes):
        return replace(self, **changes)


def worker_count():
    """Worker cap from ``SCENEPARSE_THREADS``, else the CPU count."""
    env = os.environ.get("SCENEPARSE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1
