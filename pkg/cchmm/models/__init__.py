from cchmm.models.concepts import CONCEPTS, MODALITIES, MODALITY_CHANNELS, ConceptSet
from cchmm.models.data import DatasetBundle, NormalizationStats, Window, WindowBatch
from cchmm.models.gaussian import GaussianParams
from cchmm.models.graph import RegionGraph
from cchmm.models.network import CCHMM, ModelSpec, RolloutOutput

__all__ = [
    "CCHMM",
    "CONCEPTS",
    "ConceptSet",
    "DatasetBundle",
    "GaussianParams",
    "MODALITIES",
    "MODALITY_CHANNELS",
    "ModelSpec",
    "NormalizationStats",
    "RegionGraph",
    "RolloutOutput",
    "Window",
    "WindowBatch",
]
