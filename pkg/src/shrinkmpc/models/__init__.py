from .base import DisturbanceSpec, ModelSignature, OutputMap, PlantModel
from .ftms import (
    FtmsModel,
    FtmsParams,
    default_disturbance_profile,
    ftms_output_map,
    sample_profile,
)
from .linear import LinearPlant

__all__ = [
    "DisturbanceSpec",
    "ModelSignature",
    "OutputMap",
    "PlantModel",
    "FtmsModel",
    "FtmsParams",
    "LinearPlant",
    "default_disturbance_profile",
    "ftms_output_map",
    "sample_profile",
]
