from sentiscope.models.api import (
    ModelSpec,
    TrainedModel,
    fit,
    load_model,
    predict,
    save_model,
)
from sentiscope.models.kernels import active_backend

__all__ = [
    "ModelSpec",
    "TrainedModel",
    "fit",
    "predict",
    "save_model",
    "load_model",
    "active_backend",
]
