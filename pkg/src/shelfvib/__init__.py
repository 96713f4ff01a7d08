"""Shelf weight-change estimation from active plate vibration sensing."""

from .plate import (
    ExcitationSpec,
    ModalIndex,
    PlateModel,
    PointLoad,
    ResonanceError,
    SensorPosition,
    exact_spectrum,
    linearized_spectrum,
    modal_frequency,
    sensor_spectrum,
)
from .simulator import ImpulseTrainSpec, SimulationSetup, VibrationRecord, generate_dataset, synthesize_record
from .dsp import FeatureVector, SampleWindow, band_magnitudes, detect_onsets, extract_features, segment
from .estimator import (
    LocationModel,
    WeightEstimate,
    fit_location_model,
    fit_pca,
    fit_ridge,
    predict_weight,
    weight_change,
)

__version__ = "0.1.0"

__all__ = [
    "ExcitationSpec",
    "FeatureVector",
    "ImpulseTrainSpec",
    "LocationModel",
    "ModalIndex",
    "PlateModel",
    "PointLoad",
    "ResonanceError",
    "SampleWindow",
    "SensorPosition",
    "SimulationSetup",
    "VibrationRecord",
    "WeightEstimate",
    "band_magnitudes",
    "detect_onsets",
    "exact_spectrum",
    "extract_features",
    "fit_location_model",
    "fit_pca",
    "fit_ridge",
    "generate_dataset",
    "linearized_spectrum",
    "modal_frequency",
    "predict_weight",
    "segment",
    "sensor_spectrum",
    "synthesize_record",
    "weight_change",
]
