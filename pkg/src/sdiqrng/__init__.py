"""Source-device-independent QRNG: photon-number certification, simulation and extraction."""
from .certifier import CertCertificate, CertThresholds, certify
from .config import ProtocolParams, default_params, load_config, realtime_params
from .extractor import HashPlan, ToeplitzSeed, extract_stream, hash_naive, hash_pipeline, plan
from .photon_core import LogProb, guess_prob, min_entropy_per_sample
from .simulator import RunConfig, SourceModel, empirical_min_entropy, run_protocol

__version__ = "0.1.0"

__all__ = [
    "CertCertificate", "CertThresholds", "certify", "ProtocolParams", "default_params", "load_config",
    "realtime_params", "HashPlan", "ToeplitzSeed", "extract_stream", "hash_naive", "hash_pipeline", "plan",
    "LogProb", "guess_prob", "min_entropy_per_sample", "RunConfig", "SourceModel", "empirical_min_entropy",
    "run_protocol",
]
