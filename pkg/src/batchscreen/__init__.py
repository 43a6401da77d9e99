"""Batched Bayesian screening of discrete candidate pools."""

from .engine import (
    CampaignConfig,
    CampaignTrace,
    GpSettings,
    PbpSettings,
    run_campaign,
)
from .errors import BatchScreenError, CampaignAborted
from .pool import CandidatePool, load_library

__version__ = "0.1.0"

__all__ = [
    "CampaignConfig",
    "CampaignTrace",
    "CandidatePool",
    "GpSettings",
    "PbpSettings",
    "BatchScreenError",
    "CampaignAborted",
    "load_library",
    "run_campaign",
    "__version__",
]
