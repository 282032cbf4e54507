"""Exact and incremental posterior inference for two-level noisy-or networks."""

from bn2o.errors import (
    BN2OError,
    CapExceeded,
    ParseError,
    TooManyDiseases,
    TooManyPositiveFindings,
    ZeroEvidence,
)
from bn2o.model import (
    CaseEvidence,
    Disease,
    Finding,
    Network,
    parse_case,
    parse_network,
    serialize_case,
    serialize_network,
)
from bn2o.engine import posterior_single, posteriors

__all__ = [
    "BN2OError",
    "CapExceeded",
    "CaseEvidence",
    "Disease",
    "Finding",
    "Network",
    "ParseError",
    "TooManyDiseases",
    "TooManyPositiveFindings",
    "ZeroEvidence",
    "parse_case",
    "parse_network",
    "posterior_single",
    "posteriors",
    "serialize_case",
    "serialize_network",
]
