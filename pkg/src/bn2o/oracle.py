"""Brute-force enumeration over every disease configuration.

This is the ground truth for the other engines and deliberately shares no
code with them. Configurations are visited in ascending bitmask order (bit
``i`` set means disease ``i`` present) and all sums use ``math.fsum``.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from bn2o.errors import TooManyDiseases
from bn2o.model import CaseEvidence, Network

MAX_DISEASES = 24
_CHUNK_BITS = 14


def joint_probability(net: Network, config: Sequence[bool], case: CaseEvidence) -> float:
    """P(diseases = config, evidence) under the noisy-or semantics."""
    if len(config) != net.n_diseases:
        raise ValueError("configuration must assign every disease")
    p = 1.0
    for d, present in zip(net.diseases, config):
        p *= d.prior if present else 1.0 - d.prior
    for j in case.positives:
        f = net.findings[j]
        off = 1.0 - f.leak
        for i, c in f.parents:
            if config[i]:
                off *= 1.0 - c
        p *= 1.0 - off
    for j in case.negatives:
        f = net.findings[j]
        off = 1.0 - f.leak
        for i, c in f.parents:
            if config[i]:
                off *= 1.0 - c
        p *= off
    return p


def _joint_block(net: Network, case: CaseEvidence, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
    n = net.n_diseases
    masks = np.arange(start, stop, dtype=np.int64)
    config = ((masks[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(bool)
    priors = np.array([d.prior for d in net.diseases])
    p = np.prod(np.where(config, priors, 1.0 - priors), axis=1)
    for j in case.positives + case.negatives:
        f = net.findings[j]
        off = np.full(len(masks), 1.0 - f.leak)
        for i, c in f.parents:
            off = off * np.where(config[:, i], 1.0 - c, 1.0)
        p = p * (1.0 - off if j in case.positives else off)
    return p, config


def enumerate_posteriors(net: Network, case: CaseEvidence) -> tuple[float, list[float]]:
    """Exact ``(P(evidence), [P(D_i present | evidence)])`` by full enumeration."""
    n = net.n_diseases
    if n > MAX_DISEASES:
        raise TooManyDiseases(f"{n} diseases exceeds the enumeration limit of {MAX_DISEASES}")
    total = 1 << n
    step = 1 << _CHUNK_BITS
    z_parts: list[float] = []
    zt_parts: list[list[float]] = [[] for _ in range(n)]
    for start in range(0, total, step):
        p, config = _joint_block(net, case, start, min(start + step, total))
        z_parts.append(math.fsum(p))
        for i in range(n):
            zt_parts[i].append(math.fsum(p[config[:, i]]))
    z = math.fsum(z_parts)
    if z == 0.0:
        return 0.0, [0.0] * n
    return z, [math.fsum(parts) / z for parts in zt_parts]
