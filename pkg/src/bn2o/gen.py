"""Seeded network and case generation.

All randomness comes from :class:`random.Random` (Mersenne Twister,
MT19937) seeded with the caller's integer seed, consumed in a fixed order:

* ``random_network``: one ``uniform`` per disease prior, then per finding a
  ``randint`` parent count, a ``sample`` of parents, one ``uniform`` per
  link activation in ascending parent order and, if the leak range is
  non-degenerate, one ``uniform`` for the leak.
* ``sample_case``: one ``random()`` per disease, then one per finding for its
  value, then one per finding for whether it is reported.
"""

from __future__ import annotations

import random

from bn2o.model import CaseEvidence, Disease, Finding, Network

Range = tuple[float, float]


def _check_range(name: str, r: Range, lo: float, hi: float, lo_open: bool, hi_open: bool) -> None:
    a, b = r
    if a > b:
        raise ValueError(f"{name} range is empty: {r}")
    bad_lo = a <= lo if lo_open else a < lo
    bad_hi = b >= hi if hi_open else b > hi
    if bad_lo or bad_hi:
        raise ValueError(f"{name} range {r} outside legal domain")


def random_network(
    n_diseases: int,
    n_findings: int,
    parents_min: int = 1,
    parents_max: int = 4,
    prior_range: Range = (0.05, 0.95),
    c_range: Range = (0.05, 0.95),
    leak_range: Range = (0.0, 0.0),
    seed: int = 0,
) -> Network:
    if n_diseases < 1 or n_findings < 0:
        raise ValueError("need at least one disease and a non-negative finding count")
    if not 1 <= parents_min <= parents_max <= n_diseases:
        raise ValueError(f"infeasible parent counts {parents_min}:{parents_max} for {n_diseases} diseases")
    _check_range("prior", prior_range, 0.0, 1.0, True, True)
    _check_range("activation", c_range, 0.0, 1.0, True, False)
    _check_range("leak", leak_range, 0.0, 1.0, False, True)

    rng = random.Random(seed)
    width = len(str(n_diseases - 1))
    diseases = tuple(Disease(f"d{i:0{width}d}", rng.uniform(*prior_range)) for i in range(n_diseases))
    fwidth = len(str(max(n_findings - 1, 0)))
    findings = []
    for j in range(n_findings):
        k = rng.randint(parents_min, parents_max)
        parents = sorted(rng.sample(range(n_diseases), k))
        links = tuple((i, rng.uniform(*c_range)) for i in parents)
        leak = rng.uniform(*leak_range) if leak_range[1] > 0.0 else 0.0
        findings.append(Finding(f"f{j:0{fwidth}d}", links, leak))
    return Network(diseases, tuple(findings))


def chain_network(m: int, p: float = 0.1, c: float = 0.8) -> Network:
    """``m`` findings over ``m + 1`` diseases; finding j has parents j and j+1."""
    if m < 1:
        raise ValueError("chain needs at least one finding")
    diseases = tuple(Disease(f"D{i + 1}", p) for i in range(m + 1))
    findings = tuple(Finding(f"F{j + 1}", ((j, c), (j + 1, c))) for j in range(m))
    return Network(diseases, findings)


def sample_case(net: Network, seed: int = 0, report_fraction: float = 1.0) -> CaseEvidence:
    """Forward-sample diseases and findings, then report each finding with the given probability."""
    if not 0.0 <= report_fraction <= 1.0:
        raise ValueError("report_fraction must lie in [0, 1]")
    rng = random.Random(seed)
    present = [rng.random() < d.prior for d in net.diseases]
    values = []
    for f in net.findings:
        off = 1.0 - f.leak
        for i, c in f.parents:
            if present[i]:
                off *= 1.0 - c
        values.append(rng.random() >= off)
    pos, neg = [], []
    for j, v in enumerate(values):
        if rng.random() < report_fraction:
            (pos if v else neg).append(j)
    return CaseEvidence(tuple(pos), tuple(neg))
