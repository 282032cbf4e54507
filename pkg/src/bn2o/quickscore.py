"""Flat inclusion-exclusion over subsets of positive findings (Quickscore).

``z = sum_S (-1)^|S| prod_{j in S}(1 - leak_j)
        prod_i [w_f[i] + w_t[i] prod_{j in S, i in pa(j)} (1 - c_ji)]``

with the weights already carrying the negative findings. Subsets are
enumerated by ascending bitmask and the signed terms are summed with
``math.fsum``. Diseases that no positive finding touches contribute the same
factor to every term, so they are pulled out once.

The alternating sum is ill-conditioned: when P(evidence) is many orders of
magnitude below the individual terms, rounding in the terms themselves
limits the relative accuracy of the result.
"""

from __future__ import annotations

import math

from bn2o.engine import CostCounters, WeightTable, absorb_negatives
from bn2o.errors import TooManyPositiveFindings, ZeroEvidence
from bn2o.model import CaseEvidence, Network

DEFAULT_CAP = 24


def _setup(net: Network, case: CaseEvidence, cap: int):
    if len(case.positives) > cap:
        raise TooManyPositiveFindings(
            f"{len(case.positives)} positive findings exceeds the quickscore cap of {cap}"
        )
    cost = CostCounters()
    w = absorb_negatives(net, case, WeightTable.from_priors(net), cost)
    involved = sorted({i for j in case.positives for i in net.findings[j].parent_indices})
    local = {i: k for k, i in enumerate(involved)}
    links = [[(local[i], q) for i, q in net.fail_links[j]] for j in case.positives]
    keep = [net.leak_keep[j] for j in case.positives]
    return cost, w, involved, links, keep


def _constant(w: WeightTable, net: Network, involved, cost: CostCounters) -> tuple[float, dict[int, float]]:
    """Scalar times the untouched diseases' factors, and their sums for marginals."""
    touched = set(involved)
    const = w.scalar
    sums = {}
    for i in range(net.n_diseases):
        if i in touched:
            continue
        sums[i] = w.wt[i] + w.wf[i]
        const *= sums[i]
        cost.additions += 1
        cost.multiplications += 1
    return const, sums


def _term(mask: int, links, keep, wt, cost: CostCounters):
    """Sign-and-leak factor and per-disease c' products for one subset."""
    prod = [1.0] * len(wt)
    factor = 1.0
    sign = 1
    j = 0
    while mask:
        if mask & 1:
            sign = -sign
            for k, q in links[j]:
                prod[k] *= q
            cost.multiplications += len(links[j])
            if keep[j] != 1.0:
                factor *= keep[j]
                cost.multiplications += 1
        mask >>= 1
        j += 1
    return sign, factor, prod


def quickscore_evidence(net: Network, case: CaseEvidence, cap: int = DEFAULT_CAP) -> tuple[float, CostCounters]:
    """P(evidence) by inclusion-exclusion; ``2**len(positives)`` signed terms."""
    cost, w, involved, links, keep = _setup(net, case, cap)
    const, _ = _constant(w, net, involved, cost)
    wt = [w.wt[i] for i in involved]
    wf = [w.wf[i] for i in involved]
    terms: list[float] = []
    for mask in range(1 << len(links)):
        cost.terms += 1
        sign, factor, prod = _term(mask, links, keep, wt, cost)
        t = factor
        for k in range(len(wt)):
            t *= wf[k] + wt[k] * prod[k]
        cost.multiplications += 2 * len(wt)
        cost.additions += len(wt) + 1
        terms.append(t if sign > 0 else -t)
    z = math.fsum(terms) * const
    cost.multiplications += 1
    return z, cost


def quickscore_posteriors(
    net: Network, case: CaseEvidence, cap: int = DEFAULT_CAP
) -> tuple[float, list[float], CostCounters]:
    """P(evidence) and every disease posterior from one subset sweep."""
    cost, w, involved, links, keep = _setup(net, case, cap)
    const, sums = _constant(w, net, involved, cost)
    n = len(involved)
    wt = [w.wt[i] for i in involved]
    wf = [w.wf[i] for i in involved]
    z_terms: list[float] = []
    zt_terms: list[list[float]] = [[] for _ in range(n)]
    for mask in range(1 << len(links)):
        cost.terms += 1
        sign, factor, prod = _term(mask, links, keep, wt, cost)
        present = [wt[k] * prod[k] for k in range(n)]
        factors = [wf[k] + present[k] for k in range(n)]
        cost.multiplications += n
        cost.additions += n
        # prefix/suffix products give "all factors except k" without division
        prefix = [factor] * (n + 1)
        for k in range(n):
            prefix[k + 1] = prefix[k] * factors[k]
        suffix = [1.0] * (n + 1)
        for k in range(n - 1, 0, -1):
            suffix[k] = factors[k] * suffix[k + 1]
        cost.multiplications += 2 * n - 1
        z_terms.append(sign * prefix[n])
        for k in range(n):
            zt_terms[k].append(sign * present[k] * prefix[k] * suffix[k + 1])
        cost.multiplications += 2 * n
        cost.additions += n + 1
    z = math.fsum(z_terms)
    zt = [math.fsum(t) for t in zt_terms]
    if not z > 0.0:
        raise ZeroEvidence("evidence has probability zero under this network")
    marginals = [0.0] * net.n_diseases
    for k, i in enumerate(involved):
        marginals[i] = min(1.0, max(0.0, zt[k] / z))
    for i, s in sums.items():
        marginals[i] = w.wt[i] / s
    cost.multiplications += net.n_diseases + 1
    return z * const, marginals, cost
