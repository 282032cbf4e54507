"""Exact posterior computation by distributing over positive findings.

Negative findings are folded into per-disease weights up front. Positive
findings are then handled recursively: pick a finding, split its
``1 - prod(c')`` factor into two terms, re-partition the remaining findings
into disease-disjoint components, evaluate each component on its own and
multiply the pieces back together.

Every disease carries a pair of weights ``(w_t, w_f)``. A component
evaluation returns its total weight ``z`` and, for each disease it
covers, the weight ``z_t[i]`` with that disease clamped present. Diseases
outside a component only ever see its ``z`` (the shared prior stack), so all
marginals come out of one pass.

All floating point multiplications and additions are tallied in
:class:`CostCounters`; divisions are counted as multiplications.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields
from typing import Callable, Iterable, Sequence, Union

from bn2o.errors import ZeroEvidence
from bn2o.model import CaseEvidence, Network

ALL = "all"
MEMO_LIMIT = 1 << 18

# (z, {disease: clamped weight})
Block = tuple[float, dict[int, float]]
Chooser = Callable[[Sequence[int], frozenset, Network], int]


@dataclass
class CostCounters:
    multiplications: int = 0
    additions: int = 0
    partition_calls: int = 0
    distributions: int = 0
    savings: int = 0
    reused: int = 0
    terms: int = 0

    def __add__(self, other: "CostCounters") -> "CostCounters":
        return CostCounters(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class WeightTable:
    """Unnormalized measure ``scalar * prod_i w(D_i)`` over disease configurations."""

    wt: list[float]
    wf: list[float]
    scalar: float = 1.0

    @classmethod
    def from_priors(cls, net: Network) -> "WeightTable":
        return cls([d.prior for d in net.diseases], [1.0 - d.prior for d in net.diseases])

    def copy(self) -> "WeightTable":
        return WeightTable(list(self.wt), list(self.wf), self.scalar)


@dataclass(frozen=True)
class Component:
    findings: tuple[int, ...]
    diseases: tuple[int, ...]

    @property
    def disease_set(self) -> frozenset:
        return frozenset(self.diseases)


@dataclass
class EvalResult:
    z: float
    z_t: dict[int, float]
    cost: CostCounters


@dataclass
class Posteriors:
    p_evidence: float
    marginals: list[float]
    cost: CostCounters
    trace: list[tuple[int, tuple[int, ...]]] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)


@dataclass
class SinglePosterior:
    p_evidence: float
    probability: float
    cost: CostCounters


def absorb_negatives(
    net: Network, case: CaseEvidence, w: WeightTable, cost: CostCounters | None = None
) -> WeightTable:
    """Fold negative findings into the weights: ``w_t[i] *= 1 - c`` per parent link."""
    out = w.copy()
    fail, keep = net.fail_links, net.leak_keep
    mults = 0
    for j in case.negatives:
        for i, q in fail[j]:
            out.wt[i] *= q
        mults += len(fail[j])
        if keep[j] != 1.0:
            out.scalar *= keep[j]
            mults += 1
    if cost is not None:
        cost.multiplications += mults
    return out


# ---------------------------------------------------------------------------
# partitioning


def _split(findings: Sequence[int], scope: frozenset, net: Network) -> tuple[list[Component], tuple[int, ...]]:
    parent = {j: j for j in findings}

    def find(j):
        while parent[j] != j:
            parent[j] = parent[parent[j]]
            j = parent[j]
        return j

    first_user: dict[int, int] = {}
    for j in findings:
        for i in net.findings[j].parent_indices:
            if i not in scope:
                continue
            k = first_user.setdefault(i, j)
            if k != j:
                a, b = find(k), find(j)
                if a != b:
                    if b < a:
                        a, b = b, a
                    parent[b] = a
    groups: dict[int, list[int]] = {}
    for j in sorted(findings):
        groups.setdefault(find(j), []).append(j)
    disease_groups: dict[int, list[int]] = {}
    for i, j in first_user.items():
        disease_groups.setdefault(find(j), []).append(i)
    comps = [Component(tuple(fs), tuple(sorted(disease_groups.get(root, ())))) for root, fs in groups.items()]
    comps.sort(key=lambda c: c.findings[0])
    free = tuple(sorted(scope.difference(first_user)))
    return comps, free


def partition(
    findings_remaining: Iterable[int], net: Network, scope: Iterable[int] | None = None
) -> tuple[list[Component], tuple[int, ...]]:
    """Connected components of the bipartite graph of findings and their parents.

    Components come back in ascending order of their smallest finding index;
    ``free`` lists the scoped diseases that no remaining finding references.
    """
    scope_set = frozenset(range(net.n_diseases)) if scope is None else frozenset(scope)
    return _split(tuple(sorted(findings_remaining)), scope_set, net)


def _live_count(j: int, scope: frozenset, net: Network) -> int:
    return sum(1 for i in net.findings[j].parent_indices if i in scope)


def choose_max_parents(findings: Sequence[int], scope: frozenset, net: Network) -> int:
    """Most live parents; ties go to the finding whose removal splits the rest finest.

    "Finest" means the smallest largest remaining component, then the most
    components, then the smallest finding index.
    """
    counts = {j: _live_count(j, scope, net) for j in findings}
    best = max(counts.values())
    tied = [j for j in findings if counts[j] == best]
    if len(tied) == 1:
        return tied[0]

    def split_quality(f):
        comps, _ = _split([j for j in findings if j != f], scope, net)
        largest = max((len(c.findings) for c in comps), default=0)
        return (largest, -len(comps), f)

    return min(tied, key=split_quality)


def choose_max_parents_first(findings: Sequence[int], scope: frozenset, net: Network) -> int:
    """Most live parents, ties to the smallest index."""
    return min(findings, key=lambda j: (-_live_count(j, scope, net), j))


def choose_min_parents(findings: Sequence[int], scope: frozenset, net: Network) -> int:
    return min(findings, key=lambda j: (_live_count(j, scope, net), j))


CHOOSERS: dict[str, Chooser] = {
    "max": choose_max_parents,
    "max-index": choose_max_parents_first,
    "min": choose_min_parents,
}


def choose_finding(comp: Component, net: Network, rule: Union[str, Chooser] = "max") -> int:
    chooser = CHOOSERS[rule] if isinstance(rule, str) else rule
    return chooser(comp.findings, comp.disease_set, net)


def savings_metric(trace: Iterable[tuple[int, Sequence[int]]]) -> int:
    """Total partitioning savings: sum over events of ``|F| - largest part``."""
    total = 0
    for n, sizes in trace:
        sizes = list(sizes)
        if sum(sizes) != n or any(s <= 0 for s in sizes):
            raise ValueError(f"malformed trace entry: {n} findings split as {sizes}")
        total += n - max(sizes, default=0)
    return total


# ---------------------------------------------------------------------------
# recursive evaluation


class _Evaluator:
    def __init__(self, net: Network, w: WeightTable, cost: CostCounters, chooser: Chooser, reuse: bool):
        self.net = net
        self.fail = net.fail_links
        self.keep = net.leak_keep
        self.wt = list(w.wt)
        self.wf = list(w.wf)
        self.scalar = w.scalar
        self.cost = cost
        self.chooser = chooser
        self.memo: dict | None = {} if reuse else None
        self.trace: list[tuple[int, tuple[int, ...]]] = []
        self.partition_seconds = 0.0

    def partition(self, findings: Sequence[int], scope: frozenset):
        t0 = time.perf_counter()
        comps, free = _split(findings, scope, self.net)
        self.partition_seconds += time.perf_counter() - t0
        sizes = tuple(len(c.findings) for c in comps)
        self.cost.partition_calls += 1
        if findings:
            self.cost.savings += len(findings) - max(sizes)
            self.trace.append((len(findings), sizes))
        return comps, free

    def combine(self, blocks: list[Block]) -> Block:
        """Product of independent blocks; clamped weights pick up every other block's z.

        The "everything but block b" product is prefix[b-1] * suffix[b+1], so
        no division is needed and a zero block is harmless.
        """
        n = len(blocks)
        if n == 1:
            return blocks[0]
        cost = self.cost
        zs = [b[0] for b in blocks]
        prefix = [zs[0]]
        for z in zs[1:]:
            prefix.append(prefix[-1] * z)
        cost.multiplications += n - 1
        wanted = [b for b in range(n) if blocks[b][1]]
        if not wanted:
            return prefix[-1], {}
        suffix = [0.0] * n
        suffix[n - 1] = zs[n - 1]
        for b in range(n - 2, wanted[0], -1):
            suffix[b] = zs[b] * suffix[b + 1]
            cost.multiplications += 1
        zt: dict[int, float] = {}
        for b in wanted:
            if b == 0:
                others = suffix[1]
            elif b == n - 1:
                others = prefix[n - 2]
            else:
                others = prefix[b - 1] * suffix[b + 1]
                cost.multiplications += 1
            items = blocks[b][1]
            for i, v in items.items():
                zt[i] = v * others
            cost.multiplications += len(items)
        return prefix[-1], zt

    def free_block(self, i: int, want) -> Block:
        self.cost.additions += 1
        wt = self.wt[i]
        return wt + self.wf[i], ({i: wt} if want == ALL or want == i else {})

    def blocks(self, comps: list[Component], free: Sequence[int], want) -> Block:
        parts = []
        for comp in comps:
            if want is None or want == ALL:
                sub = want
            else:
                sub = want if want in comp.disease_set else None
            parts.append(self.component(comp.findings, comp.diseases, sub))
        parts.extend(self.free_block(i, want) for i in free)
        return self.combine(parts)

    def component(self, findings: tuple[int, ...], diseases: tuple[int, ...], want) -> Block:
        """Evaluate one connected component of positive findings.

        ``want`` is ALL (clamped weights for every disease), a disease index
        (clamped weight for that one only) or None (total weight only).
        """
        wt = self.wt
        key = None
        if self.memo is not None:
            key = (findings, want, tuple(wt[i] for i in diseases))
            hit = self.memo.get(key)
            if hit is not None:
                self.cost.reused += 1
                return hit
        cost = self.cost
        scope = frozenset(diseases)
        f = self.chooser(findings, scope, self.net)
        rest = tuple(j for j in findings if j != f)
        comps, free = self.partition(rest, scope)
        cost.distributions += 1

        links = self.fail[f]
        touched = {i for i, _ in links}
        hit_comps = [c for c in comps if not touched.isdisjoint(c.diseases)]
        other_comps = [c for c in comps if touched.isdisjoint(c.diseases)]
        hit_free = [i for i in free if i in touched]
        other_free = [i for i in free if i not in touched]

        # blocks the chosen finding does not touch are identical in both terms
        shared = self.blocks(other_comps, other_free, want) if other_comps or other_free else None

        za, zta = self.blocks(hit_comps, hit_free, want)
        saved = [(i, wt[i]) for i, _ in links]
        for i, q in links:
            wt[i] *= q
        cost.multiplications += len(links)
        zb, ztb = self.blocks(hit_comps, hit_free, want)
        for i, v in saved:
            wt[i] = v

        k = self.keep[f]
        if k != 1.0:
            zb *= k
            ztb = {i: v * k for i, v in ztb.items()}
            cost.multiplications += 1 + len(ztb)
        diff = (za - zb, {i: v - ztb[i] for i, v in zta.items()})
        cost.additions += 1 + len(zta)

        result = diff if shared is None else self.combine([diff, shared])
        if key is not None and len(self.memo) < MEMO_LIMIT:
            self.memo[key] = result
        return result


def _chooser(rule: Union[str, Chooser]) -> Chooser:
    return CHOOSERS[rule] if isinstance(rule, str) else rule


def evaluate(
    findings_remaining: Iterable[int],
    w: WeightTable,
    scope: Iterable[int],
    net: Network,
    *,
    choose: Union[str, Chooser] = "max",
    reuse: bool = True,
) -> EvalResult:
    """Total weight and per-disease clamped weights over ``scope``.

    ``z = scalar * sum over configurations of the weighted product of the
    positive-finding factors``; ``z_t[i]`` is the same sum restricted to
    configurations with disease ``i`` present.
    """
    cost = CostCounters()
    ev = _Evaluator(net, w, cost, _chooser(choose), reuse)
    scope_set = frozenset(scope)
    comps, free = ev.partition(tuple(sorted(findings_remaining)), scope_set)
    parts = [ev.component(c.findings, c.diseases, ALL) for c in comps]
    parts.extend(ev.free_block(i, ALL) for i in free)
    if not parts:
        return EvalResult(w.scalar, {}, cost)
    z, zt = ev.combine(parts)
    if w.scalar != 1.0:
        z *= w.scalar
        zt = {i: v * w.scalar for i, v in zt.items()}
        cost.multiplications += 1 + len(zt)
    return EvalResult(z, dict(sorted(zt.items())), cost)


def _clamp(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def _run(net: Network, case: CaseEvidence, target, choose, reuse):
    timings = {}
    t0 = time.perf_counter()
    cost = CostCounters()
    w = absorb_negatives(net, case, WeightTable.from_priors(net), cost)
    t1 = time.perf_counter()
    timings["absorption"] = t1 - t0

    ev = _Evaluator(net, w, cost, _chooser(choose), reuse)
    comps, free = ev.partition(case.positives, frozenset(range(net.n_diseases))) if case.positives else ([], tuple(range(net.n_diseases)))
    results = []
    for c in comps:
        want = ALL if target is None else (target if target in c.disease_set else None)
        results.append((c, ev.component(c.findings, c.diseases, want)))
    free_sums = {}
    for i in free:
        free_sums[i] = ev.wt[i] + ev.wf[i]
    cost.additions += len(free)

    z_parts = [z for _, (z, _) in results] + [free_sums[i] for i in free]
    z = z_parts[0] if z_parts else 1.0
    for part in z_parts[1:]:
        z *= part
    cost.multiplications += max(len(z_parts) - 1, 0)
    if w.scalar != 1.0:
        z *= w.scalar
        cost.multiplications += 1
    timings["partitioning"] = ev.partition_seconds
    timings["evaluation"] = time.perf_counter() - t1 - ev.partition_seconds
    if not z > 0.0 or any(not zc > 0.0 for _, (zc, _) in results):
        raise ZeroEvidence("evidence has probability zero under this network")
    return ev, z, results, free, free_sums, timings


def posteriors(
    net: Network,
    case: CaseEvidence,
    *,
    choose: Union[str, Chooser] = "max",
    reuse: bool = True,
) -> Posteriors:
    """P(evidence) and the posterior of every disease.

    A disease's posterior only depends on its own component, so each
    component is normalized by its own ``z``; diseases no positive finding
    touches get ``w_t / (w_t + w_f)``.
    """
    ev, z, results, free, free_sums, timings = _run(net, case, None, choose, reuse)
    cost = ev.cost
    marginals = [0.0] * net.n_diseases
    for _, (zc, zt) in results:
        for i, v in zt.items():
            marginals[i] = _clamp(v / zc)
        cost.multiplications += len(zt)
    for i in free:
        marginals[i] = _clamp(ev.wt[i] / free_sums[i])
    cost.multiplications += len(free)
    return Posteriors(z, marginals, cost, ev.trace, timings)


def posterior_single(
    net: Network,
    case: CaseEvidence,
    target: int,
    *,
    choose: Union[str, Chooser] = "max",
    reuse: bool = True,
) -> SinglePosterior:
    """Posterior of one disease, tracking no other clamped weights."""
    if not 0 <= target < net.n_diseases:
        raise IndexError(f"no disease with index {target}")
    ev, z, results, free, free_sums, _ = _run(net, case, target, choose, reuse)
    cost = ev.cost
    prob = None
    for _, (zc, zt) in results:
        if target in zt:
            prob = _clamp(zt[target] / zc)
            cost.multiplications += 1
    if prob is None:
        prob = _clamp(ev.wt[target] / free_sums[target])
        cost.multiplications += 1
    return SinglePosterior(z, prob, cost)
