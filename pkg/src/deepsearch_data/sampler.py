"""Diversity-aware query sampling.

Queries are split by domain, each domain gets an equal quota, and within a
domain candidates are visited from most to fewest interrogative words. A
pass over the remaining pool greedily accepts any candidate whose keywords
do not overlap with keywords already accepted in the same pass; the keyword
set is reset and passes repeat until the quota is met or the pool runs dry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .corpus import AnnotatedQuery


@dataclass(frozen=True)
class SamplePlan:
    target_total: int
    per_domain_quota: int
    domains: tuple[str, ...]

    @classmethod
    def for_dataset(cls, dataset: Sequence[AnnotatedQuery], n: int) -> "SamplePlan":
        if n < 1:
            raise ValueError("n must be a positive integer")
        domains = tuple(dict.fromkeys(q.domain for q in dataset))
        quota = math.ceil(n / len(domains)) if domains else 0
        return cls(n, quota, domains)


@dataclass
class SampleReport:
    plan: SamplePlan
    per_domain_counts: dict[str, int] = field(default_factory=dict)
    per_domain_passes: dict[str, int] = field(default_factory=dict)
    # (domain, pass index) for each item of the untruncated selection
    acceptance: list[tuple[str, int]] = field(default_factory=list)
    truncated: int = 0

    def to_dict(self) -> dict:
        return {
            "target_total": self.plan.target_total,
            "per_domain_quota": self.plan.per_domain_quota,
            "domains": list(self.plan.domains),
            "per_domain_counts": dict(self.per_domain_counts),
            "per_domain_passes": dict(self.per_domain_passes),
            "truncated": self.truncated,
        }


def _select_domain(pool: list[AnnotatedQuery], quota: int) -> tuple[list[AnnotatedQuery], list[int]]:
    # sorted() is stable, so ties keep input order
    pool = sorted(pool, key=lambda q: -q.interrogative_count)
    keywords = [frozenset(q.keywords) for q in pool]
    remaining = list(range(len(pool)))
    chosen: list[int] = []
    passes: list[int] = []
    taken: set[str] = set()
    pass_no = 0
    while len(chosen) < quota and remaining:
        seen: set[str] = set()
        kept = []
        for pos, idx in enumerate(remaining):
            if len(chosen) >= quota:
                kept.extend(remaining[pos:])
                break
            if pool[idx].id in taken:
                continue  # repeated record: already selected, drop from the pool
            if keywords[idx].isdisjoint(seen):
                taken.add(pool[idx].id)
                chosen.append(idx)
                passes.append(pass_no)
                seen |= keywords[idx]
            else:
                kept.append(idx)
        remaining = kept
        pass_no += 1
    return [pool[i] for i in chosen], passes


def sample_with_report(dataset: Sequence[AnnotatedQuery], n: int) -> tuple[list[AnnotatedQuery], SampleReport]:
    """Run the sampler and also return per-domain counts and pass indices."""
    plan = SamplePlan.for_dataset(dataset, n)
    report = SampleReport(plan)
    selected: list[AnnotatedQuery] = []
    for domain in plan.domains:
        picked, passes = _select_domain([q for q in dataset if q.domain == domain], plan.per_domain_quota)
        selected.extend(picked)
        report.acceptance.extend((domain, p) for p in passes)
        report.per_domain_passes[domain] = (max(passes) + 1) if passes else 0
    report.truncated = max(0, len(selected) - n)
    selected = selected[:n]
    for q in selected:
        report.per_domain_counts[q.domain] = report.per_domain_counts.get(q.domain, 0) + 1
    return selected, report


def sample_diverse(dataset: Sequence[AnnotatedQuery], n: int) -> list[AnnotatedQuery]:
    """Select up to ``n`` queries balancing domains and keyword diversity.

    The per-domain quota is ``ceil(n / m)`` for ``m`` domains; the
    domain-major concatenation is then cut to ``n`` items. Unused quota of
    small domains is not redistributed.
    """
    return sample_with_report(dataset, n)[0]
