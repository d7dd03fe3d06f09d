"""Seed selection: AFL new-branch seeds plus one closest seed per just-missed branch."""

from __future__ import annotations

from dataclasses import dataclass, field

AFL = "afl"
ADAPTIVE = "adaptive"


@dataclass
class SeedPool:
    afl: list = field(default_factory=list)  # seed ids that covered a new branch
    adaptive: dict = field(default_factory=dict)  # just-missed Branch -> (distance, seed id)

    def members(self):
        """Distinct seed ids with provenance, AFL selection taking precedence."""
        out = {}
        for s in self.afl:
            out.setdefault(s, AFL)
        for br in sorted(self.adaptive):
            out.setdefault(self.adaptive[br][1], ADAPTIVE)
        return list(out.items())

    def __len__(self):
        return len(self.members())


def fit_to_survive(seeds, new_branches, reports, just_missed, incumbent=None, adaptive=True):
    """Select the next generation's seeds.

    `seeds` are seed ids in execution order; `new_branches[s]` lists the
    branches seed s covered first; `reports[s]` maps branches to distances.
    For every just-missed branch the seed of strictly smallest distance wins,
    so ties go to the earliest seed. `incumbent` (branch -> (distance, id))
    carries the best seed of earlier generations, so the best distance per
    branch never increases.
    """
    pool = SeedPool()
    pool.afl = [s for s in seeds if new_branches.get(s)]
    if not adaptive:
        return pool
    for br in just_missed:
        best = incumbent.get(br) if incumbent else None
        for s in seeds:
            d = reports.get(s, {}).get(br)
            if d is not None and (best is None or d < best[0]):
                best = (d, s)
        if best is not None:
            pool.adaptive[br] = best
    return pool
