"""Max-min fair rate allocation by progressive filling.

Flows are elastic: each claims as much rate as fairness allows along every
resource it crosses (a resource is one direction of one link).  All
unfrozen flows are raised together until some resource saturates; flows on
saturated resources freeze at the waterline and the rest keep rising.
Iteration order is fixed by sorted ids so allocations are reproducible to
the bit.
"""

from __future__ import annotations

from typing import Mapping, Sequence


def allocate(flow_resources: Mapping[int, Sequence[int]],
             capacity: Mapping[int, float]) -> dict[int, float]:
    """Max-min fair rates for elastic flows over capacitated resources.

    flow_resources maps flow id -> resource ids the flow crosses (at least
    one).  capacity maps resource id -> capacity > 0.  Returns flow id ->
    rate.  Resources without flows are ignored.
    """
    rates: dict[int, float] = {}
    if not flow_resources:
        return rates
    members: dict[int, list[int]] = {}
    for fid in sorted(flow_resources):
        res = flow_resources[fid]
        if not res:
            raise ValueError(f"flow {fid} crosses no resources")
        for rid in res:
            members.setdefault(rid, []).append(fid)
    residual = {rid: float(capacity[rid]) for rid in members}
    for rid, cap in residual.items():
        if cap <= 0:
            raise ValueError(f"resource {rid} has non-positive capacity")
    unfrozen = {rid: len(fids) for rid, fids in members.items()}
    frozen: set[int] = set()
    level = 0.0
    remaining = len(flow_resources)
    while remaining:
        # next waterline increment: tightest residual share over live resources
        step = None
        for rid in sorted(members):
            n = unfrozen[rid]
            if n == 0:
                continue
            share = residual[rid] / n
            if step is None or share < step:
                step = share
        level += step
        newly: list[int] = []
        for rid in sorted(members):
            n = unfrozen[rid]
            if n == 0:
                continue
            residual[rid] -= step * n
            if residual[rid] <= step * 1e-12 + 1e-15:
                residual[rid] = 0.0
                for fid in members[rid]:
                    if fid not in frozen:
                        newly.append(fid)
        for fid in newly:
            if fid in frozen:
                continue
            frozen.add(fid)
            rates[fid] = level
            remaining -= 1
            for rid in flow_resources[fid]:
                unfrozen[rid] -= 1
    return rates
