"""Throughput planning: how much chain capacity AI request volumes need.

Given daily active users per platform and a per-capita request rate, derive
each platform's required transactions per second (ceiling of daily requests
over 86,400) and the redundancy a reference chain's peak TPS offers over it.
The reported redundancy bracket is floored to tens, matching how such
headroom figures are usually quoted; the raw ratios are emitted too.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import BadInput

SECONDS_PER_DAY = 86_400


@dataclass(frozen=True)
class PlatformLoad:
    name: str
    daily_users: int
    daily_requests: int
    required_tps: int
    redundancy: float
    redundancy_reported: int

    def to_json_obj(self) -> dict:
        return {
            "name": self.name,
            "dailyUsers": self.daily_users,
            "dailyRequests": self.daily_requests,
            "requiredTps": self.required_tps,
            "redundancy": self.redundancy,
            "redundancyReported": self.redundancy_reported,
        }


@dataclass(frozen=True)
class LoadEstimate:
    per_platform: tuple[PlatformLoad, ...]
    per_capita: int
    reference_tps: int
    total_requests_range: tuple[int, int]
    required_tps_range: tuple[int, int]
    redundancy_range: tuple[float, float]
    redundancy_reported_range: tuple[int, int]

    def to_json_obj(self) -> dict:
        return {
            "perPlatform": [p.to_json_obj() for p in self.per_platform],
            "perCapita": self.per_capita,
            "referenceTps": self.reference_tps,
            "totalRequestsRange": list(self.total_requests_range),
            "requiredTpsRange": list(self.required_tps_range),
            "redundancyRange": list(self.redundancy_range),
            "redundancyReportedRange": list(self.redundancy_reported_range),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2, sort_keys=True)


def load_estimate(platforms: list[tuple[str, int]], per_capita: int,
                  reference_tps: int) -> LoadEstimate:
    """Per-platform demand and the min/max bracket across platforms."""
    if not platforms:
        raise BadInput("at least one platform is required")
    if per_capita <= 0 or reference_tps <= 0:
        raise BadInput("per-capita rate and reference TPS must be positive")
    rows = []
    for name, users in platforms:
        if users <= 0:
            raise BadInput(f"daily users for {name!r} must be positive")
        requests = users * per_capita
        tps = math.ceil(requests / SECONDS_PER_DAY)
        redundancy = reference_tps / tps
        rows.append(PlatformLoad(
            name=name,
            daily_users=users,
            daily_requests=requests,
            required_tps=tps,
            redundancy=redundancy,
            redundancy_reported=int(redundancy // 10) * 10,
        ))
    return LoadEstimate(
        per_platform=tuple(rows),
        per_capita=per_capita,
        reference_tps=reference_tps,
        total_requests_range=(min(r.daily_requests for r in rows),
                              max(r.daily_requests for r in rows)),
        required_tps_range=(min(r.required_tps for r in rows),
                            max(r.required_tps for r in rows)),
        redundancy_range=(min(r.redundancy for r in rows),
                          max(r.redundancy for r in rows)),
        redundancy_reported_range=(min(r.redundancy_reported for r in rows),
                                   max(r.redundancy_reported for r in rows)),
    )
