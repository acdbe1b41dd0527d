"""Closed-form upper bounds on the number of simultaneous beamformers.

For a downlink serving K users while a sensing task depends on d quadratic
terms of the beamformer matrix:

* ``bound_sum(K, d) = floor(K + sqrt(d))`` applies when users cancel the
  interference from sensing beams (mode ``ic``);
* ``bound_hypotenuse(K, d) = floor(sqrt(K^2 + d))`` applies when they cannot
  (mode ``nic``), and collapses to exactly K once ``K >= d/2``;
* estimating L real parameters under the prior-averaged error-bound metric
  corresponds to ``d = L(L+1)/2``;
* sensing-only systems (K = 0) get ``floor(sqrt(d))`` in either mode.

All arithmetic is exact integer arithmetic (``math.isqrt``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .channel import multitarget_d

MetricKind = str  # "fullchannel" | "multitarget" | "aoa" | "snr" | "beampattern"


def bound_sum(k_users: int, d: int) -> int:
    """floor(K + sqrt(d)): interference-cancellation bound for d quadratic terms."""
    _check(k_users, d)
    return k_users + math.isqrt(d)


def bound_hypotenuse(k_users: int, d: int) -> int:
    """floor(sqrt(K^2 + d)): no-interference-cancellation bound."""
    _check(k_users, d)
    return math.isqrt(k_users * k_users + d)


def no_extra_beams_threshold(d: int) -> int:
    """Smallest K at which communication beams alone suffice (K >= d/2)."""
    if d < 1:
        raise ValueError("d must be at least 1")
    return (d + 1) // 2


def bound_bcrb(k_users: int, n_params: int, mode: str = "ic",
               threshold_shortcut: bool = False) -> int:
    """Beamformer bound for estimating ``n_params`` real parameters.

    ``threshold_shortcut`` returns exactly K when ``K >= L(L+1)/4`` in 'nic'
    mode; the hypotenuse floor already equals K there, so the flag is a
    statement of intent rather than a different value.
    """
    if n_params < 1:
        raise ValueError("n_params must be at least 1")
    d = n_params * (n_params + 1) // 2
    if mode == "ic":
        return bound_sum(k_users, d)
    if mode == "nic":
        if threshold_shortcut and k_users >= no_extra_beams_threshold(d):
            return k_users
        return bound_hypotenuse(k_users, d)
    raise ValueError(f"mode must be 'ic' or 'nic', got {mode!r}")


def bound_radar(size: int, kind: MetricKind = "d") -> int:
    """Sensing-only bound floor(sqrt(d)) for the named metric family.

    ``kind`` selects how ``size`` maps to d: 'd' (direct), 'params'
    (d = L(L+1)/2), 'multitarget' (d = 7/2 n^2 + n/2 for n targets),
    'aoa' (d = n targets), 'fullchannel' (d = n_tx^2), 'snr' (d = 1),
    'beampattern' (d = grid size).
    """
    if size < 1:
        raise ValueError("size must be positive")
    d = metric_d(size, kind)
    return math.isqrt(d)


def metric_d(size: int, kind: MetricKind) -> int:
    """Quadratic-term count d for a metric family parameterized by ``size``."""
    if kind == "d":
        return size
    if kind == "params":
        return size * (size + 1) // 2
    if kind == "multitarget":
        return multitarget_d(size)
    if kind == "aoa":
        return size
    if kind == "fullchannel":
        return size * size
    if kind == "snr":
        return 1
    if kind == "beampattern":
        return size
    raise ValueError(f"unknown metric kind {kind!r}")


@dataclass(frozen=True)
class BoundQuery:
    """One bound request: users, metric sizing, mode, optional antenna cap."""

    k_users: int
    mode: str  # "ic" | "nic" | "radar"
    d: Optional[int] = None
    n_params: Optional[int] = None
    n_targets: Optional[int] = None
    metric_kind: Optional[MetricKind] = None
    metric_size: Optional[int] = None
    n_tx: Optional[int] = None

    def resolve_d(self) -> int:
        sizing = [self.d is not None, self.n_params is not None,
                  self.n_targets is not None, self.metric_kind is not None]
        if sum(sizing) != 1:
            raise ValueError("exactly one sizing field must be set")
        if self.d is not None:
            return self.d
        if self.n_params is not None:
            return metric_d(self.n_params, "params")
        if self.n_targets is not None:
            return metric_d(self.n_targets, "multitarget")
        size = self.metric_size if self.metric_size is not None else (self.n_tx or 1)
        return metric_d(size, self.metric_kind)


def bound_for_query(query: BoundQuery) -> int:
    """Evaluate a :class:`BoundQuery`, applying the antenna cap in 'nic' mode."""
    d = query.resolve_d()
    if query.mode == "radar":
        return math.isqrt(d)
    if query.mode == "ic":
        return bound_sum(query.k_users, d)
    if query.mode == "nic":
        value = bound_hypotenuse(query.k_users, d)
        if query.n_tx is not None:
            value = min(value, query.n_tx)
        return value
    raise ValueError(f"unknown mode {query.mode!r}")


def bound_table(k_values, n_target_values) -> str:
    """CSV table of both bounds for the LoS-target metric over (K, n_targets)."""
    lines = ["k,ntr,d,ic_bound,nic_bound"]
    for ntr in n_target_values:
        d = multitarget_d(ntr)
        for k in k_values:
            lines.append(f"{k},{ntr},{d},{bound_sum(k, d)},{bound_hypotenuse(k, d)}")
    return "\n".join(lines) + "\n"


def sum_bound_is_loose_for_snr(k_users: int) -> bool:
    """Informational flag: with a single quadratic term and K >= 1 users, the
    sum bound K + 1 is known to exceed the true minimum by one."""
    return k_users >= 1


def _check(k_users: int, d: int) -> None:
    if k_users < 0:
        raise ValueError("user count must be nonnegative")
    if d < 1:
        raise ValueError("d must be at least 1")
