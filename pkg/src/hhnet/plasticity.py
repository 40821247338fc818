"""Spike-timing-dependent plasticity for receptor counts.

Causal pairs (pre before post) strengthen a synapse, acausal pairs weaken
it, with the same rule for excitatory and inhibitory synapses.  Updates
are damped by a soft-normalization factor that shrinks for strong synapses
and are hard-bounded to (0, 2 * initial receptor count).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .synapse import SynapseState

R_MIN_EPS = 1e-3  # keeps the hard bounds strict


@dataclass(frozen=True)
class StdpParams:
    window_ms: float = 50.0
    tau_ms: float = 4.0
    amplitude: float = 1e7
    enabled_exc: bool = True
    enabled_inh: bool = True
    pairing: str = "nearest"  # or "all"

    def __post_init__(self):
        if self.window_ms <= 0 or self.tau_ms <= 0:
            raise ValueError("window_ms and tau_ms must be > 0")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if self.pairing not in ("nearest", "all"):
            raise ValueError("pairing must be 'nearest' or 'all'")


@dataclass(frozen=True)
class PairEvent:
    delta_t: float  # t_pre - t_post, ms
    causal: bool    # delta_t <= 0


def soft_norm(r: float) -> float:
    """Soft-normalization factor: 1/(R-1) for R > 5, 0.25 otherwise."""
    return 1.0 / (r - 1.0) if r > 5.0 else 0.25


def stdp_delta(syn_type_excitatory: bool, r: float, delta_t: float,
               params: StdpParams) -> float:
    """Receptor-count change for one spike pair with timing delta_t = t_pre - t_post.

    Zero outside the learning window; inside it, a decaying exponential
    kernel with positive sign for causal pairs (delta_t <= 0) and negative
    for acausal, for both synapse types.
    """
    if abs(delta_t) > params.window_ms:
        return 0.0
    enabled = params.enabled_exc if syn_type_excitatory else params.enabled_inh
    if not enabled:
        return 0.0
    sign = 1.0 if delta_t <= 0.0 else -1.0
    return sign * params.amplitude * soft_norm(r) * math.exp(-abs(delta_t) / params.tau_ms)


def apply_plasticity(syn: SynapseState, dr: float) -> SynapseState:
    """Apply a receptor-count change, keeping 0 < R < 2 * R_initial strict."""
    upper = 2.0 * syn.receptors_initial - R_MIN_EPS
    syn.receptors = max(R_MIN_EPS, min(upper, syn.receptors + dr))
    return syn


def collect_pairs(pre_spikes, post_spikes, now: float,
                  params: StdpParams) -> list[PairEvent]:
    """Spike pairing over recent pre/post spike histories.

    Nearest-neighbor mode: each postsynaptic spike pairs with the most
    recent presynaptic spike at or before it within the window (causal
    event); each presynaptic spike pairs with the most recent
    strictly-earlier postsynaptic spike within the window (acausal event).
    Simultaneous spikes count as causal only, so no (pre, post) pair yields
    two events.  All-pairs mode emits one event per in-window (pre, post)
    combination instead.
    """
    events: list[PairEvent] = []
    pre = sorted(pre_spikes)
    post = sorted(post_spikes)
    nearest = params.pairing == "nearest"
    for tp in post:
        causal_pres = [tq for tq in pre if tq <= tp and tp - tq <= params.window_ms]
        if nearest:
            causal_pres = causal_pres[-1:]
        events.extend(PairEvent(delta_t=tq - tp, causal=True) for tq in causal_pres)
    for tq in pre:
        acausal_posts = [tp for tp in post if tp < tq and tq - tp <= params.window_ms]
        if nearest:
            acausal_posts = acausal_posts[-1:]
        events.extend(PairEvent(delta_t=tq - tp, causal=False) for tp in acausal_posts)
    return events
