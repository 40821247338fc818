"""Stochastic synapse model.

Vesicle release (action-potential-triggered and spontaneous), exponential
vesicle-pool decay, receptor-scaled currents, and the voltage-dependent
attenuation of inhibitory currents on hyperpolarized targets.

These are the reference (per-synapse, scalar) operations; the engine runs
the same arithmetic vectorized in its numba kernel.  Random draws come from
counter-based streams: each operation takes a draw function so callers
control the stream discipline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class SynapseParams:
    p_ap_release: float = 0.5
    p_spont_ap_release: float = 0.001
    mean_n_ap: float = 10.0        # calibration knob
    var_n_ap: float = 2.0
    mean_n_not_ap: float = 1.0     # calibration knob
    var_n_not_ap: float = 0.25
    decay_rate_per_s: float = 100.0
    du_per_ves: float = 1.0 / 150.0
    g_ampa: float = 1.0            # calibration knob
    g_gaba: float = 1.0            # calibration knob
    i_syn_max: float = 40.0        # per-contribution clamp, also applied per neuron
    thres_inh: float = -70.0       # mV
    atten_coeff_per_mv: float = 0.5
    atten_floor: float = 0.08
    t_lookback_ap_ms: float = 100.0
    t_ves_release_base_ms: float = 50.0
    t_update_ms: float = 1.0

    def __post_init__(self):
        for name in ("p_ap_release", "p_spont_ap_release"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        for name in ("decay_rate_per_s", "du_per_ves", "g_ampa", "g_gaba",
                     "i_syn_max", "t_lookback_ap_ms", "t_ves_release_base_ms",
                     "t_update_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if not 0.0 < self.atten_floor <= 1.0:
            raise ValueError("atten_floor must be in (0, 1]")
        if min(self.var_n_ap, self.var_n_not_ap) < 0:
            raise ValueError("variances must be >= 0")


@dataclass
class SynapseState:
    pre_id: int
    post_id: int
    pre_is_excitatory: bool
    receptors: float
    receptors_initial: float
    pool: float = 0.0
    next_spont_time: float = 0.0

    def __post_init__(self):
        if self.pre_id == self.post_id:
            raise ValueError("self-synapses are not allowed")
        if self.pool < 0:
            raise ValueError("pool must be >= 0")


def _trunc_gauss(mean: float, var: float, z: float) -> float:
    """Gaussian(mean, var) sample from a standard-normal draw, floored at 0."""
    return max(0.0, mean + math.sqrt(var) * z)


def on_ap_arrival(params: SynapseParams, u_draw: float, z_draw: float) -> float:
    """Vesicles released by one delayed presynaptic spike arrival.

    With probability p_ap_release the synapse releases an N_AP draw,
    otherwise nothing.
    """
    if u_draw < params.p_ap_release:
        return _trunc_gauss(params.mean_n_ap, params.var_n_ap, z_draw)
    return 0.0


def on_spontaneous_window(params: SynapseParams, u_draw: float, z_draw: float) -> float:
    """Vesicles released when a spontaneous-release window fires.

    Rarely (p_spont_ap_release) a full N_AP-sized release; otherwise the
    small N_notAP release.
    """
    if u_draw < params.p_spont_ap_release:
        return _trunc_gauss(params.mean_n_ap, params.var_n_ap, z_draw)
    return _trunc_gauss(params.mean_n_not_ap, params.var_n_not_ap, z_draw)


def schedule_next_spontaneous(syn: SynapseState, recent_ap_count: int, now: float,
                              params: SynapseParams) -> SynapseState:
    """Push the next spontaneous window out proportionally to recent presynaptic activity."""
    syn.next_spont_time = now + params.t_ves_release_base_ms * (1.0 + recent_ap_count)
    return syn


def decay_and_accumulate(pool: float, new_vesicles: float, dt_s: float,
                         params: SynapseParams) -> float:
    """Add fresh vesicles, then decay the pool exponentially over dt_s seconds."""
    return (pool + new_vesicles) * math.exp(-params.decay_rate_per_s * dt_s)


def inhibitory_attenuation(u_post: float, params: SynapseParams) -> float:
    """Attenuation factor for inhibitory current onto a target at u_post mV.

    1 at or above thres_inh; exponentially shrinking below it, floored at
    atten_floor (maximum ~12.5-fold reduction at the default floor 0.08).
    """
    if u_post >= params.thres_inh:
        return 1.0
    return max(math.exp(-params.atten_coeff_per_mv * (params.thres_inh - u_post)),
               params.atten_floor)


def synaptic_current(syn: SynapseState, u_post: float, params: SynapseParams) -> float:
    """Instantaneous current contribution of one synapse onto its target.

    Excitatory synapses depolarize (I >= 0), inhibitory ones hyperpolarize
    (I <= 0, attenuated when the target is below thres_inh).  Clamped to
    [-i_syn_max, +i_syn_max].
    """
    base = syn.receptors * syn.pool * params.du_per_ves
    if syn.pre_is_excitatory:
        i = base * params.g_ampa
    else:
        i = -base * params.g_gaba
        if i < 0:
            i *= inhibitory_attenuation(u_post, params)
    return max(-params.i_syn_max, min(params.i_syn_max, i))
