"""Single-neuron Hodgkin-Huxley dynamics.

Rate functions, forward-Euler gating and membrane updates, and spike
detection.  All functions are pure and accept scalars or numpy arrays;
the simulation engine re-implements the same arithmetic inside a numba
kernel (pinned to these functions by tests).

Internal units are mV and ms throughout.  The depolarization variable
du = u - u_rest feeds the classic rate expressions, with a small epsilon
guarding the removable singularities of alpha_m (du = 25) and
alpha_n (du = 10).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class NeuronParams:
    u_rest: float = -65.0        # mV
    u_thres: float = -35.0       # mV, spike threshold
    u_max: float = 700.0         # mV, hard ceiling
    u_min: float = -100.0        # mV, hard floor
    e_na: float = 50.0           # mV
    e_k: float = -77.0           # mV
    e_l: float = -60.0           # mV
    g_na: float = 120.0
    g_k: float = 50.0
    g_l: float = 0.3
    c_m: float = 0.1
    temperature_c: float = 20.0
    tau_m: float = 0.3
    tau_n: float = 0.32
    tau_h: float = 0.6
    epsilon: float = 1e-6
    min_isi_ms: float = 2.0      # spike-detection refractory guard

    def __post_init__(self):
        if not (self.u_min < self.u_rest < self.u_thres < self.u_max):
            raise ValueError("require u_min < u_rest < u_thres < u_max")
        if min(self.g_na, self.g_k, self.g_l) < 0:
            raise ValueError("conductances must be >= 0")
        if self.c_m <= 0:
            raise ValueError("c_m must be > 0")
        if min(self.tau_m, self.tau_n, self.tau_h) <= 0:
            raise ValueError("tau coefficients must be > 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")

    @property
    def phi(self) -> float:
        """Temperature factor 3^((T - 6.3) / 10)."""
        return 3.0 ** ((self.temperature_c - 6.3) / 10.0)


@dataclass
class GatingState:
    m: float
    h: float
    n: float


@dataclass
class NeuronState:
    u: float
    gates: GatingState
    last_spike_time: Optional[float] = None
    is_above_threshold: bool = False


def rate_constants(u, params: NeuronParams):
    """Voltage-dependent transition rates at membrane voltage u (mV).

    Returns (alpha_m, beta_m, alpha_n, beta_n, alpha_h, beta_h); all are
    finite and non-negative for finite u.
    """
    phi = params.phi
    eps = params.epsilon
    du = u - params.u_rest
    a_m = phi * (eps + 2.5 - 0.1 * du) / (eps + np.exp(2.5 - 0.1 * du) - 1.0)
    a_n = phi * (eps + 0.1 - 0.01 * du) / (eps + np.exp(1.0 - 0.1 * du) - 1.0)
    a_h = 0.07 * phi * np.exp(-du / 20.0)
    b_m = 4.0 * phi * np.exp(-du / 18.0)
    b_n = 0.125 * phi * np.exp(-du / 80.0)
    b_h = phi / (np.exp(3.0 - 0.1 * du) + 1.0)
    return a_m, b_m, a_n, b_n, a_h, b_h


def steady_state_gates(u, params: NeuronParams) -> GatingState:
    """Fixed-point gate values alpha/(alpha+beta) at voltage u."""
    a_m, b_m, a_n, b_n, a_h, b_h = rate_constants(u, params)
    return GatingState(m=a_m / (a_m + b_m), h=a_h / (a_h + b_h), n=a_n / (a_n + b_n))


def _euler_gate(x, alpha, beta, tau, dt):
    x = x + dt * (alpha * (1.0 - x) - beta * x) / tau
    return np.clip(x, 0.0, 1.0)


def gating_step(gates: GatingState, rates, params: NeuronParams, dt: float) -> GatingState:
    """One forward-Euler step of the three gating ODEs, clamped to [0, 1]."""
    a_m, b_m, a_n, b_n, a_h, b_h = rates
    return GatingState(
        m=_euler_gate(gates.m, a_m, b_m, params.tau_m, dt),
        h=_euler_gate(gates.h, a_h, b_h, params.tau_h, dt),
        n=_euler_gate(gates.n, a_n, b_n, params.tau_n, dt),
    )


def membrane_step(state: NeuronState, gates_next: GatingState, i_syn: float,
                  i_ext: float, params: NeuronParams, dt: float) -> NeuronState:
    """One forward-Euler step of the membrane equation.

    Ionic currents use the pre-step voltage and the post-step gates; the
    result is clamped to [u_min, u_max].
    """
    u = state.u
    g = gates_next
    i_na = params.g_na * (u - params.e_na) * g.m * g.m * g.m * g.h
    i_k = params.g_k * (u - params.e_k) * g.n * g.n * g.n * g.n
    i_l = params.g_l * (u - params.e_l)
    u_next = u + dt * (-(i_na + i_k + i_l) + i_syn + i_ext) / params.c_m
    u_next = float(np.clip(u_next, params.u_min, params.u_max))
    return NeuronState(u=u_next, gates=gates_next,
                       last_spike_time=state.last_spike_time,
                       is_above_threshold=state.is_above_threshold)


def detect_spike(state_before: NeuronState, state_after: NeuronState,
                 params: NeuronParams, t: float) -> Optional[float]:
    """Spike detection by upward threshold crossing.

    Reports a spike at time t iff the voltage crossed u_thres from below
    and the minimum inter-spike interval has elapsed.  Updates
    last_spike_time and is_above_threshold on state_after.
    """
    above_before = state_before.is_above_threshold
    above_after = state_after.u >= params.u_thres
    state_after.is_above_threshold = above_after
    state_after.last_spike_time = state_before.last_spike_time
    if above_after and not above_before:
        last = state_before.last_spike_time
        if last is None or t - last >= params.min_isi_ms:
            state_after.last_spike_time = t
            return t
    return None
