"""Probabilistic network construction.

Neuron type labels (inhibitory ids first, then excitatory), Bernoulli
connectivity over ordered neuron pairs, type-matched Gaussian receptor
initialization, per-neuron axonal delays, and the transient stimulus
protocol.  Everything is drawn from counter-based streams, so a
(config, seed) pair maps to exactly one network, bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng


@dataclass(frozen=True)
class NetworkConfig:
    n_neurons: int = 200
    n_inhibitory: int = 40
    connection_prob: float = 0.8
    ampa_init_mean: float = 120.0
    ampa_init_var: float = 12.0
    gaba_init_mean: float = 200.0
    gaba_init_var: float = 6.0
    receptor_spread_is_std: bool = False  # interpret *_var as std instead of variance
    delay_min_ms: float = 0.5
    delay_max_ms: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.n_inhibitory < self.n_neurons:
            raise ValueError("require 0 < n_inhibitory < n_neurons")
        if not 0.0 <= self.connection_prob <= 1.0:
            raise ValueError("connection_prob must be in [0, 1]")
        if min(self.ampa_init_mean, self.gaba_init_mean) <= 0:
            raise ValueError("receptor init means must be > 0")
        if not 0 <= self.delay_min_ms <= self.delay_max_ms:
            raise ValueError("require 0 <= delay_min_ms <= delay_max_ms")


@dataclass
class Topology:
    """Directed synapse list in struct-of-arrays form, sorted by (pre, post)."""
    n_neurons: int
    n_inhibitory: int
    pre: np.ndarray            # int64, presynaptic neuron per synapse
    post: np.ndarray           # int64
    pre_is_excitatory: np.ndarray  # bool per synapse
    receptors: np.ndarray      # float64, current receptor count
    receptors_initial: np.ndarray  # float64, hard-bound anchor
    delays_ms: np.ndarray      # float64 per neuron (axonal delay)

    @property
    def n_synapses(self) -> int:
        return len(self.pre)

    def neuron_is_excitatory(self, i: int) -> bool:
        return i >= self.n_inhibitory

    @property
    def excitatory_ids(self) -> np.ndarray:
        return np.arange(self.n_inhibitory, self.n_neurons)


@dataclass
class StimulusProtocol:
    targets: np.ndarray        # int64 neuron ids
    amplitude: float           # injected current per target
    duration_ms: float
    start_times_ms: np.ndarray  # per-target onset


def build_topology(config: NetworkConfig, seed: int | None = None) -> Topology:
    """Draw a network realization from the configuration.

    Every ordered pair (i, j), i != j, becomes a synapse with probability
    connection_prob.  Receptor counts come from the type-matched Gaussian
    (floored at 1); receptors_initial records the drawn value.
    """
    seed = config.seed if seed is None else seed
    n = config.n_neurons
    i_idx, j_idx = np.divmod(np.arange(n * n, dtype=np.int64), n)
    valid = i_idx != j_idx
    pair_ids = i_idx * n + j_idx
    connected = valid & (rng.uniform_np(seed, rng.KIND_CONNECTIVITY, pair_ids, 0)
                         < config.connection_prob)
    pre = i_idx[connected]
    post = j_idx[connected]
    pre_exc = pre >= config.n_inhibitory

    z = rng.normal_np(seed, rng.KIND_RECEPTOR_INIT, pair_ids[connected], 0)
    if config.receptor_spread_is_std:
        sd_a, sd_g = config.ampa_init_var, config.gaba_init_var
    else:
        sd_a, sd_g = np.sqrt(config.ampa_init_var), np.sqrt(config.gaba_init_var)
    mean = np.where(pre_exc, config.ampa_init_mean, config.gaba_init_mean)
    sd = np.where(pre_exc, sd_a, sd_g)
    receptors = np.maximum(mean + sd * z, 1.0)

    delays = config.delay_min_ms + (config.delay_max_ms - config.delay_min_ms) * \
        rng.uniform_np(seed, rng.KIND_DELAY, np.arange(n), 0)

    return Topology(
        n_neurons=n,
        n_inhibitory=config.n_inhibitory,
        pre=pre.astype(np.int64),
        post=post.astype(np.int64),
        pre_is_excitatory=pre_exc,
        receptors=receptors.astype(np.float64),
        receptors_initial=receptors.copy().astype(np.float64),
        delays_ms=delays.astype(np.float64),
    )


@dataclass(frozen=True)
class StimulusConfig:
    n_targets: int = 30
    amplitude: float = 80.0     # injected current per target
    duration_ms: float = 200.0
    onset_min_ms: float = 300.0
    onset_max_ms: float = 500.0

    def __post_init__(self):
        if self.n_targets < 0:
            raise ValueError("n_targets must be >= 0")
        if self.duration_ms < 0 or self.amplitude < 0:
            raise ValueError("duration and amplitude must be >= 0")
        if not 0 <= self.onset_min_ms <= self.onset_max_ms:
            raise ValueError("require 0 <= onset_min_ms <= onset_max_ms")
        if self.onset_max_ms + self.duration_ms > 1000.0:
            raise ValueError("stimulus must end within the first second")


def build_stimulus(net_config: NetworkConfig, stim_config: StimulusConfig,
                   seed: int | None = None) -> StimulusProtocol:
    """Pick stimulus targets among excitatory neurons and jitter their onsets.

    Targets are the excitatory ids with the smallest per-id hash keys (a
    deterministic random subset); onsets are uniform in
    [onset_min_ms, onset_max_ms].
    """
    seed = net_config.seed if seed is None else seed
    exc_ids = np.arange(net_config.n_inhibitory, net_config.n_neurons, dtype=np.int64)
    if len(exc_ids) < stim_config.n_targets:
        raise ValueError(
            f"need at least {stim_config.n_targets} excitatory neurons, "
            f"have {len(exc_ids)}")
    keys = rng.uniform_np(seed, rng.KIND_STIM_SELECT, exc_ids, 0)
    order = np.lexsort((exc_ids, keys))
    targets = np.sort(exc_ids[order[:stim_config.n_targets]])
    onsets = stim_config.onset_min_ms + \
        (stim_config.onset_max_ms - stim_config.onset_min_ms) * \
        rng.uniform_np(seed, rng.KIND_STIM_ONSET, targets, 0)
    return StimulusProtocol(targets=targets, amplitude=stim_config.amplitude,
                            duration_ms=stim_config.duration_ms,
                            start_times_ms=onsets)
