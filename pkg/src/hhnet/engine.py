"""Simulation engine.

Owns all mutable state (neuron arrays, synapse arrays, delivery ring,
RNG counters), drives the two-rate loop (membrane substeps on the fine
grid, synaptic work on the coarse tick) through the numba kernel, records
spikes and voltages, and serializes checkpoints.

File formats:
  - spikes.csv: header ``time_ms,neuron_id``, times with 3 decimals,
    sorted by (time_ms, neuron_id); byte-exact for a given (config, seed).
  - voltage file: magic ``HHV1``, little-endian u32 neuron count, u32
    sample count, float32 samples neuron-major; sidecar ``<path>.hdr.txt``
    records the sample period.
  - checkpoint: magic ``HHCK``, u32 format version, u64 payload length,
    then an npz payload of every state field.
"""

from __future__ import annotations

import io
import struct
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .hh import NeuronParams, steady_state_gates
from .plasticity import StdpParams
from .synapse import SynapseParams
from .topology import NetworkConfig, StimulusConfig, StimulusProtocol, Topology, \
    build_stimulus, build_topology

CHECKPOINT_MAGIC = b"HHCK"
CHECKPOINT_VERSION = 1
VOLTAGE_MAGIC = b"HHV1"
HIST_LEN = 64  # per-neuron spike-history ring length


class NumericAbort(RuntimeError):
    """Raised when non-finite state is detected during a run."""


class CheckpointError(ValueError):
    """Raised for malformed or incompatible checkpoint files."""


@dataclass(frozen=True)
class SimConfig:
    dt_membrane_ms: float = 0.01
    duration_s: float = 1.0
    record_voltage: bool = False
    voltage_sample_period_ms: float = 1.0
    seed: int = 0
    workers: int = 1
    checkpoint_period_s: Optional[float] = None

    def __post_init__(self):
        if self.dt_membrane_ms <= 0:
            raise ValueError("dt_membrane_ms must be > 0")
        if self.duration_s < 0:
            raise ValueError("duration_s must be >= 0")
        if self.voltage_sample_period_ms < self.dt_membrane_ms:
            raise ValueError("voltage_sample_period_ms must be >= dt_membrane_ms")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


def _ticks_per(dt_coarse: float, dt_fine: float, what: str) -> int:
    ratio = dt_coarse / dt_fine
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9:
        raise ValueError(f"{what} ({dt_coarse}) must be an integer multiple of {dt_fine}")
    return n


class World:
    """Complete mutable simulation state plus its static context."""

    def __init__(self, topology: Topology, stimulus: StimulusProtocol,
                 neuron_params: NeuronParams, synapse_params: SynapseParams,
                 stdp_params: StdpParams, sim_config: SimConfig):
        self.topology = topology
        self.stimulus = stimulus
        self.neuron_params = neuron_params
        self.synapse_params = synapse_params
        self.stdp_params = stdp_params
        self.sim_config = sim_config

        self.tick_ms = synapse_params.t_update_ms
        self.substeps = _ticks_per(self.tick_ms, sim_config.dt_membrane_ms,
                                   "synaptic tick")
        n = topology.n_neurons

        gates = steady_state_gates(neuron_params.u_rest, neuron_params)
        self.u = np.full(n, neuron_params.u_rest, dtype=np.float64)
        self.gm = np.full(n, gates.m, dtype=np.float64)
        self.gh = np.full(n, gates.h, dtype=np.float64)
        self.gn = np.full(n, gates.n, dtype=np.float64)
        self.last_spike = np.full(n, _kernels.NONE_T, dtype=np.float64)
        self.above = np.zeros(n, dtype=np.uint8)
        self.hist_t = np.full((n, HIST_LEN), _kernels.NONE_T, dtype=np.float64)
        self.hist_cnt = np.zeros(n, dtype=np.int64)
        self.spiked_prev_t = np.full(n, _kernels.NONE_T, dtype=np.float64)

        n_buckets = int(np.ceil(max(topology.delays_ms.max(initial=0.0), 0.0)
                                / self.tick_ms)) + 4
        self.arriv = np.zeros((n, n_buckets), dtype=np.int64)

        self.syn_pool = np.zeros(topology.n_synapses, dtype=np.float64)
        self.syn_ctr = np.zeros(topology.n_synapses, dtype=np.uint64)
        # desynchronize initial spontaneous-release phases
        base = synapse_params.t_ves_release_base_ms
        from . import rng
        phases = rng.uniform_np(sim_config.seed, rng.KIND_SYNAPSE,
                                np.arange(topology.n_synapses), 2 ** 62)
        self.syn_next_spont = (base * phases).astype(np.float64)

        self.stim_start = np.full(n, np.inf, dtype=np.float64)
        self.stim_end = np.full(n, np.inf, dtype=np.float64)
        self.stim_start[stimulus.targets] = stimulus.start_times_ms
        self.stim_end[stimulus.targets] = stimulus.start_times_ms + stimulus.duration_ms

        self.tick_idx = 0
        self.spike_steps: list[np.ndarray] = []
        self.spike_ids: list[np.ndarray] = []
        self.volt_chunks: list[np.ndarray] = []

    # -- time bookkeeping ---------------------------------------------------

    @property
    def time_ms(self) -> float:
        return self.tick_idx * self.tick_ms

    @property
    def spike_count(self) -> int:
        return sum(len(a) for a in self.spike_steps)

    # -- stepping -----------------------------------------------------------

    def run_ticks(self, n_ticks: int) -> None:
        """Advance by n_ticks synaptic ticks through the kernel."""
        if n_ticks <= 0:
            return
        np_ = self.neuron_params
        sp = self.synapse_params
        st = self.stdp_params
        cap = n_ticks * self.topology.n_neurons
        spike_steps = np.empty(cap, dtype=np.int64)
        spike_ids = np.empty(cap, dtype=np.int64)
        record = self.sim_config.record_voltage
        volt_buf = np.empty((n_ticks if record else 1, self.topology.n_neurons),
                            dtype=np.float32)
        tick_s = self.tick_ms / 1000.0
        n_spk = _kernels.run_ticks(
            self.tick_idx, n_ticks, self.substeps, self.sim_config.dt_membrane_ms,
            self.tick_ms,
            self.u, self.gm, self.gh, self.gn, self.last_spike, self.above,
            self.hist_t, self.hist_cnt, self.spiked_prev_t,
            self.arriv,
            self.topology.pre, self.topology.post,
            self.topology.pre_is_excitatory.astype(np.uint8),
            self.topology.receptors, self.topology.receptors_initial,
            self.syn_pool, self.syn_next_spont, self.syn_ctr,
            self.topology.delays_ms, self.stim_start, self.stim_end,
            np_.u_rest, np_.u_thres, np_.u_max, np_.u_min, np_.e_na, np_.e_k,
            np_.e_l, np_.g_na, np_.g_k, np_.g_l, np_.c_m,
            np_.phi, np_.tau_m, np_.tau_n, np_.tau_h, np_.epsilon, np_.min_isi_ms,
            sp.p_ap_release, sp.p_spont_ap_release,
            sp.mean_n_ap, float(np.sqrt(sp.var_n_ap)),
            sp.mean_n_not_ap, float(np.sqrt(sp.var_n_not_ap)),
            float(np.exp(-sp.decay_rate_per_s * tick_s)),
            sp.du_per_ves, sp.g_ampa, sp.g_gaba, sp.i_syn_max, sp.thres_inh,
            sp.atten_coeff_per_mv, sp.atten_floor,
            sp.t_lookback_ap_ms, sp.t_ves_release_base_ms,
            st.amplitude, st.window_ms, st.tau_ms, st.enabled_exc, st.enabled_inh,
            st.pairing == "all",
            self.stimulus.amplitude, np.uint64(self.sim_config.seed),
            spike_steps, spike_ids, volt_buf, record,
        )
        self.tick_idx += n_ticks
        if n_spk > 0:
            self.spike_steps.append(spike_steps[:n_spk].copy())
            self.spike_ids.append(spike_ids[:n_spk].copy())
        if record:
            per = _ticks_per(self.sim_config.voltage_sample_period_ms,
                             self.tick_ms, "voltage_sample_period_ms")
            tick_end = self.tick_idx - n_ticks + np.arange(1, n_ticks + 1)
            self.volt_chunks.append(volt_buf[tick_end % per == 0].copy())
        if not (np.isfinite(self.u).all() and np.isfinite(self.topology.receptors).all()
                and np.isfinite(self.syn_pool).all()):
            raise NumericAbort(
                f"non-finite state detected at t = {self.time_ms:.3f} ms")

    # -- outputs ------------------------------------------------------------

    def collected_spikes(self) -> tuple[np.ndarray, np.ndarray]:
        """All recorded spikes so far as (step_index, neuron_id), sorted."""
        if self.spike_steps:
            steps = np.concatenate(self.spike_steps)
            ids = np.concatenate(self.spike_ids)
        else:
            steps = np.empty(0, dtype=np.int64)
            ids = np.empty(0, dtype=np.int64)
        order = np.lexsort((ids, steps))
        return steps[order], ids[order]

    def write_spikes_csv(self, path) -> int:
        steps, ids = self.collected_spikes()
        dt = self.sim_config.dt_membrane_ms
        with open(path, "w", newline="") as f:
            f.write("time_ms,neuron_id\n")
            for gstep, nid in zip(steps, ids):
                f.write(f"{gstep * dt:.3f},{nid}\n")
        return len(steps)

    def write_voltage_file(self, path) -> int:
        samples = (np.concatenate(self.volt_chunks) if self.volt_chunks
                   else np.empty((0, self.topology.n_neurons), dtype=np.float32))
        n_samples, n_neurons = samples.shape
        with open(path, "wb") as f:
            f.write(VOLTAGE_MAGIC)
            f.write(struct.pack("<II", n_neurons, n_samples))
            f.write(np.ascontiguousarray(samples.T).tobytes())  # neuron-major
        with open(str(path) + ".hdr.txt", "w") as f:
            f.write(f"sample_period_ms={self.sim_config.voltage_sample_period_ms}\n"
                    f"neuron_count={n_neurons}\nsample_count={n_samples}\n")
        return n_samples

    # -- checkpointing ------------------------------------------------------

    def checkpoint_bytes(self) -> bytes:
        steps, ids = self.collected_spikes()
        volt = (np.concatenate(self.volt_chunks) if self.volt_chunks
                else np.empty((0, self.topology.n_neurons), dtype=np.float32))
        fields = {
            "tick_idx": np.int64(self.tick_idx),
            "u": self.u, "gm": self.gm, "gh": self.gh, "gn": self.gn,
            "last_spike": self.last_spike, "above": self.above,
            "hist_t": self.hist_t, "hist_cnt": self.hist_cnt,
            "spiked_prev_t": self.spiked_prev_t, "arriv": self.arriv,
            "syn_pool": self.syn_pool, "syn_ctr": self.syn_ctr,
            "syn_next_spont": self.syn_next_spont,
            "receptors": self.topology.receptors,
            "receptors_initial": self.topology.receptors_initial,
            "pre": self.topology.pre, "post": self.topology.post,
            "pre_is_excitatory": self.topology.pre_is_excitatory,
            "delays_ms": self.topology.delays_ms,
            "n_neurons": np.int64(self.topology.n_neurons),
            "n_inhibitory": np.int64(self.topology.n_inhibitory),
            "stim_targets": self.stimulus.targets,
            "stim_starts": self.stimulus.start_times_ms,
            "stim_amplitude": np.float64(self.stimulus.amplitude),
            "stim_duration_ms": np.float64(self.stimulus.duration_ms),
            "spike_record_steps": steps, "spike_record_ids": ids,
            "volt_record": volt,
        }
        buf = io.BytesIO()
        np.savez(buf, **fields)
        payload = buf.getvalue()
        return (CHECKPOINT_MAGIC + struct.pack("<I", CHECKPOINT_VERSION)
                + struct.pack("<Q", len(payload)) + payload)

    def save_checkpoint(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.checkpoint_bytes())

    def restore_checkpoint_bytes(self, data: bytes) -> None:
        if data[:4] != CHECKPOINT_MAGIC:
            raise CheckpointError("bad checkpoint magic (not an HHCK file)")
        (version,) = struct.unpack("<I", data[4:8])
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (length,) = struct.unpack("<Q", data[8:16])
        payload = data[16:16 + length]
        if len(payload) != length:
            raise CheckpointError("truncated checkpoint payload")
        z = np.load(io.BytesIO(payload))
        if int(z["n_neurons"]) != self.topology.n_neurons:
            raise CheckpointError("checkpoint neuron count does not match config")
        if len(z["pre"]) != self.topology.n_synapses:
            raise CheckpointError("checkpoint synapse count does not match config")
        self.tick_idx = int(z["tick_idx"])
        for name in ("u", "gm", "gh", "gn", "last_spike", "above", "hist_t",
                     "hist_cnt", "spiked_prev_t", "arriv", "syn_pool", "syn_ctr",
                     "syn_next_spont"):
            getattr(self, name)[...] = z[name]
        self.topology.receptors[...] = z["receptors"]
        self.topology.receptors_initial[...] = z["receptors_initial"]
        self.topology.pre[...] = z["pre"]
        self.topology.post[...] = z["post"]
        self.topology.pre_is_excitatory[...] = z["pre_is_excitatory"]
        self.topology.delays_ms[...] = z["delays_ms"]
        self.spike_steps = [z["spike_record_steps"]]
        self.spike_ids = [z["spike_record_ids"]]
        self.volt_chunks = [z["volt_record"]] if len(z["volt_record"]) else []

    @classmethod
    def load_checkpoint(cls, path, neuron_params: NeuronParams,
                        synapse_params: SynapseParams, stdp_params: StdpParams,
                        sim_config: SimConfig) -> "World":
        with open(path, "rb") as f:
            data = f.read()
        if data[:4] != CHECKPOINT_MAGIC:
            raise CheckpointError("bad checkpoint magic (not an HHCK file)")
        z = np.load(io.BytesIO(data[16:]))
        n = int(z["n_neurons"])
        topology = Topology(
            n_neurons=n, n_inhibitory=int(z["n_inhibitory"]),
            pre=z["pre"], post=z["post"],
            pre_is_excitatory=z["pre_is_excitatory"],
            receptors=z["receptors"].copy(),
            receptors_initial=z["receptors_initial"].copy(),
            delays_ms=z["delays_ms"],
        )
        stimulus = StimulusProtocol(
            targets=z["stim_targets"], amplitude=float(z["stim_amplitude"]),
            duration_ms=float(z["stim_duration_ms"]),
            start_times_ms=z["stim_starts"],
        )
        world = cls(topology, stimulus, neuron_params, synapse_params,
                    stdp_params, sim_config)
        world.restore_checkpoint_bytes(data)
        return world


def build_world(net_config: NetworkConfig, stim_config: StimulusConfig,
                neuron_params: NeuronParams, synapse_params: SynapseParams,
                stdp_params: StdpParams, sim_config: SimConfig) -> World:
    """Construct a fresh world from configuration (topology + stimulus draw)."""
    topology = build_topology(net_config, seed=sim_config.seed)
    stimulus = build_stimulus(net_config, stim_config, seed=sim_config.seed)
    return World(topology, stimulus, neuron_params, synapse_params,
                 stdp_params, sim_config)


def run(world: World, *, spikes_path=None, voltage_path=None,
        checkpoint_path=None, progress=None) -> dict:
    """Run the world to its configured duration and flush outputs.

    Chunks the tick loop (1 s of simulated time per kernel call), takes
    periodic checkpoints when configured, and returns a summary dict.
    """
    import numba

    cfg = world.sim_config
    threads = min(cfg.workers, numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(max(1, threads))

    total_ticks = int(round(cfg.duration_s * 1000.0 / world.tick_ms))
    ckpt_ticks = None
    if cfg.checkpoint_period_s:
        ckpt_ticks = _ticks_per(cfg.checkpoint_period_s * 1000.0, world.tick_ms,
                                "checkpoint period")
    chunk = int(round(1000.0 / world.tick_ms))  # 1 s of simulated time
    if ckpt_ticks:
        chunk = min(chunk, ckpt_ticks)

    t0 = time.perf_counter()
    while world.tick_idx < total_ticks:
        n = min(chunk, total_ticks - world.tick_idx)
        world.run_ticks(n)
        if checkpoint_path and ckpt_ticks and world.tick_idx % ckpt_ticks == 0:
            world.save_checkpoint(checkpoint_path)
        if progress:
            progress(world.tick_idx, total_ticks)
    wall = time.perf_counter() - t0

    summary = {
        "duration_s": cfg.duration_s,
        "spike_count": world.spike_count,
        "wall_time_s": wall,
        "membrane_updates_per_s": (total_ticks * world.substeps
                                   * world.topology.n_neurons / wall) if wall > 0 else 0.0,
    }
    if spikes_path is not None:
        world.write_spikes_csv(spikes_path)
    if voltage_path is not None and cfg.record_voltage:
        world.write_voltage_file(voltage_path)
    return summary
