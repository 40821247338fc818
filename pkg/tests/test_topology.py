"""Network construction: connectivity statistics, receptor typing, stimulus."""

import numpy as np
import pytest

from hhnet.topology import (NetworkConfig, StimulusConfig, build_stimulus,
                            build_topology)

CFG = NetworkConfig(seed=42)
STIM = StimulusConfig()


class TestBuildTopology:
    def test_synapse_count_within_3_sigma(self):
        topo = build_topology(CFG)
        mean = 200 * 199 * 0.8
        sigma = np.sqrt(200 * 199 * 0.8 * 0.2)
        assert abs(topo.n_synapses - mean) <= 3 * sigma

    def test_mean_count_over_20_seeds(self):
        counts = [build_topology(CFG, seed=s).n_synapses for s in range(20)]
        assert 31_600 <= np.mean(counts) <= 32_100

    def test_no_connections_at_p_zero(self):
        topo = build_topology(NetworkConfig(connection_prob=0.0, seed=1))
        assert topo.n_synapses == 0

    def test_complete_graph_at_p_one(self):
        topo = build_topology(NetworkConfig(connection_prob=1.0, seed=1))
        assert topo.n_synapses == 200 * 199
        assert np.all(topo.pre != topo.post)

    def test_no_self_synapses(self):
        topo = build_topology(CFG)
        assert np.all(topo.pre != topo.post)

    def test_no_duplicate_ordered_pairs(self):
        topo = build_topology(CFG)
        pairs = topo.pre * topo.n_neurons + topo.post
        assert len(np.unique(pairs)) == len(pairs)

    def test_ei_split(self):
        topo = build_topology(CFG)
        assert topo.n_inhibitory == 40
        assert len(topo.excitatory_ids) == 160
        assert not topo.neuron_is_excitatory(0)
        assert not topo.neuron_is_excitatory(39)
        assert topo.neuron_is_excitatory(40)

    def test_receptor_type_coherence(self):
        topo = build_topology(CFG)
        exc = topo.pre_is_excitatory
        assert np.array_equal(exc, topo.pre >= 40)
        # AMPA ~ N(120, 12), GABA ~ N(200, 6); means separated by >> spread
        assert topo.receptors[exc].mean() == pytest.approx(120.0, abs=0.5)
        assert topo.receptors[~exc].mean() == pytest.approx(200.0, abs=0.5)
        assert topo.receptors[exc].var() == pytest.approx(12.0, rel=0.15)
        assert topo.receptors[~exc].var() == pytest.approx(6.0, rel=0.15)
        assert np.all(topo.receptors >= 1.0)
        assert np.array_equal(topo.receptors, topo.receptors_initial)

    def test_variance_as_std_flag(self):
        topo = build_topology(NetworkConfig(receptor_spread_is_std=True, seed=7))
        exc = topo.pre_is_excitatory
        assert topo.receptors[exc].std() == pytest.approx(12.0, rel=0.05)

    def test_delays_in_range(self):
        topo = build_topology(CFG)
        assert len(topo.delays_ms) == 200
        assert np.all(topo.delays_ms >= CFG.delay_min_ms)
        assert np.all(topo.delays_ms <= CFG.delay_max_ms)

    def test_degree_statistics(self):
        topo = build_topology(CFG)
        out_deg = np.bincount(topo.pre, minlength=200)
        in_deg = np.bincount(topo.post, minlength=200)
        mean = 199 * 0.8
        sigma = np.sqrt(199 * 0.8 * 0.2)
        assert abs(out_deg.mean() - mean) <= 3 * sigma
        assert abs(in_deg.mean() - mean) <= 3 * sigma

    def test_seed_determinism(self):
        a = build_topology(CFG)
        b = build_topology(CFG)
        for field in ("pre", "post", "receptors", "receptors_initial",
                      "delays_ms", "pre_is_excitatory"):
            assert np.array_equal(getattr(a, field), getattr(b, field))

    def test_different_seed_differs(self):
        a = build_topology(CFG, seed=1)
        b = build_topology(CFG, seed=2)
        assert a.n_synapses != b.n_synapses or not np.array_equal(a.pre, b.pre)

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            NetworkConfig(n_inhibitory=200, n_neurons=200)


class TestBuildStimulus:
    def test_targets_are_distinct_excitatory(self):
        stim = build_stimulus(CFG, STIM)
        assert len(stim.targets) == 30
        assert len(np.unique(stim.targets)) == 30
        assert np.all(stim.targets >= 40)
        assert stim.amplitude == 80.0
        assert stim.duration_ms == 200.0

    def test_onsets_in_range_with_mean_400(self):
        onsets = np.concatenate([
            build_stimulus(CFG, STIM, seed=s).start_times_ms for s in range(50)])
        assert np.all(onsets >= 300.0)
        assert np.all(onsets <= 500.0)
        assert onsets.mean() == pytest.approx(400.0, abs=5.0)

    def test_stimulus_ends_within_first_second(self):
        stim = build_stimulus(CFG, STIM)
        assert np.all(stim.start_times_ms + stim.duration_ms <= 1000.0)

    def test_determinism(self):
        a = build_stimulus(CFG, STIM)
        b = build_stimulus(CFG, STIM)
        assert np.array_equal(a.targets, b.targets)
        assert np.array_equal(a.start_times_ms, b.start_times_ms)

    def test_too_few_excitatory_rejected(self):
        small = NetworkConfig(n_neurons=40, n_inhibitory=20, seed=1)
        with pytest.raises(ValueError):
            build_stimulus(small, STIM)
