"""Numba kernels for the simulation loop.

One call to `run_ticks` advances the whole network by a number of synaptic
ticks; each tick does the synaptic work (STDP for last tick's spikes, AP
deliveries, spontaneous releases, pool decay, current sums) and then the
membrane substeps for every neuron with the synaptic current held constant.

The arithmetic mirrors the reference operations in hh.py / synapse.py /
plasticity.py and the counter-based RNG in rng.py; cross-checks live in
the test suite.  Neuron membrane updates run under prange (each neuron
touches only its own state), everything with cross-entity effects runs
serially in fixed index order, so results do not depend on thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange, uint64

NONE_T = -1.0e18  # sentinel for "no spike recorded"

_GOLDEN = uint64(0x9E3779B97F4A7C15)
_MIX1 = uint64(0xBF58476D1CE4E5B9)
_MIX2 = uint64(0x94D049BB133111EB)


@njit(cache=True, inline="always")
def _splitmix(z):
    z = z + _GOLDEN
    z = (z ^ (z >> uint64(30))) * _MIX1
    z = (z ^ (z >> uint64(27))) * _MIX2
    return z ^ (z >> uint64(31))


@njit(cache=True, inline="always")
def _hash_u64(seed, kind, eid, ctr):
    z = _splitmix(seed + kind)
    z = _splitmix(z + eid)
    z = _splitmix(z + ctr)
    return z


@njit(cache=True, inline="always")
def _u01(seed, kind, eid, ctr):
    return (_hash_u64(seed, kind, eid, ctr) >> uint64(11)) * 2.0**-53


@njit(cache=True, inline="always")
def _znorm(seed, kind, eid, ctr):
    h1 = _hash_u64(seed, kind, eid, ctr)
    h2 = _hash_u64(seed, kind, eid, ctr + uint64(1))
    u1 = ((h1 >> uint64(11)) + uint64(1)) * 2.0**-53
    u2 = (h2 >> uint64(11)) * 2.0**-53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@njit(cache=True, inline="always")
def _soft_norm(r):
    if r > 5.0:
        return 1.0 / (r - 1.0)
    return 0.25


@njit(cache=True, parallel=True)
def run_ticks(
    tick0, n_ticks, substeps, dt, tick_ms,
    # neuron state
    u, gm, gh, gn, last_spike, above,
    # spike history rings and last-tick spike times
    hist_t, hist_cnt, spiked_prev_t,
    # arrival ring (per pre neuron, per tick slot)
    arriv,
    # synapse state
    syn_pre, syn_post, syn_exc, syn_r, syn_r0, syn_pool, syn_next_spont, syn_ctr,
    # static per-neuron data
    delays, stim_start, stim_end,
    # neuron params
    u_rest, u_thres, u_max, u_min, e_na, e_k, e_l, g_na, g_k, g_l, c_m,
    phi, tau_m, tau_n, tau_h, eps, min_isi,
    # synapse params
    p_ap, p_spont, mean_ap, sd_ap, mean_nap, sd_nap, decay_factor,
    du_per_ves, g_ampa, g_gaba, i_max, thres_inh, atten_coeff, atten_floor,
    lookback_ms, t_base_ms,
    # stdp params
    stdp_amp, stdp_window, stdp_tau, stdp_exc_on, stdp_inh_on, stdp_all_pairs,
    # stimulus amplitude, rng seed
    stim_amp, seed,
    # outputs
    spike_steps, spike_ids, volt_buf, record_volt,
):
    n = u.shape[0]
    n_syn = syn_pre.shape[0]
    nbuckets = arriv.shape[1]
    hist_k = hist_t.shape[1]
    seed_u = uint64(seed)
    kind_syn = uint64(6)
    i_syn_sum = np.zeros(n, dtype=np.float64)
    tick_spike_t = np.full(n, NONE_T, dtype=np.float64)
    n_spk = 0

    for it in range(n_ticks):
        tick_idx = tick0 + it
        t_tick = tick_idx * tick_ms

        # -- plasticity for spikes detected in the previous tick --
        if stdp_amp > 0.0 and (stdp_exc_on or stdp_inh_on):
            for s in range(n_syn):
                if syn_exc[s]:
                    if not stdp_exc_on:
                        continue
                elif not stdp_inh_on:
                    continue
                p_i = syn_pre[s]
                q_i = syn_post[s]
                t_post = spiked_prev_t[q_i]
                t_pre = spiked_prev_t[p_i]
                if t_post <= NONE_T / 2 and t_pre <= NONE_T / 2:
                    continue
                r = syn_r[s]
                upper = 2.0 * syn_r0[s] - 1e-3
                if t_post > NONE_T / 2:
                    # causal: pre spikes at or before the new post spike
                    if stdp_all_pairs:
                        for kk in range(hist_k):
                            tq = hist_t[p_i, kk]
                            if tq <= t_post and t_post - tq <= stdp_window:
                                dr = stdp_amp * _soft_norm(r) * np.exp(-(t_post - tq) / stdp_tau)
                                r = min(upper, max(1e-3, r + dr))
                    else:
                        best = NONE_T
                        for kk in range(hist_k):
                            tq = hist_t[p_i, kk]
                            if tq <= t_post and t_post - tq <= stdp_window and tq > best:
                                best = tq
                        if best > NONE_T / 2:
                            dr = stdp_amp * _soft_norm(r) * np.exp(-(t_post - best) / stdp_tau)
                            r = min(upper, max(1e-3, r + dr))
                if t_pre > NONE_T / 2:
                    # acausal: post spikes strictly before the new pre spike
                    if stdp_all_pairs:
                        for kk in range(hist_k):
                            tp = hist_t[q_i, kk]
                            if tp < t_pre and t_pre - tp <= stdp_window:
                                dr = stdp_amp * _soft_norm(r) * np.exp(-(t_pre - tp) / stdp_tau)
                                r = min(upper, max(1e-3, r - dr))
                    else:
                        best = NONE_T
                        for kk in range(hist_k):
                            tp = hist_t[q_i, kk]
                            if tp < t_pre and t_pre - tp <= stdp_window and tp > best:
                                best = tp
                        if best > NONE_T / 2:
                            dr = stdp_amp * _soft_norm(r) * np.exp(-(t_pre - best) / stdp_tau)
                            r = min(upper, max(1e-3, r - dr))
                syn_r[s] = r

        # -- synaptic releases, pool decay, current sums --
        slot = tick_idx % nbuckets
        for i in range(n):
            i_syn_sum[i] = 0.0
        for s in range(n_syn):
            p_i = syn_pre[s]
            s_u = uint64(s)
            new_ves = 0.0
            n_arrivals = arriv[p_i, slot]
            for _ in range(n_arrivals):
                c = syn_ctr[s]
                draw = _u01(seed_u, kind_syn, s_u, c)
                syn_ctr[s] = c + uint64(1)
                if draw < p_ap:
                    z = _znorm(seed_u, kind_syn, s_u, syn_ctr[s])
                    syn_ctr[s] += uint64(2)
                    v = mean_ap + sd_ap * z
                    if v > 0.0:
                        new_ves += v
            if t_tick >= syn_next_spont[s]:
                c = syn_ctr[s]
                draw = _u01(seed_u, kind_syn, s_u, c)
                syn_ctr[s] = c + uint64(1)
                z = _znorm(seed_u, kind_syn, s_u, syn_ctr[s])
                syn_ctr[s] += uint64(2)
                if draw < p_spont:
                    v = mean_ap + sd_ap * z
                else:
                    v = mean_nap + sd_nap * z
                if v > 0.0:
                    new_ves += v
                recent = 0
                for kk in range(hist_k):
                    tt = hist_t[p_i, kk]
                    if t_tick - lookback_ms <= tt <= t_tick:
                        recent += 1
                syn_next_spont[s] = t_tick + t_base_ms * (1.0 + recent)
            pool_s = (syn_pool[s] + new_ves) * decay_factor
            syn_pool[s] = pool_s
            base = syn_r[s] * pool_s * du_per_ves
            if syn_exc[s]:
                cur = base * g_ampa
            else:
                cur = -base * g_gaba
                if cur < 0.0:
                    u_p = u[syn_post[s]]
                    if u_p < thres_inh:
                        att = np.exp(-atten_coeff * (thres_inh - u_p))
                        if att < atten_floor:
                            att = atten_floor
                        cur *= att
            if cur > i_max:
                cur = i_max
            elif cur < -i_max:
                cur = -i_max
            i_syn_sum[syn_post[s]] += cur
        for i in range(n):
            if i_syn_sum[i] > i_max:
                i_syn_sum[i] = i_max
            elif i_syn_sum[i] < -i_max:
                i_syn_sum[i] = -i_max
            arriv[i, slot] = 0
            spiked_prev_t[i] = NONE_T

        # -- membrane substeps (independent per neuron) --
        for i in prange(n):
            u_i = u[i]
            m_i = gm[i]
            h_i = gh[i]
            n_i = gn[i]
            above_i = above[i]
            last_i = last_spike[i]
            i_syn = i_syn_sum[i]
            st = stim_start[i]
            en = stim_end[i]
            spike_t = NONE_T
            for k in range(substeps):
                t_now = t_tick + k * dt
                du_v = u_i - u_rest
                a_m = phi * (eps + 2.5 - 0.1 * du_v) / (eps + np.exp(2.5 - 0.1 * du_v) - 1.0)
                a_n = phi * (eps + 0.1 - 0.01 * du_v) / (eps + np.exp(1.0 - 0.1 * du_v) - 1.0)
                a_h = 0.07 * phi * np.exp(-du_v / 20.0)
                b_m = 4.0 * phi * np.exp(-du_v / 18.0)
                b_n = 0.125 * phi * np.exp(-du_v / 80.0)
                b_h = phi / (np.exp(3.0 - 0.1 * du_v) + 1.0)
                m_i = m_i + dt * (a_m * (1.0 - m_i) - b_m * m_i) / tau_m
                h_i = h_i + dt * (a_h * (1.0 - h_i) - b_h * h_i) / tau_h
                n_i = n_i + dt * (a_n * (1.0 - n_i) - b_n * n_i) / tau_n
                m_i = min(1.0, max(0.0, m_i))
                h_i = min(1.0, max(0.0, h_i))
                n_i = min(1.0, max(0.0, n_i))
                i_ext = stim_amp if (st <= t_now) and (t_now < en) else 0.0
                i_na = g_na * (u_i - e_na) * m_i * m_i * m_i * h_i
                i_k = g_k * (u_i - e_k) * n_i * n_i * n_i * n_i
                i_l = g_l * (u_i - e_l)
                u_i = u_i + dt * (-(i_na + i_k + i_l) + i_syn + i_ext) / c_m
                u_i = min(u_max, max(u_min, u_i))
                t_next = t_tick + (k + 1) * dt
                is_above = u_i >= u_thres
                if is_above and above_i == 0:
                    if last_i <= NONE_T / 2 or t_next - last_i >= min_isi:
                        last_i = t_next
                        spike_t = t_next
                above_i = 1 if is_above else 0
            u[i] = u_i
            gm[i] = m_i
            gh[i] = h_i
            gn[i] = n_i
            above[i] = above_i
            last_spike[i] = last_i
            tick_spike_t[i] = spike_t

        # -- record spikes, update rings, enqueue deliveries --
        for i in range(n):
            ts = tick_spike_t[i]
            if ts > NONE_T / 2:
                gstep = tick_idx * substeps + int(np.round((ts - t_tick) / dt))
                spike_steps[n_spk] = gstep
                spike_ids[n_spk] = i
                n_spk += 1
                hist_t[i, hist_cnt[i] % hist_k] = ts
                hist_cnt[i] += 1
                spiked_prev_t[i] = ts
                ta = ts + delays[i]
                j = int(np.ceil(ta / tick_ms))
                if j * tick_ms < ta:
                    j += 1
                arriv[i, j % nbuckets] += 1
        if record_volt:
            for i in range(n):
                volt_buf[it, i] = np.float32(u[i])

    return n_spk
