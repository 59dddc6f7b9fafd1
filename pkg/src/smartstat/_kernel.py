"""Compiled inner loop for forward-Euler integration with thermostat hysteresis.

Everything hot lives here: simulation, the fit objective, planning rollouts and
duty-cycle emissions all call :func:`run_sim` (directly or one step at a time).
Keep this module free of Python objects; it only sees flat arrays and scalars.

Error codes returned by ``run_sim``: 0 ok, 1 unstable step, 2 state out of
range. ``err_step`` is the step index at which the fault was detected.
"""

import numpy as np
from numba import njit

ERR_OK = 0
ERR_UNSTABLE = 1
ERR_RANGE = 2

TEMP_MIN = -40.0
TEMP_MAX = 60.0


@njit(cache=True)
def stable_dt_bound(cap, G):
    """0.5 * min_i C_i / (sum_j 1/R_ij), conductance row sums excluding self."""
    n = cap.shape[0]
    worst = 1.0e300
    for i in range(n):
        gsum = 0.0
        for j in range(G.shape[1]):
            gsum += G[i, j]
        if gsum > 0.0:
            b = 0.5 * cap[i] / gsum
            if b < worst:
                worst = b
    return worst


@njit(cache=True)
def run_sim(
    G,            # (n, n+1) conductances; column n is the ambient node
    cinv,         # (n,) 1/C_i
    cool_vec,     # (n,) rated_cooling_power * ac_fraction_i, watts (>= 0)
    temps0,       # (n,) initial zone temperatures
    outdoor,      # (steps,) ambient temperature per step
    setpoints,    # (steps,) set temperature per step, NaN = thermostat idle
    noise,        # (steps, n) watts, or (0, 0) for none
    forced,       # (steps,) int8: -1 = thermostat decides, 0 = off, 1 = on
    sense_i,      # index of the sensed zone (thermostat input)
    d_high, d_low,        # hysteresis half-widths, degC
    min_on_s, min_off_s,  # compressor lockouts, seconds
    on0, since0, cum0,    # initial compressor state
    t0, dt,
    bound,        # stability bound; pass np.inf to skip the check
    record,       # if False, skip trace arrays (objective evaluations)
    temps_out,    # (steps+1, n) when record else (1, n)
    flags_out,    # (steps,) uint8 when record else (0,)
):
    n = temps0.shape[0]
    steps = outdoor.shape[0]
    if dt > bound:
        return on0, since0, cum0, ERR_UNSTABLE, 0

    T = temps0.copy()
    on = on0
    since = since0
    cum = cum0
    has_noise = noise.shape[0] == steps

    if record:
        for i in range(n):
            temps_out[0, i] = T[i]

    for s in range(steps):
        t = t0 + s * dt

        # thermostat decision for the interval [t, t+dt)
        f = forced[s]
        if f >= 0:
            want = f == 1
            if want != on:
                on = want
                since = t
        else:
            sp = setpoints[s]
            if sp != sp:  # NaN: schedule idle, force off immediately
                if on:
                    on = False
                    since = t
            elif on:
                if T[sense_i] <= sp - d_low and t - since >= min_on_s:
                    on = False
                    since = t
            else:
                if T[sense_i] >= sp + d_high and t - since >= min_off_s:
                    on = True
                    since = t

        if record:
            flags_out[s] = 1 if on else 0
        if on:
            cum += dt

        # explicit Euler update over the interval
        amb = outdoor[s]
        for i in range(n):
            q = G[i, n] * (amb - T[i])
            for j in range(n):
                q += G[i, j] * (T[j] - T[i])
            if on:
                q -= cool_vec[i]
            if has_noise:
                q += noise[s, i]
            T[i] += dt * cinv[i] * q

        for i in range(n):
            if not (TEMP_MIN <= T[i] <= TEMP_MAX):
                return on, since, cum, ERR_RANGE, s

        if record:
            for i in range(n):
                temps_out[s + 1, i] = T[i]

    if not record:
        for i in range(n):
            temps_out[0, i] = T[i]
    return on, since, cum, ERR_OK, steps


@njit(cache=True)
def sse_vs_observed(
    G, cinv, cool_vec, temps0,
    outdoor, setpoints, forced,
    sense_i, d_high, d_low, min_on_s, min_off_s,
    on0, since0, t0, dt,
    obs,          # (steps+1, m) observed temperatures
    obs_cols,     # (m,) zone index for each observed column
    obs_mask,     # (steps+1,) 1 = include this sample in the loss
):
    """Sum of squared one-trajectory errors against observed samples.

    Runs the same dynamics as run_sim without recording, accumulating the loss
    on the fly. Returns (sse, count) so the caller can form an MSE.
    """
    n = temps0.shape[0]
    steps = outdoor.shape[0]
    m = obs_cols.shape[0]
    noise = np.zeros((0, 0))

    T = temps0.copy()
    on = on0
    since = since0
    sse = 0.0
    count = 0

    if obs_mask[0] != 0:
        for k in range(m):
            e = T[obs_cols[k]] - obs[0, k]
            sse += e * e
            count += 1

    for s in range(steps):
        t = t0 + s * dt
        f = forced[s]
        if f >= 0:
            want = f == 1
            if want != on:
                on = want
                since = t
        else:
            sp = setpoints[s]
            if sp != sp:
                if on:
                    on = False
                    since = t
            elif on:
                if T[sense_i] <= sp - d_low and t - since >= min_on_s:
                    on = False
                    since = t
            else:
                if T[sense_i] >= sp + d_high and t - since >= min_off_s:
                    on = True
                    since = t

        amb = outdoor[s]
        for i in range(n):
            q = G[i, n] * (amb - T[i])
            for j in range(n):
                q += G[i, j] * (T[j] - T[i])
            if on:
                q -= cool_vec[i]
            T[i] += dt * cinv[i] * q

        for i in range(n):
            if not (TEMP_MIN <= T[i] <= TEMP_MAX):
                return 1.0e300, 0

        if obs_mask[s + 1] != 0:
            for k in range(m):
                e = T[obs_cols[k]] - obs[s + 1, k]
                sse += e * e
                count += 1

    return sse, count
