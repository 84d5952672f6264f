"""Compiled inner loops.

Every function here takes and returns plain floats and numpy arrays so it can
run under ``numba.njit`` or, with acceleration disabled, as ordinary Python.
All exponential-kernel sums use the O(N) recursion

    A_i = sum_{j<i} exp(-alpha (t_i - t_j)) = exp(-alpha D_i) (A_{i-1} + 1).
"""

import math

import numpy as np

from ._accel import njit

# mark model codes
IID_GAUSS = 0
IID_EXP = 1
AR1_GAUSS = 2
OU_SAMPLED = 3

# simulate_kernel status codes
SIM_OK = 0
SIM_NEED_UNIFORMS = 1
SIM_NEED_MARKS = 2
SIM_EXPLOSION = 3
SIM_BOOST_DOMAIN = 4
SIM_BOUND_VIOLATED = 5

# mark parameter vector layout
P_MEAN, P_SD, P_RHO, P_INNOV, P_KAPPA, P_RATE = 0, 1, 2, 3, 4, 5


@njit
def stationary_mark(kind, prm, noise, out):
    """Draw from the stationary marginal of the mark chain."""
    d = out.shape[0]
    for k in range(d):
        if kind == IID_EXP:
            out[k] = noise[k] / prm[P_RATE]
        else:
            out[k] = prm[P_MEAN] + prm[P_SD] * noise[k]


@njit
def advance_mark(kind, prm, state, dt, noise, out):
    """One mark-chain step. ``noise`` holds standard normals (Gaussian kinds)
    or standard exponentials (``IID_EXP``)."""
    d = out.shape[0]
    if kind == OU_SAMPLED:
        c = math.exp(-prm[P_KAPPA] * dt)
        s = prm[P_SD] * math.sqrt(-math.expm1(-2.0 * prm[P_KAPPA] * dt))
        for k in range(d):
            out[k] = prm[P_MEAN] + c * (state[k] - prm[P_MEAN]) + s * noise[k]
    elif kind == AR1_GAUSS:
        for k in range(d):
            out[k] = prm[P_MEAN] + prm[P_RHO] * (state[k] - prm[P_MEAN]) + prm[P_INNOV] * noise[k]
    elif kind == IID_EXP:
        for k in range(d):
            out[k] = noise[k] / prm[P_RATE]
    else:
        for k in range(d):
            out[k] = prm[P_MEAN] + prm[P_SD] * noise[k]


@njit
def h_value(code, x, psi):
    """``h(x; psi)`` for a single mark; codes 0 linear, 1 polynomial, 2 exponential."""
    if code == 2:
        s = 0.0
        for k in range(psi.shape[0]):
            s += psi[k] * x[k]
        return math.exp(s)
    if code == 1:
        s = 1.0
        p = 1.0
        for k in range(psi.shape[0]):
            p *= x[0]
            s += psi[k] * p
        return s
    s = 1.0
    for k in range(psi.shape[0]):
        s += psi[k] * x[k]
    return s


@njit
def simulate_kernel(eta, theta, alpha, excess0, t_start, horizon, cap,
                    mark_kind, mark_prm, mark_state, boost_code, psi, mu_h,
                    gaps, unif, noise, times_out, marks_out):
    """Ogata thinning on ``[t_start, horizon]``.

    Between events the excess intensity only decays, so the intensity right
    after the current point bounds it until the next candidate. ``gaps`` are
    standard exponentials, ``unif`` acceptance uniforms, ``noise`` one row of
    mark noise per accepted event. Events at ``t <= 0`` are dropped.

    Returns ``(status, n_kept, n_used_candidates, lambda_at_zero, max_ratio)``
    where ``max_ratio`` is the largest candidate-intensity / bound ratio seen.
    """
    d = mark_state.shape[0]
    state = mark_state.copy()
    new_mark = np.empty(d)
    t = t_start
    t_last = t_start
    excess = excess0
    lam0 = -1.0
    if t_start >= 0.0:
        lam0 = eta + excess0
    n_kept = 0
    n_marks = 0
    k = 0
    max_ratio = 0.0
    n_cand = gaps.shape[0]
    while True:
        bound = eta + excess
        if bound > cap:
            return SIM_EXPLOSION, n_kept, k, lam0, max_ratio
        if k >= n_cand:
            return SIM_NEED_UNIFORMS, n_kept, k, lam0, max_ratio
        w = gaps[k] / bound
        t_new = t + w
        if lam0 < 0.0 and t_new >= 0.0:
            lam0 = eta + excess * math.exp(-alpha * (0.0 - t))
        if t_new > horizon:
            if lam0 < 0.0:
                lam0 = eta + excess * math.exp(-alpha * (0.0 - t))
            return SIM_OK, n_kept, k, lam0, max_ratio
        excess *= math.exp(-alpha * w)
        lam = eta + excess
        ratio = lam / bound
        if ratio > max_ratio:
            max_ratio = ratio
        if ratio > 1.0 + 1e-12:
            return SIM_BOUND_VIOLATED, n_kept, k, lam0, max_ratio
        u = unif[k]
        k += 1
        t = t_new
        if u * bound <= lam:
            if n_marks >= noise.shape[0] or n_kept >= times_out.shape[0]:
                return SIM_NEED_MARKS, n_kept, k, lam0, max_ratio
            advance_mark(mark_kind, mark_prm, state, t - t_last, noise[n_marks], new_mark)
            n_marks += 1
            for j in range(d):
                state[j] = new_mark[j]
            h = h_value(boost_code, new_mark, psi)
            if not h > 0.0:
                return SIM_BOOST_DOMAIN, n_kept, k, lam0, max_ratio
            excess += theta * alpha * h / mu_h
            t_last = t
            if t > 0.0:
                times_out[n_kept] = t
                for j in range(d):
                    marks_out[n_kept, j] = new_mark[j]
                n_kept += 1


@njit
def intensity_recursion(times, eta, theta, alpha, excess0):
    """Left limits ``lambda(t_i-)`` and kernel sums ``A_i``."""
    n = times.shape[0]
    lam = np.empty(n)
    a = np.empty(n)
    acc = 0.0
    prev = 0.0
    for i in range(n):
        if i > 0:
            acc = math.exp(-alpha * (times[i] - prev)) * (acc + 1.0)
        a[i] = acc
        lam[i] = eta + theta * alpha * acc + excess0 * math.exp(-alpha * times[i])
        prev = times[i]
    return lam, a


@njit
def compensator_increments(times, eta, theta, alpha, excess0):
    """``Lambda(t_i) - Lambda(t_{i-1})`` with ``t_0 = 0``."""
    n = times.shape[0]
    out = np.empty(n)
    ex = excess0  # excess intensity just after the previous event
    prev = 0.0
    for i in range(n):
        dt = times[i] - prev
        out[i] = eta * dt - ex * math.expm1(-alpha * dt) / alpha
        ex = ex * math.exp(-alpha * dt) + theta * alpha
        prev = times[i]
    return out


@njit
def loglik_derivs(times, horizon, eta, theta, alpha, stationary_start, order):
    """Log-likelihood with analytic gradient and Hessian in ``(eta, theta, alpha)``.

    ``order`` 0 skips derivatives, 1 adds the gradient, 2 the Hessian.
    With ``stationary_start`` the intensity starts at ``eta / (1 - theta)``
    instead of ``eta``; the extra term ``kappa * exp(-alpha t)`` with
    ``kappa = eta * theta / (1 - theta)`` is differentiated too.
    """
    n = times.shape[0]
    grad = np.zeros(3)
    hess = np.zeros((3, 3))
    if stationary_start:
        om = 1.0 - theta
        kap = eta * theta / om
        k_e = theta / om
        k_t = eta / (om * om)
        k_et = 1.0 / (om * om)
        k_tt = 2.0 * eta / (om * om * om)
    else:
        kap = k_e = k_t = k_et = k_tt = 0.0

    ll = 0.0
    a = 0.0
    b = 0.0
    c = 0.0
    prev = 0.0
    s0 = 0.0
    s1 = 0.0
    s2 = 0.0
    dl = np.empty(3)
    for i in range(n):
        ti = times[i]
        if i > 0:
            dt = ti - prev
            e = math.exp(-alpha * dt)
            a1 = a + 1.0
            c = e * (c + 2.0 * dt * b + dt * dt * a1)
            b = e * (b + dt * a1)
            a = e * a1
        prev = ti
        ei = math.exp(-alpha * ti)
        lam = eta + theta * alpha * a + kap * ei
        ll += math.log(lam)
        rem = horizon - ti
        er = math.exp(-alpha * rem)
        s0 += -math.expm1(-alpha * rem)
        if order >= 1:
            s1 += rem * er
            dl[0] = 1.0 + k_e * ei
            dl[1] = alpha * a + k_t * ei
            dl[2] = theta * a - theta * alpha * b - kap * ti * ei
            inv = 1.0 / lam
            for p in range(3):
                grad[p] += dl[p] * inv
            if order >= 2:
                s2 += rem * rem * er
                inv2 = inv * inv
                for p in range(3):
                    for q in range(3):
                        hess[p, q] -= dl[p] * dl[q] * inv2
                # second derivatives of lambda; d2/deta2 is zero
                h01 = k_et * ei
                h02 = -k_e * ti * ei
                h11 = k_tt * ei
                h12 = a - alpha * b - k_t * ti * ei
                h22 = -2.0 * theta * b + theta * alpha * c + kap * ti * ti * ei
                hess[0, 1] += h01 * inv
                hess[0, 2] += h02 * inv
                hess[1, 1] += h11 * inv
                hess[1, 2] += h12 * inv
                hess[2, 2] += h22 * inv

    eT = math.exp(-alpha * horizon)
    f0 = -math.expm1(-alpha * horizon) / alpha
    comp = eta * horizon + theta * s0 + kap * f0
    ll -= comp
    if order >= 1:
        f1 = horizon * eT / alpha - f0 / alpha
        grad[0] -= horizon + k_e * f0
        grad[1] -= s0 + k_t * f0
        grad[2] -= theta * s1 + kap * f1
        if order >= 2:
            f2 = -horizon * horizon * eT / alpha - 2.0 * horizon * eT / (alpha * alpha) + 2.0 * f0 / (alpha * alpha)
            hess[0, 1] -= k_et * f0
            hess[0, 2] -= k_e * f1
            hess[1, 1] -= k_tt * f0
            hess[1, 2] -= s1 + k_t * f1
            hess[2, 2] -= -theta * s2 + kap * f2
            hess[1, 0] = hess[0, 1]
            hess[2, 0] = hess[0, 2]
            hess[2, 1] = hess[1, 2]
    return ll, grad, hess


@njit
def u_recursion(times, G, theta, alpha):
    """``U_i = exp(-alpha D_i) (U_{i-1} + theta alpha G_{i-1})``, ``U_1 = 0``."""
    n, r = G.shape
    U = np.zeros((n, r))
    ta = theta * alpha
    for i in range(1, n):
        e = math.exp(-alpha * (times[i] - times[i - 1]))
        for k in range(r):
            U[i, k] = e * (U[i - 1, k] + ta * G[i - 1, k])
    return U


@njit
def score_and_info(times, horizon, G, eta, theta, alpha, excess0):
    """Score for the boost parameters and its event-averaged information.

    ``score = sum_i U_i / lam_i - theta sum_i G_i (1 - exp(-alpha (T - t_i)))``
    and ``info = sum_i U_i U_i^T / lam_i**2``.
    """
    n, r = G.shape
    score = np.zeros(r)
    info = np.zeros((r, r))
    u = np.zeros(r)
    acc = 0.0
    ta = theta * alpha
    for i in range(n):
        ti = times[i]
        if i > 0:
            e = math.exp(-alpha * (ti - times[i - 1]))
            acc = e * (acc + 1.0)
            for k in range(r):
                u[k] = e * (u[k] + ta * G[i - 1, k])
        lam = eta + ta * acc + excess0 * math.exp(-alpha * ti)
        inv = 1.0 / lam
        w = -math.expm1(-alpha * (horizon - ti))
        for k in range(r):
            score[k] += u[k] * inv - theta * G[i, k] * w
            for m in range(k + 1):
                info[k, m] += u[k] * u[m] * inv * inv
    for k in range(r):
        for m in range(k):
            info[m, k] = info[k, m]
    return score, info


@njit
def mark_chain(kind, prm, state, gaps, noise):
    """Run ``advance_mark`` over a whole sequence of gaps."""
    n, d = noise.shape
    out = np.empty((n, d))
    cur = state.copy()
    for i in range(n):
        advance_mark(kind, prm, cur, gaps[i], noise[i], out[i])
        for k in range(d):
            cur[k] = out[i, k]
    return out
