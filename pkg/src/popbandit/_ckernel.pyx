# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled replication loop.

Must stay draw-for-draw and operation-for-operation identical to the
pure-Python path (``env.Environment`` + ``policies``); the test suite
compares the two bit for bit.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport log, log1p, pow, sqrt, INFINITY
from libc.stdint cimport int64_t
from libc.stdlib cimport malloc, free
from numpy.random cimport bitgen_t

import numpy as np

DEF MAX_ARMS = 64

cdef enum PolicyKind:
    ORACLE = 0
    UCB = 1
    REC = 2
    BE = 3
    BEAE = 4

cdef struct Params:
    int m
    int64_t horizon
    int ext_kind
    double ext_param
    int policy
    int best_arm
    double gamma
    int64_t tau
    int64_t n
    double p
    double log_horizon


cdef inline double ext_f(double x, int kind, double a) noexcept nogil:
    if kind == 0:
        return pow(x, a)
    return pow(1.0 + log1p(x), a)


cdef inline int pick(int* cand, int k, bitgen_t* rng) noexcept nogil:
    if k == 1:
        return cand[0]
    return cand[<int>(rng.next_double(rng.state) * k)]


cdef void run_one(const Params* P, const double* mu, const double* theta,
                  bitgen_t* rng, int64_t* S, int64_t* Tn, int64_t* elim,
                  int64_t* ev, const int64_t* samples, int64_t nsamples,
                  int64_t* traj_gamma, int64_t* traj_s) noexcept nogil:
    cdef int m = P.m
    cdef int a, b, k, arm = 0
    cdef int cand[MAX_ARMS]
    cdef double fval[MAX_ARMS]
    cdef double wsum[MAX_ARMS]
    cdef double ub[MAX_ARMS]
    cdef char active[MAX_ARMS]
    cdef int64_t t, gamma_t = 0, si = 0, smin
    cdef double total, lam, val, best, g, mean, rad, top_lower
    cdef int n_active = m
    cdef bint exploring = 1, preferred
    cdef int committed = -1, exploit = -1
    cdef int64_t commit_time = -1, tau_n = P.horizon, last_elim = -1
    cdef int reward

    for a in range(m):
        S[a] = 0
        Tn[a] = 0
        elim[a] = -1
        fval[a] = ext_f(theta[a], P.ext_kind, P.ext_param)
        wsum[a] = 0.0
        active[a] = 1

    t = 1
    while t <= P.horizon:
        # ---- choose ----
        if P.policy == ORACLE:
            arm = P.best_arm
        elif P.policy == UCB:
            g = P.gamma * log(<double>t)
            best = -INFINITY
            k = 0
            for a in range(m):
                if Tn[a] == 0:
                    val = INFINITY
                else:
                    val = <double>S[a] / <double>Tn[a] + sqrt(g / <double>Tn[a])
                if val > best:
                    best = val
                    k = 0
                    cand[k] = a
                    k += 1
                elif val == best:
                    cand[k] = a
                    k += 1
            arm = pick(cand, k, rng)
        elif P.policy == REC:
            if t <= P.tau:
                for a in range(m):
                    cand[a] = a
                arm = pick(cand, m, rng)
            elif committed < 0:
                k = 0
                smin = -1
                for a in range(m):
                    if S[a] > smin:
                        smin = S[a]
                        k = 0
                        cand[k] = a
                        k += 1
                    elif S[a] == smin:
                        cand[k] = a
                        k += 1
                arm = pick(cand, k, rng)
                committed = arm
                commit_time = t
            else:
                arm = committed
        elif P.policy == BE:
            if exploring:
                k = 0
                smin = S[0] + 1
                for a in range(m):
                    if S[a] < smin:
                        smin = S[a]
                        k = 0
                        cand[k] = a
                        k += 1
                    elif S[a] == smin:
                        cand[k] = a
                        k += 1
                arm = pick(cand, k, rng)
            elif exploit < 0:
                k = 0
                smin = Tn[0] + 1
                for a in range(m):
                    if Tn[a] < smin:
                        smin = Tn[a]
                        k = 0
                        cand[k] = a
                        k += 1
                    elif Tn[a] == smin:
                        cand[k] = a
                        k += 1
                arm = pick(cand, k, rng)
                exploit = arm
            else:
                arm = exploit
        else:
            smin = -1
            for a in range(m):
                if active[a] and (smin < 0 or S[a] < smin):
                    smin = S[a]
                    arm = a

        # ---- environment ----
        total = 0.0
        for a in range(m):
            total += fval[a]
        lam = fval[arm] / total
        preferred = rng.next_double(rng.state) < lam
        reward = 1 if (rng.next_double(rng.state) < mu[arm] and preferred) else 0
        Tn[arm] += 1
        if reward:
            S[arm] += 1
            gamma_t += 1
            fval[arm] = ext_f(<double>S[arm] + theta[arm], P.ext_kind, P.ext_param)

        # ---- observe ----
        if P.policy == BE and exploring:
            smin = S[0]
            for a in range(m):
                if S[a] < smin:
                    smin = S[a]
            if smin >= P.n:
                exploring = 0
                tau_n = t
        elif P.policy == BEAE:
            if reward:
                wsum[arm] += 1.0 / lam
            if n_active > 1:
                top_lower = -INFINITY
                for b in range(m):
                    if active[b]:
                        if Tn[b] == 0:
                            ub[b] = INFINITY
                        else:
                            mean = wsum[b] / <double>Tn[b]
                            rad = P.p * sqrt(P.log_horizon / <double>Tn[b])
                            ub[b] = mean + rad
                            if mean - rad > top_lower:
                                top_lower = mean - rad
                for b in range(m):
                    if active[b] and ub[b] < top_lower:
                        active[b] = 0
                        elim[b] = t
                        last_elim = t
                        n_active -= 1

        if si < nsamples and samples[si] == t:
            traj_gamma[si] = gamma_t
            for a in range(m):
                traj_s[si * m + a] = S[a]
            si += 1
        t += 1

    if P.policy == REC:
        ev[0] = commit_time
        ev[1] = committed
    elif P.policy == BE:
        ev[0] = tau_n
        if exploit >= 0:
            ev[1] = exploit
        else:
            k = 0
            for a in range(m):
                if Tn[a] < Tn[k]:
                    k = a
            ev[1] = k
    elif P.policy == BEAE and n_active == 1:
        ev[0] = last_elim
        for a in range(m):
            if active[a]:
                ev[1] = a
    else:
        ev[0] = -1
        ev[1] = -1


def run_batch(double[::1] mu, double[::1] theta, int ext_kind, double ext_param,
              int policy, int best_arm, double gamma, int64_t tau, int64_t n,
              double p, int64_t horizon, list bitgens, int64_t[::1] samples,
              int64_t[:, ::1] S, int64_t[:, ::1] Tn, int64_t[:, ::1] elim,
              int64_t[:, ::1] ev, int64_t[:, ::1] traj_gamma,
              int64_t[:, ::1] traj_s):
    """Run one replication per bit generator, filling the preallocated outputs."""
    cdef Params P
    cdef Py_ssize_t r, R = len(bitgens)
    cdef int64_t nsamples = samples.shape[0]
    cdef bint with_traj = traj_gamma.shape[1] > 0
    cdef int64_t dummy[1]
    if mu.shape[0] > MAX_ARMS:
        raise ValueError(f"compiled kernel supports at most {MAX_ARMS} arms")
    P.m = mu.shape[0]
    P.horizon = horizon
    P.ext_kind = ext_kind
    P.ext_param = ext_param
    P.policy = policy
    P.best_arm = best_arm
    P.gamma = gamma
    P.tau = tau
    P.n = n
    P.p = p
    P.log_horizon = log(<double>horizon)

    cdef bitgen_t** gens = <bitgen_t**> malloc(R * sizeof(bitgen_t*))
    if gens == NULL:
        raise MemoryError()
    try:
        for r in range(R):
            gens[r] = <bitgen_t*> PyCapsule_GetPointer(bitgens[r].capsule, "BitGenerator")
        with nogil:
            for r in range(R):
                if with_traj:
                    run_one(&P, &mu[0], &theta[0], gens[r], &S[r, 0], &Tn[r, 0],
                            &elim[r, 0], &ev[r, 0], &samples[0] if nsamples > 0 else dummy,
                            nsamples, &traj_gamma[r, 0], &traj_s[r, 0])
                else:
                    run_one(&P, &mu[0], &theta[0], gens[r], &S[r, 0], &Tn[r, 0],
                            &elim[r, 0], &ev[r, 0], dummy, 0, dummy, dummy)
    finally:
        free(gens)
