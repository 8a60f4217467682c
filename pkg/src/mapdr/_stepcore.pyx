# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernel.

Line-for-line twin of `stepcore_py.step_particles`; see that module for the
contract. Arithmetic order matches the Python implementation exactly so the
two backends produce bit-identical floats (keep -ffast-math out of the
build flags).
"""

from libc.math cimport fabs, fmod, sqrt

import numpy as np

cimport numpy as cnp

cdef double PI = 3.141592653589793
cdef double DEG2RAD = PI / 180.0
cdef int STACK_CAP = 4096


cdef inline double _wrap180(double x) noexcept nogil:
    # Matches Python's (x + 180.0) % 360.0 - 180.0 including negative inputs.
    cdef double r = fmod(x + 180.0, 360.0)
    if r < 0.0:
        r += 360.0
    return r - 180.0


def step_particles(
    const double[:] link_len, const double[:] link_bear, const double[:] link_limit,
    const cnp.int32_t[:] link_to, const cnp.int32_t[:] link_rev,
    const cnp.int32_t[:] adj_start, const cnp.int32_t[:] adj_link,
    const cnp.int32_t[:] p_link, const double[:] p_ratio,
    const double[:] p_theta, const double[:] p_omega, const double[:] p_sbar,
    const double[:] p_w, const cnp.int64_t[:] p_group, const double[:] p_odo,
    double dist, double dt, double a_k, double s_k, int have_y2, double y2_val,
    double yk0, double yk1, double sgain,
    double g1, double g2, double gain_c, double cauchy_sigma, double proj_margin,
    long long group_base,
    cnp.int32_t[:] o_link, double[:] o_ratio, double[:] o_theta, double[:] o_omega,
    double[:] o_sbar, double[:] o_w, double[:] o_wpre, cnp.int64_t[:] o_group,
    cnp.int32_t[:] o_parent, double[:] o_odo,
    cnp.int64_t[:] lost_group, double[:] lost_w,
):
    cdef Py_ssize_t n = p_link.shape[0]
    cdef Py_ssize_t cap = o_link.shape[0]
    cdef Py_ssize_t lost_cap = lost_w.shape[0]
    cdef double bound = g1 - proj_margin
    cdef double ramp = g1 - g2
    cdef Py_ssize_t n_out = 0
    cdef Py_ssize_t n_lost = 0
    cdef long long n_groups = 0

    cdef cnp.int32_t[::1] st_link = np.empty(STACK_CAP, dtype=np.int32)
    cdef double[::1] st_ratio = np.empty(STACK_CAP, dtype=np.float64)
    cdef double[::1] st_left = np.empty(STACK_CAP, dtype=np.float64)
    cdef double[::1] st_prob = np.empty(STACK_CAP, dtype=np.float64)
    cdef cnp.int64_t[::1] st_group = np.empty(STACK_CAP, dtype=np.int64)
    cdef double[::1] st_cons = np.empty(STACK_CAP, dtype=np.float64)

    cdef Py_ssize_t i, sp, j
    cdef int link, rev, node, n_cont
    cdef cnp.int32_t nxt
    cdef long long grp, gid
    cdef double ratio, left, prob, cons, length, remaining, out_ratio, cons_f
    cdef double wpre, th, om, nu, sb, om_rad, w_abs, s_max, sw, y1, f1, f2, z
    cdef double left2, cons2, share

    for i in range(n):
        st_link[0] = p_link[i]
        st_ratio[0] = p_ratio[i]
        st_left[0] = dist
        st_prob[0] = 1.0
        st_group[0] = p_group[i]
        st_cons[0] = 0.0
        sp = 1
        while sp > 0:
            sp -= 1
            link = st_link[sp]
            ratio = st_ratio[sp]
            left = st_left[sp]
            prob = st_prob[sp]
            grp = st_group[sp]
            cons = st_cons[sp]

            length = link_len[link]
            remaining = (1.0 - ratio) * length
            if left < remaining or left == 0.0:
                out_ratio = ratio + left / length
                if out_ratio > 1.0:
                    out_ratio = 1.0
                cons_f = cons + (out_ratio - ratio) * length
                if n_out >= cap:
                    return -1, 0, 0
                wpre = p_w[i] * prob

                th = _wrap180(p_theta[i] + dt * p_omega[i])
                om = p_omega[i]
                nu = _wrap180(link_bear[link] - th)
                th = _wrap180(th + yk0 * nu)
                om = om + yk1 * nu

                sb = p_sbar[i] + sgain * (link_limit[link] - p_sbar[i])
                om_rad = om * DEG2RAD
                if fabs(a_k) >= bound:
                    sb = 0.0
                else:
                    if sb < 0.0:
                        sb = 0.0
                    w_abs = fabs(om_rad)
                    if w_abs >= 1e-15:
                        s_max = sqrt(bound * bound - a_k * a_k) / w_abs
                        if sb > s_max:
                            sb = s_max

                sw = s_k * om_rad
                y1 = sqrt(a_k * a_k + sw * sw)
                if y1 < g1:
                    f1 = 1.0
                elif y1 < g2:
                    f1 = (y1 - g2) / ramp
                else:
                    f1 = 0.0
                if have_y2:
                    z = (y2_val - gain_c * sb) / cauchy_sigma
                    f2 = 1.0 / (PI * cauchy_sigma * (1.0 + z * z))
                else:
                    f2 = 1.0

                o_link[n_out] = link
                o_ratio[n_out] = out_ratio
                o_theta[n_out] = th
                o_omega[n_out] = om
                o_sbar[n_out] = sb
                o_w[n_out] = wpre * f1 * f2
                o_wpre[n_out] = wpre
                o_group[n_out] = grp
                o_parent[n_out] = <cnp.int32_t> i
                o_odo[n_out] = p_odo[i] + cons_f
                n_out += 1
                continue

            left2 = left - remaining
            cons2 = cons + remaining
            node = link_to[link]
            rev = link_rev[link]
            n_cont = 0
            for j in range(adj_start[node], adj_start[node + 1]):
                if adj_link[j] != rev:
                    n_cont += 1
            if n_cont == 0:
                if n_lost >= lost_cap:
                    return -1, 0, 0
                lost_group[n_lost] = grp
                lost_w[n_lost] = p_w[i] * prob
                n_lost += 1
                continue
            gid = group_base + n_groups
            n_groups += 1
            share = prob / n_cont
            for j in range(adj_start[node], adj_start[node + 1]):
                nxt = adj_link[j]
                if nxt == rev:
                    continue
                if sp >= STACK_CAP:
                    raise RuntimeError("advance stack overflow")
                st_link[sp] = nxt
                st_ratio[sp] = 0.0
                st_left[sp] = left2
                st_prob[sp] = share
                st_group[sp] = gid
                st_cons[sp] = cons2
                sp += 1

    return n_out, n_lost, n_groups
