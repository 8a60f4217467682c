"""Pure-Python stepping kernel.

Reference twin of the compiled kernel in `_stepcore.pyx`: one call performs,
for every particle, the advance along the graph (with equal-probability
splitting at junctions), the yaw and target-speed filter mean updates, the
target-speed feasibility projection and the likelihood weighting. The two
implementations must stay line-for-line equivalent; every arithmetic
operation happens in the same order so results are bit-identical.

Population-level work (weight redistribution, elimination, resampling,
merging) stays in the filter layer and draws no randomness here.
"""

from __future__ import annotations

import math

DEG2RAD = math.pi / 180.0
STACK_CAP = 4096


def _wrap180(x):
    return (x + 180.0) % 360.0 - 180.0


def step_particles(
    # graph arrays
    link_len, link_bear, link_limit, link_to, link_rev, adj_start, adj_link,
    # particle arrays, length n
    p_link, p_ratio, p_theta, p_omega, p_sbar, p_w, p_group, p_odo,
    # step inputs
    dist, dt, a_k, s_k, have_y2, y2_val,
    yk0, yk1, sgain,
    g1, g2, gain_c, cauchy_sigma, proj_margin,
    group_base,
    # outputs, capacity len(o_link); lost buffers, capacity len(lost_w)
    o_link, o_ratio, o_theta, o_omega, o_sbar, o_w, o_wpre, o_group, o_parent, o_odo,
    lost_group, lost_w,
):
    """Run phases 1-3 of a filter step. Returns (n_out, n_lost, n_groups).

    Returns (-1, 0, 0) if an output buffer is too small; the caller grows
    the buffers and retries. Output order is deterministic.
    """
    n = len(p_link)
    cap = len(o_link)
    lost_cap = len(lost_w)
    bound = g1 - proj_margin
    ramp = g1 - g2
    n_out = 0
    n_lost = 0
    n_groups = 0

    st_link = [0] * STACK_CAP
    st_ratio = [0.0] * STACK_CAP
    st_left = [0.0] * STACK_CAP
    st_prob = [0.0] * STACK_CAP
    st_group = [0] * STACK_CAP
    st_cons = [0.0] * STACK_CAP

    for i in range(n):
        sp = 0
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
                # leaf: finish the advance on this link
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
                if abs(a_k) >= bound:
                    sb = 0.0
                else:
                    if sb < 0.0:
                        sb = 0.0
                    w_abs = abs(om_rad)
                    if w_abs >= 1e-15:
                        s_max = math.sqrt(bound * bound - a_k * a_k) / w_abs
                        if sb > s_max:
                            sb = s_max

                sw = s_k * om_rad
                y1 = math.sqrt(a_k * a_k + sw * sw)
                if y1 < g1:
                    f1 = 1.0
                elif y1 < g2:
                    f1 = (y1 - g2) / ramp
                else:
                    f1 = 0.0
                if have_y2:
                    z = (y2_val - gain_c * sb) / cauchy_sigma
                    f2 = 1.0 / (math.pi * cauchy_sigma * (1.0 + z * z))
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
                o_parent[n_out] = i
                o_odo[n_out] = p_odo[i] + cons_f
                n_out += 1
                continue

            # cross the junction at the end of this link
            left2 = left - remaining
            cons2 = cons + remaining
            node = link_to[link]
            rev = link_rev[link]
            a0 = adj_start[node]
            a1 = adj_start[node + 1]
            n_cont = 0
            for j in range(a0, a1):
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
            for j in range(a0, a1):
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
