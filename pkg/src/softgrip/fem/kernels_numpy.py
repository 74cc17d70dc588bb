"""Pure-numpy twin of kernels_numba.advance_frame.

Vectorized over tets/vertices with the substep loop in Python.  Much
slower than the numba path but dependency-free; selected with
SOFTGRIP_BACKEND=numpy.  The two paths agree to floating-point
round-off (see tests/test_backends.py).
"""

import numpy as np

OUT_FORCE = 0
OUT_TORQUE = 3
OUT_GRIP_CONTACT = 6
OUT_GROUND_CONTACT = 7
OUT_SIZE = 8


def _quat_rotate_vec(q, p):
    w = q[0]
    u = q[1:]
    t = 2.0 * np.cross(u, p)
    return p + w * t + np.cross(u, t)


def _quat_rotate_batch(q, pts):
    w = q[0]
    u = q[1:]
    t = 2.0 * np.cross(u[None, :], pts)
    return pts + w * t + np.cross(u[None, :], t)


def _quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def _sdf_local_batch(kind, params, grid, grid_lo, grid_sp, pts):
    """Distances and outward local normals for a batch of local points."""
    n = len(pts)
    d = np.empty(n)
    nrm = np.zeros((n, 3))
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    if kind == 0:
        r = params[0]
        dist = np.sqrt(x * x + y * y + z * z)
        d[:] = dist - r
        safe = dist > 1e-12
        nrm[safe] = pts[safe] / dist[safe, None]
        nrm[~safe] = (0, 1, 0)
    elif kind == 1:
        h = params[:3]
        q = np.abs(pts) - h
        s = np.where(pts >= 0, 1.0, -1.0)
        qp = np.maximum(q, 0.0)
        outside = np.linalg.norm(qp, axis=1)
        out_mask = outside > 0
        d[:] = outside + np.minimum(q.max(axis=1), 0.0)
        nrm[out_mask] = s[out_mask] * qp[out_mask] / outside[out_mask, None]
        inm = ~out_mask
        ax = q[inm].argmax(axis=1)
        rows = np.where(inm)[0]
        nrm[rows, ax] = s[rows, ax]
    elif kind == 2:
        r, hh = params[0], params[1]
        rad = np.sqrt(x * x + z * z)
        dr = rad - r
        dy = np.abs(y) - hh
        sy = np.where(y >= 0, 1.0, -1.0)
        corner = (dr > 0) & (dy > 0)
        dd = np.sqrt(np.maximum(dr, 0) ** 2 + np.maximum(dy, 0) ** 2)
        d[:] = np.where(corner, dd, np.maximum(dr, dy))
        safe_rad = np.maximum(rad, 1e-12)
        radial = np.stack([x / safe_rad, np.zeros(n), z / safe_rad], axis=1)
        nrm[:] = np.where((dr > dy)[:, None], radial, 0.0)
        nrm[:, 1] = np.where(dr > dy, 0.0, sy)
        cd = np.maximum(dd, 1e-12)
        cn = radial * (np.maximum(dr, 0) / cd)[:, None]
        cn[:, 1] = sy * np.maximum(dy, 0) / cd
        nrm[corner] = cn[corner]
    elif kind == 3:
        r, hh = params[0], params[1]
        cy = np.clip(y, -hh, hh)
        off = np.stack([x, y - cy, z], axis=1)
        dist = np.linalg.norm(off, axis=1)
        d[:] = dist - r
        safe = dist > 1e-12
        nrm[safe] = off[safe] / dist[safe, None]
        nrm[~safe] = (0, 1, 0)
    else:
        res = np.array(grid.shape)
        f = (pts - grid_lo) / grid_sp
        f = np.clip(f, 0.0, res - 1.001)
        idx = f.astype(np.int64)
        a = f - idx
        i, j, k = idx[:, 0], idx[:, 1], idx[:, 2]
        ax, ay, az = a[:, 0], a[:, 1], a[:, 2]
        c000 = grid[i, j, k]
        c100 = grid[i + 1, j, k]
        c010 = grid[i, j + 1, k]
        c110 = grid[i + 1, j + 1, k]
        c001 = grid[i, j, k + 1]
        c101 = grid[i + 1, j, k + 1]
        c011 = grid[i, j + 1, k + 1]
        c111 = grid[i + 1, j + 1, k + 1]
        c00 = c000 * (1 - ax) + c100 * ax
        c10 = c010 * (1 - ax) + c110 * ax
        c01 = c001 * (1 - ax) + c101 * ax
        c11 = c011 * (1 - ax) + c111 * ax
        c0 = c00 * (1 - ay) + c10 * ay
        c1 = c01 * (1 - ay) + c11 * ay
        d[:] = c0 * (1 - az) + c1 * az
        gx = (((c100 - c000) * (1 - ay) + (c110 - c010) * ay) * (1 - az)
              + ((c101 - c001) * (1 - ay) + (c111 - c011) * ay) * az)
        gy = (((c010 - c000) * (1 - ax) + (c110 - c100) * ax) * (1 - az)
              + ((c011 - c001) * (1 - ax) + (c111 - c101) * ax) * az)
        gz = (c01 - c00) * (1 - ay) + (c11 - c10) * ay
        g = np.stack([gx, gy, gz], axis=1) / grid_sp
        gl = np.linalg.norm(g, axis=1)
        safe = gl > 1e-12
        nrm[safe] = g[safe] / gl[safe, None]
        nrm[~safe] = (0, 1, 0)
    return d, nrm


def _contact_force(pen_d, n, v_rel, k_contact, c_normal, c_tangent,
                   mu_friction):
    """Penalty + capped viscous friction; never pulls.  c_normal and
    c_tangent may be per-contact arrays."""
    vn = np.einsum("ij,ij->i", v_rel, n)
    fn = -k_contact * pen_d - c_normal * vn
    fn = np.maximum(fn, 0.0)
    vt = v_rel - vn[:, None] * n
    vt_mag = np.linalg.norm(vt, axis=1)
    ft = np.minimum(c_tangent * vt_mag, mu_friction * fn)
    scale = np.where(vt_mag > 1e-10, ft / np.maximum(vt_mag, 1e-300), 0.0)
    return fn[:, None] * n - scale[:, None] * vt, fn


def advance_frame(
    x, v, inv_mass, mass,
    tets, bm, vol0, mu, lam_s, alpha,
    damping, gy, base_vy,
    wp_vidx, wp_tris, wp_normals, n_wp, tension,
    surf_vidx, vert_ground_on,
    obj_kind, obj_params, grid, grid_lo, grid_sp, obj_com_local,
    obj_pos, obj_quat, obj_v, obj_w,
    obj_mass, obj_inv_inertia_body, obj_samples, obj_ext_fy, obj_damping,
    k_contact, contact_damp, vert_damp_cap, mu_friction,
    dt, n_sub,
    fbuf, out,
):
    decay = np.exp(-damping * dt)
    obj_decay = np.exp(-obj_damping * dt)
    kin = inv_mass == 0.0
    free = ~kin
    i0, i1, i2, i3 = tets[:, 0], tets[:, 1], tets[:, 2], tets[:, 3]
    n_fingers = len(wp_vidx) // n_wp if n_wp > 0 else 0

    for sub in range(n_sub):
        last = sub == n_sub - 1
        f = np.zeros_like(x)
        f[:, 1] = mass * gy

        # elastic
        ds = np.stack([x[i1] - x[i0], x[i2] - x[i0], x[i3] - x[i0]], axis=2)
        fg = ds @ bm
        cof = np.empty_like(fg)
        cof[:, :, 0] = np.cross(fg[:, :, 1], fg[:, :, 2], axis=1)
        cof[:, :, 1] = np.cross(fg[:, :, 2], fg[:, :, 0], axis=1)
        cof[:, :, 2] = np.cross(fg[:, :, 0], fg[:, :, 1], axis=1)
        jdet = np.einsum("ti,ti->t", fg[:, :, 0], cof[:, :, 0])
        s = lam_s * (jdet - alpha)
        p = mu[:, None, None] * fg + s[:, None, None] * cof
        h = -vol0[:, None, None] * (p @ np.swapaxes(bm, 1, 2))
        np.add.at(f, i1, h[:, :, 0])
        np.add.at(f, i2, h[:, :, 1])
        np.add.at(f, i3, h[:, :, 2])
        np.add.at(f, i0, -h.sum(axis=2))

        # tendon
        if tension > 0.0 and n_wp > 1:
            for fi in range(n_fingers):
                idx = wp_vidx[fi * n_wp:(fi + 1) * n_wp]
                tris = wp_tris[fi * n_wp:(fi + 1) * n_wp]
                stat = wp_normals[fi * n_wp:(fi + 1) * n_wp]
                p_wp = x[idx]
                seg = p_wp[1:] - p_wp[:-1]
                sl = np.linalg.norm(seg, axis=1)
                ok = sl >= 1e-9
                t_vec = np.zeros_like(seg)
                t_vec[ok] = tension * seg[ok] / sl[ok, None]
                tri_safe = np.maximum(tris[:-1], 0)
                e1 = x[tri_safe[:, 1]] - x[tri_safe[:, 0]]
                e2 = x[tri_safe[:, 2]] - x[tri_safe[:, 0]]
                nrm = np.cross(e1, e2)
                nl = np.linalg.norm(nrm, axis=1)
                good = nl > 1e-12
                nrm[good] /= nl[good, None]
                nrm[~good] = 0.0
                use_static = tris[:-1, 0] < 0
                nrm[use_static] = stat[:-1][use_static]
                dot = np.einsum("ij,ij->i", nrm, t_vec)
                proj = t_vec - dot[:, None] * nrm
                np.add.at(f, idx[:-1], proj)
                np.add.at(f, idx[1:], -t_vec)

        # contacts
        q = obj_quat
        com_w = obj_pos + _quat_rotate_vec(q, obj_com_local)
        obj_force = np.zeros(3)
        obj_torque = np.zeros(3)
        gcontact = 0.0
        groundc = 0.0
        wrench_f = np.zeros(3)
        wrench_t = np.zeros(3)

        xs = x[surf_vidx]
        vs = v[surf_vidx]
        if obj_kind >= 0:
            local = _quat_rotate_batch(_quat_conj(q), xs - obj_pos)
            d, nl_ = _sdf_local_batch(obj_kind, obj_params, grid, grid_lo,
                                      grid_sp, local)
            pen = d < 0.0
            if pen.any():
                pidx = surf_vidx[pen]
                n_w = _quat_rotate_batch(q, nl_[pen])
                r = xs[pen] - com_w
                v_pt = obj_v + np.cross(obj_w, r)
                caps = vert_damp_cap[pidx]
                fc, fn = _contact_force(d[pen], n_w, vs[pen] - v_pt,
                                        k_contact,
                                        np.minimum(contact_damp[0], caps),
                                        np.minimum(contact_damp[1], caps),
                                        mu_friction)
                active = fn > 0.0
                fc[~active] = 0.0
                if active.any():
                    gcontact = 1.0
                np.add.at(f, pidx, fc)
                obj_force -= fc.sum(axis=0)
                tq = -np.cross(r, fc).sum(axis=0)
                obj_torque += tq
                if last:
                    wrench_f = -fc.sum(axis=0)
                    wrench_t = tq
        if vert_ground_on:
            below = xs[:, 1] < 0.0
            if below.any():
                bidx = surf_vidx[below]
                n_g = np.tile([0.0, 1.0, 0.0], (below.sum(), 1))
                caps = vert_damp_cap[bidx]
                fc, fn = _contact_force(xs[below, 1], n_g, vs[below],
                                        k_contact,
                                        np.minimum(contact_damp[2], caps),
                                        np.minimum(contact_damp[3], caps),
                                        mu_friction)
                fc[fn <= 0.0] = 0.0
                np.add.at(f, bidx, fc)

        if obj_kind >= 0 and len(obj_samples):
            sw = _quat_rotate_batch(q, obj_samples) + obj_pos
            below = sw[:, 1] < 0.0
            if below.any():
                r = sw[below] - com_w
                v_pt = obj_v + np.cross(obj_w[None, :], r)
                n_g = np.tile([0.0, 1.0, 0.0], (below.sum(), 1))
                fc, fn = _contact_force(sw[below, 1], n_g, -v_pt, k_contact,
                                        contact_damp[4], contact_damp[5],
                                        mu_friction)
                fc[fn <= 0.0] = 0.0
                if (fn > 0.0).any():
                    groundc = 1.0
                obj_force += fc.sum(axis=0)
                obj_torque += np.cross(r, fc).sum(axis=0)

        # integrate gripper
        v[free] = v[free] * decay + dt * f[free] * inv_mass[free, None]
        v[kin] = (0.0, base_vy, 0.0)
        x += dt * v

        # integrate object
        if obj_kind >= 0 and obj_mass > 0.0:
            obj_force[1] += obj_ext_fy + obj_mass * gy
            obj_v[:] = obj_v * obj_decay + dt * obj_force / obj_mass
            t_local = _quat_rotate_vec(_quat_conj(q), obj_torque)
            a_local = obj_inv_inertia_body @ t_local
            obj_w[:] = obj_w * obj_decay + dt * _quat_rotate_vec(q, a_local)
            obj_pos += dt * obj_v
            w_quat = np.array([0.0, obj_w[0], obj_w[1], obj_w[2]])
            dq = 0.5 * dt * _quat_mul(w_quat, q)
            qn = q + dq
            obj_quat[:] = qn / np.linalg.norm(qn)

        if last:
            out[OUT_FORCE:OUT_FORCE + 3] = wrench_f
            out[OUT_TORQUE:OUT_TORQUE + 3] = wrench_t
            out[OUT_GRIP_CONTACT] = gcontact
            out[OUT_GROUND_CONTACT] = groundc


def _quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])
