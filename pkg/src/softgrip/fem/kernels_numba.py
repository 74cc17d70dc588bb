"""Hot simulation kernels, numba path.

One call advances a full recorded frame (n_sub explicit substeps).
Everything is flat float64/int arrays so the same signature works for
the pure-numpy twin in kernels_numpy.py; softgrip.backend picks which
module the simulator imports.
"""

import numpy as np
from numba import njit

# out[] slots written by advance_frame
OUT_FORCE = 0        # 0:3  gripper->object contact force, world
OUT_TORQUE = 3       # 3:6  torque about object CoM
OUT_GRIP_CONTACT = 6
OUT_GROUND_CONTACT = 7
OUT_SIZE = 8


@njit(cache=True, inline="always")
def _quat_rotate(qw, qx, qy, qz, px, py, pz):
    # p' = q p q*
    tx = 2.0 * (qy * pz - qz * py)
    ty = 2.0 * (qz * px - qx * pz)
    tz = 2.0 * (qx * py - qy * px)
    rx = px + qw * tx + (qy * tz - qz * ty)
    ry = py + qw * ty + (qz * tx - qx * tz)
    rz = pz + qw * tz + (qx * ty - qy * tx)
    return rx, ry, rz


@njit(cache=True, inline="always")
def _quat_rotate_inv(qw, qx, qy, qz, px, py, pz):
    return _quat_rotate(qw, -qx, -qy, -qz, px, py, pz)


@njit(cache=True, inline="always")
def _sdf_local(kind, params, grid, grid_lo, grid_sp, px, py, pz):
    """Signed distance and outward normal in the shape's local frame."""
    if kind == 0:  # sphere
        r = params[0]
        d = np.sqrt(px * px + py * py + pz * pz)
        if d < 1e-12:
            return -r, 0.0, 1.0, 0.0
        return d - r, px / d, py / d, pz / d
    if kind == 1:  # box
        hx, hy, hz = params[0], params[1], params[2]
        qx = abs(px) - hx
        qy = abs(py) - hy
        qz = abs(pz) - hz
        sx = 1.0 if px >= 0 else -1.0
        sy = 1.0 if py >= 0 else -1.0
        sz = 1.0 if pz >= 0 else -1.0
        if qx > 0.0 or qy > 0.0 or qz > 0.0:
            ox = qx if qx > 0.0 else 0.0
            oy = qy if qy > 0.0 else 0.0
            oz = qz if qz > 0.0 else 0.0
            d = np.sqrt(ox * ox + oy * oy + oz * oz)
            return d, sx * ox / d, sy * oy / d, sz * oz / d
        m = qx
        if qy > m:
            m = qy
        if qz > m:
            m = qz
        if m == qx:
            return m, sx, 0.0, 0.0
        if m == qy:
            return m, 0.0, sy, 0.0
        return m, 0.0, 0.0, sz
    if kind == 2:  # cylinder, axis local y
        r, hh = params[0], params[1]
        rad = np.sqrt(px * px + pz * pz)
        dr = rad - r
        dy = abs(py) - hh
        sy = 1.0 if py >= 0 else -1.0
        if dr > 0.0 and dy > 0.0:
            d = np.sqrt(dr * dr + dy * dy)
            nx = px / rad * dr / d
            nz = pz / rad * dr / d
            return d, nx, sy * dy / d, nz
        if dr > dy:
            if rad < 1e-12:
                return dr, 1.0, 0.0, 0.0
            return dr, px / rad, 0.0, pz / rad
        return dy, 0.0, sy, 0.0
    if kind == 3:  # capsule, axis local y
        r, hh = params[0], params[1]
        cy = py
        if cy > hh:
            cy = hh
        elif cy < -hh:
            cy = -hh
        dy = py - cy
        d = np.sqrt(px * px + dy * dy + pz * pz)
        if d < 1e-12:
            return -r, 0.0, 1.0, 0.0
        return d - r, px / d, dy / d, pz / d
    # kind == 4: trilinear grid
    nx_, ny_, nz_ = grid.shape
    fx = (px - grid_lo[0]) / grid_sp[0]
    fy = (py - grid_lo[1]) / grid_sp[1]
    fz = (pz - grid_lo[2]) / grid_sp[2]
    if fx < 0.0:
        fx = 0.0
    elif fx > nx_ - 1.001:
        fx = nx_ - 1.001
    if fy < 0.0:
        fy = 0.0
    elif fy > ny_ - 1.001:
        fy = ny_ - 1.001
    if fz < 0.0:
        fz = 0.0
    elif fz > nz_ - 1.001:
        fz = nz_ - 1.001
    i, j, k = int(fx), int(fy), int(fz)
    ax, ay, az = fx - i, fy - j, fz - k
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
    d = c0 * (1 - az) + c1 * az
    gx = ((c100 - c000) * (1 - ay) + (c110 - c010) * ay) * (1 - az) \
        + ((c101 - c001) * (1 - ay) + (c111 - c011) * ay) * az
    gy = ((c010 - c000) * (1 - ax) + (c110 - c100) * ax) * (1 - az) \
        + ((c011 - c001) * (1 - ax) + (c111 - c101) * ax) * az
    gz = (c01 - c00) * (1 - ay) + (c11 - c10) * ay
    gx /= grid_sp[0]
    gy /= grid_sp[1]
    gz /= grid_sp[2]
    gn = np.sqrt(gx * gx + gy * gy + gz * gz)
    if gn < 1e-12:
        return d, 0.0, 1.0, 0.0
    return d, gx / gn, gy / gn, gz / gn


@njit(cache=True, nogil=True)
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
    n_v = x.shape[0]
    n_t = tets.shape[0]
    n_fingers = wp_vidx.shape[0] // n_wp if n_wp > 0 else 0
    decay = np.exp(-damping * dt)
    obj_decay = np.exp(-obj_damping * dt)

    for _sub in range(n_sub):
        last = _sub == n_sub - 1
        for i in range(n_v):
            fbuf[i, 0] = 0.0
            fbuf[i, 1] = mass[i] * gy
            fbuf[i, 2] = 0.0

        # elastic: stable neo-Hookean, P = mu F + lam_s (J - alpha) cof(F)
        for t in range(n_t):
            i0, i1, i2, i3 = tets[t, 0], tets[t, 1], tets[t, 2], tets[t, 3]
            d00 = x[i1, 0] - x[i0, 0]
            d10 = x[i1, 1] - x[i0, 1]
            d20 = x[i1, 2] - x[i0, 2]
            d01 = x[i2, 0] - x[i0, 0]
            d11 = x[i2, 1] - x[i0, 1]
            d21 = x[i2, 2] - x[i0, 2]
            d02 = x[i3, 0] - x[i0, 0]
            d12 = x[i3, 1] - x[i0, 1]
            d22 = x[i3, 2] - x[i0, 2]
            b = bm[t]
            f00 = d00 * b[0, 0] + d01 * b[1, 0] + d02 * b[2, 0]
            f01 = d00 * b[0, 1] + d01 * b[1, 1] + d02 * b[2, 1]
            f02 = d00 * b[0, 2] + d01 * b[1, 2] + d02 * b[2, 2]
            f10 = d10 * b[0, 0] + d11 * b[1, 0] + d12 * b[2, 0]
            f11 = d10 * b[0, 1] + d11 * b[1, 1] + d12 * b[2, 1]
            f12 = d10 * b[0, 2] + d11 * b[1, 2] + d12 * b[2, 2]
            f20 = d20 * b[0, 0] + d21 * b[1, 0] + d22 * b[2, 0]
            f21 = d20 * b[0, 1] + d21 * b[1, 1] + d22 * b[2, 1]
            f22 = d20 * b[0, 2] + d21 * b[1, 2] + d22 * b[2, 2]
            # cofactor matrix cof_ij = dJ/dF_ij
            c00 = f11 * f22 - f12 * f21
            c01 = f12 * f20 - f10 * f22
            c02 = f10 * f21 - f11 * f20
            c10 = f21 * f02 - f22 * f01
            c11 = f22 * f00 - f20 * f02
            c12 = f20 * f01 - f21 * f00
            c20 = f01 * f12 - f02 * f11
            c21 = f02 * f10 - f00 * f12
            c22 = f00 * f11 - f01 * f10
            jdet = f00 * c00 + f10 * c10 + f20 * c20
            s = lam_s[t] * (jdet - alpha[t])
            m_ = mu[t]
            p00 = m_ * f00 + s * c00
            p01 = m_ * f01 + s * c01
            p02 = m_ * f02 + s * c02
            p10 = m_ * f10 + s * c10
            p11 = m_ * f11 + s * c11
            p12 = m_ * f12 + s * c12
            p20 = m_ * f20 + s * c20
            p21 = m_ * f21 + s * c21
            p22 = m_ * f22 + s * c22
            vw = vol0[t]
            h00 = -vw * (p00 * b[0, 0] + p01 * b[0, 1] + p02 * b[0, 2])
            h10 = -vw * (p10 * b[0, 0] + p11 * b[0, 1] + p12 * b[0, 2])
            h20 = -vw * (p20 * b[0, 0] + p21 * b[0, 1] + p22 * b[0, 2])
            h01 = -vw * (p00 * b[1, 0] + p01 * b[1, 1] + p02 * b[1, 2])
            h11 = -vw * (p10 * b[1, 0] + p11 * b[1, 1] + p12 * b[1, 2])
            h21 = -vw * (p20 * b[1, 0] + p21 * b[1, 1] + p22 * b[1, 2])
            h02 = -vw * (p00 * b[2, 0] + p01 * b[2, 1] + p02 * b[2, 2])
            h12 = -vw * (p10 * b[2, 0] + p11 * b[2, 1] + p12 * b[2, 2])
            h22 = -vw * (p20 * b[2, 0] + p21 * b[2, 1] + p22 * b[2, 2])
            fbuf[i1, 0] += h00
            fbuf[i1, 1] += h10
            fbuf[i1, 2] += h20
            fbuf[i2, 0] += h01
            fbuf[i2, 1] += h11
            fbuf[i2, 2] += h21
            fbuf[i3, 0] += h02
            fbuf[i3, 1] += h12
            fbuf[i3, 2] += h22
            fbuf[i0, 0] -= h00 + h01 + h02
            fbuf[i0, 1] -= h10 + h11 + h12
            fbuf[i0, 2] -= h20 + h21 + h22

        # tendon loads: per segment, projected pull upstream + axial
        # reaction downstream; the tip keeps only the reaction (-f_T n).
        if tension > 0.0 and n_wp > 1:
            for f in range(n_fingers):
                base = f * n_wp
                for i in range(n_wp - 1):
                    ia = wp_vidx[base + i]
                    ib = wp_vidx[base + i + 1]
                    sx = x[ib, 0] - x[ia, 0]
                    sy = x[ib, 1] - x[ia, 1]
                    sz = x[ib, 2] - x[ia, 2]
                    sl = np.sqrt(sx * sx + sy * sy + sz * sz)
                    if sl < 1e-9:
                        continue
                    tx = tension * sx / sl
                    ty = tension * sy / sl
                    tz = tension * sz / sl
                    t0 = wp_tris[base + i, 0]
                    if t0 >= 0:
                        t1 = wp_tris[base + i, 1]
                        t2 = wp_tris[base + i, 2]
                        e1x = x[t1, 0] - x[t0, 0]
                        e1y = x[t1, 1] - x[t0, 1]
                        e1z = x[t1, 2] - x[t0, 2]
                        e2x = x[t2, 0] - x[t0, 0]
                        e2y = x[t2, 1] - x[t0, 1]
                        e2z = x[t2, 2] - x[t0, 2]
                        nx_ = e1y * e2z - e1z * e2y
                        ny_ = e1z * e2x - e1x * e2z
                        nz_ = e1x * e2y - e1y * e2x
                        nl = np.sqrt(nx_ * nx_ + ny_ * ny_ + nz_ * nz_)
                        if nl > 1e-12:
                            nx_ /= nl
                            ny_ /= nl
                            nz_ /= nl
                        else:
                            nx_, ny_, nz_ = 0.0, 0.0, 0.0
                    else:
                        nx_ = wp_normals[base + i, 0]
                        ny_ = wp_normals[base + i, 1]
                        nz_ = wp_normals[base + i, 2]
                    dot = nx_ * tx + ny_ * ty + nz_ * tz
                    fbuf[ia, 0] += tx - dot * nx_
                    fbuf[ia, 1] += ty - dot * ny_
                    fbuf[ia, 2] += tz - dot * nz_
                    fbuf[ib, 0] -= tx
                    fbuf[ib, 1] -= ty
                    fbuf[ib, 2] -= tz

        # object contact state
        qw, qx_, qy_, qz_ = obj_quat[0], obj_quat[1], obj_quat[2], obj_quat[3]
        cx, cy_, cz = _quat_rotate(qw, qx_, qy_, qz_, obj_com_local[0],
                                   obj_com_local[1], obj_com_local[2])
        comx = obj_pos[0] + cx
        comy = obj_pos[1] + cy_
        comz = obj_pos[2] + cz
        ofx = 0.0
        ofy = 0.0
        ofz = 0.0
        otx = 0.0
        oty = 0.0
        otz = 0.0
        gcontact = 0.0
        groundc = 0.0
        wfx = 0.0
        wfy = 0.0
        wfz = 0.0
        wtx = 0.0
        wty = 0.0
        wtz = 0.0

        for si in range(surf_vidx.shape[0]):
            vi = surf_vidx[si]
            px, py, pz = x[vi, 0], x[vi, 1], x[vi, 2]
            # gripper vs object
            if obj_kind >= 0:
                lx, ly, lz = _quat_rotate_inv(
                    qw, qx_, qy_, qz_,
                    px - obj_pos[0], py - obj_pos[1], pz - obj_pos[2])
                d, nlx, nly, nlz = _sdf_local(obj_kind, obj_params, grid,
                                              grid_lo, grid_sp, lx, ly, lz)
                if d < 0.0:
                    nwx, nwy, nwz = _quat_rotate(qw, qx_, qy_, qz_,
                                                 nlx, nly, nlz)
                    rx = px - comx
                    ry = py - comy
                    rz = pz - comz
                    vox = obj_v[0] + obj_w[1] * rz - obj_w[2] * ry
                    voy = obj_v[1] + obj_w[2] * rx - obj_w[0] * rz
                    voz = obj_v[2] + obj_w[0] * ry - obj_w[1] * rx
                    rvx = v[vi, 0] - vox
                    rvy = v[vi, 1] - voy
                    rvz = v[vi, 2] - voz
                    vn = rvx * nwx + rvy * nwy + rvz * nwz
                    cn = contact_damp[0]
                    if vert_damp_cap[vi] < cn:
                        cn = vert_damp_cap[vi]
                    fn = -k_contact * d - cn * vn
                    if fn > 0.0:
                        gcontact = 1.0
                        vtx = rvx - vn * nwx
                        vty = rvy - vn * nwy
                        vtz = rvz - vn * nwz
                        vt = np.sqrt(vtx * vtx + vty * vty + vtz * vtz)
                        fx_ = fn * nwx
                        fy_ = fn * nwy
                        fz_ = fn * nwz
                        if vt > 1e-10:
                            ct = contact_damp[1]
                            if vert_damp_cap[vi] < ct:
                                ct = vert_damp_cap[vi]
                            ft = ct * vt
                            cap = mu_friction * fn
                            if ft > cap:
                                ft = cap
                            fx_ -= ft * vtx / vt
                            fy_ -= ft * vty / vt
                            fz_ -= ft * vtz / vt
                        fbuf[vi, 0] += fx_
                        fbuf[vi, 1] += fy_
                        fbuf[vi, 2] += fz_
                        ofx -= fx_
                        ofy -= fy_
                        ofz -= fz_
                        otx -= ry * fz_ - rz * fy_
                        oty -= rz * fx_ - rx * fz_
                        otz -= rx * fy_ - ry * fx_
                        if last:
                            wfx -= fx_
                            wfy -= fy_
                            wfz -= fz_
                            wtx -= ry * fz_ - rz * fy_
                            wty -= rz * fx_ - rx * fz_
                            wtz -= rx * fy_ - ry * fx_
            # gripper vs ground plane y=0
            if vert_ground_on and py < 0.0:
                vn = v[vi, 1]
                cn = contact_damp[2]
                if vert_damp_cap[vi] < cn:
                    cn = vert_damp_cap[vi]
                fn = -k_contact * py - cn * vn
                if fn > 0.0:
                    fbuf[vi, 1] += fn
                    vtx = v[vi, 0]
                    vtz = v[vi, 2]
                    vt = np.sqrt(vtx * vtx + vtz * vtz)
                    if vt > 1e-10:
                        ct = contact_damp[3]
                        if vert_damp_cap[vi] < ct:
                            ct = vert_damp_cap[vi]
                        ft = ct * vt
                        cap = mu_friction * fn
                        if ft > cap:
                            ft = cap
                        fbuf[vi, 0] -= ft * vtx / vt
                        fbuf[vi, 2] -= ft * vtz / vt

        # object vs ground plane
        if obj_kind >= 0:
            for si in range(obj_samples.shape[0]):
                sx_, sy_, sz_ = _quat_rotate(qw, qx_, qy_, qz_,
                                             obj_samples[si, 0],
                                             obj_samples[si, 1],
                                             obj_samples[si, 2])
                sx_ += obj_pos[0]
                sy_ += obj_pos[1]
                sz_ += obj_pos[2]
                if sy_ < 0.0:
                    rx = sx_ - comx
                    ry = sy_ - comy
                    rz = sz_ - comz
                    vox = obj_v[0] + obj_w[1] * rz - obj_w[2] * ry
                    voy = obj_v[1] + obj_w[2] * rx - obj_w[0] * rz
                    voz = obj_v[2] + obj_w[0] * ry - obj_w[1] * rx
                    fn = -k_contact * sy_ - contact_damp[4] * voy
                    if fn > 0.0:
                        groundc = 1.0
                        fx_ = 0.0
                        fy_ = fn
                        fz_ = 0.0
                        vt = np.sqrt(vox * vox + voz * voz)
                        if vt > 1e-10:
                            ft = contact_damp[5] * vt
                            cap = mu_friction * fn
                            if ft > cap:
                                ft = cap
                            fx_ = -ft * vox / vt
                            fz_ = -ft * voz / vt
                        ofx += fx_
                        ofy += fy_
                        ofz += fz_
                        otx += ry * fz_ - rz * fy_
                        oty += rz * fx_ - rx * fz_
                        otz += rx * fy_ - ry * fx_

        # integrate gripper vertices (semi-implicit)
        for i in range(n_v):
            if inv_mass[i] == 0.0:
                v[i, 0] = 0.0
                v[i, 1] = base_vy
                v[i, 2] = 0.0
            else:
                v[i, 0] = v[i, 0] * decay + dt * fbuf[i, 0] * inv_mass[i]
                v[i, 1] = v[i, 1] * decay + dt * fbuf[i, 1] * inv_mass[i]
                v[i, 2] = v[i, 2] * decay + dt * fbuf[i, 2] * inv_mass[i]
            x[i, 0] += dt * v[i, 0]
            x[i, 1] += dt * v[i, 1]
            x[i, 2] += dt * v[i, 2]

        # integrate object
        if obj_kind >= 0 and obj_mass > 0.0:
            ofy += obj_ext_fy + obj_mass * gy
            inv_m = 1.0 / obj_mass
            obj_v[0] = obj_v[0] * obj_decay + dt * ofx * inv_m
            obj_v[1] = obj_v[1] * obj_decay + dt * ofy * inv_m
            obj_v[2] = obj_v[2] * obj_decay + dt * ofz * inv_m
            # world-frame inverse inertia: R I_b^-1 R^T applied to torque
            tlx, tly, tlz = _quat_rotate_inv(qw, qx_, qy_, qz_, otx, oty, otz)
            alx = (obj_inv_inertia_body[0, 0] * tlx
                   + obj_inv_inertia_body[0, 1] * tly
                   + obj_inv_inertia_body[0, 2] * tlz)
            aly = (obj_inv_inertia_body[1, 0] * tlx
                   + obj_inv_inertia_body[1, 1] * tly
                   + obj_inv_inertia_body[1, 2] * tlz)
            alz = (obj_inv_inertia_body[2, 0] * tlx
                   + obj_inv_inertia_body[2, 1] * tly
                   + obj_inv_inertia_body[2, 2] * tlz)
            awx, awy, awz = _quat_rotate(qw, qx_, qy_, qz_, alx, aly, alz)
            obj_w[0] = obj_w[0] * obj_decay + dt * awx
            obj_w[1] = obj_w[1] * obj_decay + dt * awy
            obj_w[2] = obj_w[2] * obj_decay + dt * awz
            obj_pos[0] += dt * obj_v[0]
            obj_pos[1] += dt * obj_v[1]
            obj_pos[2] += dt * obj_v[2]
            hw = 0.5 * dt
            dqw = -hw * (obj_w[0] * qx_ + obj_w[1] * qy_ + obj_w[2] * qz_)
            dqx = hw * (obj_w[0] * qw + obj_w[1] * qz_ - obj_w[2] * qy_)
            dqy = hw * (obj_w[1] * qw + obj_w[2] * qx_ - obj_w[0] * qz_)
            dqz = hw * (obj_w[2] * qw + obj_w[0] * qy_ - obj_w[1] * qx_)
            nqw = qw + dqw
            nqx = qx_ + dqx
            nqy = qy_ + dqy
            nqz = qz_ + dqz
            qn = np.sqrt(nqw * nqw + nqx * nqx + nqy * nqy + nqz * nqz)
            obj_quat[0] = nqw / qn
            obj_quat[1] = nqx / qn
            obj_quat[2] = nqy / qn
            obj_quat[3] = nqz / qn

        if last:
            out[OUT_FORCE] = wfx
            out[OUT_FORCE + 1] = wfy
            out[OUT_FORCE + 2] = wfz
            out[OUT_TORQUE] = wtx
            out[OUT_TORQUE + 1] = wty
            out[OUT_TORQUE + 2] = wtz
            out[OUT_GRIP_CONTACT] = gcontact
            out[OUT_GROUND_CONTACT] = groundc
