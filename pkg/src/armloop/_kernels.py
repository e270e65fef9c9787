"""Numba kernels for the hot numeric paths.

Everything here operates on the packed (n, 28) float64 model array built by
``RobotModel`` (see model.py for the layout) so the compiled code never
touches Python objects. Math is written out component-wise: the recursive
Newton-Euler pass, the kinematic chain, penalty contact, and the fused
simulation step all run millions of times per experiment, so per-call
allocations are kept to a handful of small arrays.

Rotation bookkeeping: each link stores the fixed parent-to-joint rotation;
the joint adds a Rodrigues rotation about the link axis. ``R`` below always
means link-to-parent; multiplying by the transpose maps parent quantities
into the link frame.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def rnea_k(pack, q, v, a, gx, gy, gz, tau_out):
    """Inverse dynamics: joint torques for the motion (q, v, a).

    Gravity enters through a fictitious base acceleration of -g, so the
    returned torques include gravity compensation. External contact is not
    part of this computation.
    """
    n = pack.shape[0]
    Rj = np.empty((n, 9))
    F = np.empty((n, 3))
    N = np.empty((n, 3))

    # parent (base) state in the base frame
    op_x = 0.0
    op_y = 0.0
    op_z = 0.0
    od_x = 0.0
    od_y = 0.0
    od_z = 0.0
    vd_x = -gx
    vd_y = -gy
    vd_z = -gz

    for i in range(n):
        ro00 = pack[i, 3]
        ro01 = pack[i, 4]
        ro02 = pack[i, 5]
        ro10 = pack[i, 6]
        ro11 = pack[i, 7]
        ro12 = pack[i, 8]
        ro20 = pack[i, 9]
        ro21 = pack[i, 10]
        ro22 = pack[i, 11]
        ax = pack[i, 12]
        ay = pack[i, 13]
        az = pack[i, 14]
        c = np.cos(q[i])
        s = np.sin(q[i])
        t = 1.0 - c
        rj00 = c + ax * ax * t
        rj01 = ax * ay * t - az * s
        rj02 = ax * az * t + ay * s
        rj10 = ax * ay * t + az * s
        rj11 = c + ay * ay * t
        rj12 = ay * az * t - ax * s
        rj20 = ax * az * t - ay * s
        rj21 = ay * az * t + ax * s
        rj22 = c + az * az * t
        # R = Ro @ Rq, link i frame -> parent frame
        r00 = ro00 * rj00 + ro01 * rj10 + ro02 * rj20
        r01 = ro00 * rj01 + ro01 * rj11 + ro02 * rj21
        r02 = ro00 * rj02 + ro01 * rj12 + ro02 * rj22
        r10 = ro10 * rj00 + ro11 * rj10 + ro12 * rj20
        r11 = ro10 * rj01 + ro11 * rj11 + ro12 * rj21
        r12 = ro10 * rj02 + ro11 * rj12 + ro12 * rj22
        r20 = ro20 * rj00 + ro21 * rj10 + ro22 * rj20
        r21 = ro20 * rj01 + ro21 * rj11 + ro22 * rj21
        r22 = ro20 * rj02 + ro21 * rj12 + ro22 * rj22
        Rj[i, 0] = r00
        Rj[i, 1] = r01
        Rj[i, 2] = r02
        Rj[i, 3] = r10
        Rj[i, 4] = r11
        Rj[i, 5] = r12
        Rj[i, 6] = r20
        Rj[i, 7] = r21
        Rj[i, 8] = r22

        qd = v[i]
        qdd = a[i]
        # omega of parent expressed in link frame: R^T op
        wx = r00 * op_x + r10 * op_y + r20 * op_z
        wy = r01 * op_x + r11 * op_y + r21 * op_z
        wz = r02 * op_x + r12 * op_y + r22 * op_z
        oix = wx + qd * ax
        oiy = wy + qd * ay
        oiz = wz + qd * az
        # alpha of parent in link frame
        ux = r00 * od_x + r10 * od_y + r20 * od_z
        uy = r01 * od_x + r11 * od_y + r21 * od_z
        uz = r02 * od_x + r12 * od_y + r22 * od_z
        # (R^T op) x (qd a)
        gxx = wy * (qd * az) - wz * (qd * ay)
        gyy = wz * (qd * ax) - wx * (qd * az)
        gzz = wx * (qd * ay) - wy * (qd * ax)
        odix = ux + gxx + qdd * ax
        odiy = uy + gyy + qdd * ay
        odiz = uz + gzz + qdd * az
        # linear acceleration of the link origin
        px = pack[i, 0]
        py = pack[i, 1]
        pz = pack[i, 2]
        t1x = od_y * pz - od_z * py
        t1y = od_z * px - od_x * pz
        t1z = od_x * py - od_y * px
        t2x = op_y * pz - op_z * py
        t2y = op_z * px - op_x * pz
        t2z = op_x * py - op_y * px
        t3x = op_y * t2z - op_z * t2y
        t3y = op_z * t2x - op_x * t2z
        t3z = op_x * t2y - op_y * t2x
        sx = vd_x + t1x + t3x
        sy = vd_y + t1y + t3y
        sz = vd_z + t1z + t3z
        vix = r00 * sx + r10 * sy + r20 * sz
        viy = r01 * sx + r11 * sy + r21 * sz
        viz = r02 * sx + r12 * sy + r22 * sz
        # acceleration of the center of mass
        cx = pack[i, 16]
        cy = pack[i, 17]
        cz = pack[i, 18]
        u1x = odiy * cz - odiz * cy
        u1y = odiz * cx - odix * cz
        u1z = odix * cy - odiy * cx
        u2x = oiy * cz - oiz * cy
        u2y = oiz * cx - oix * cz
        u2z = oix * cy - oiy * cx
        u3x = oiy * u2z - oiz * u2y
        u3y = oiz * u2x - oix * u2z
        u3z = oix * u2y - oiy * u2x
        vcx = vix + u1x + u3x
        vcy = viy + u1y + u3y
        vcz = viz + u1z + u3z
        m = pack[i, 15]
        F[i, 0] = m * vcx
        F[i, 1] = m * vcy
        F[i, 2] = m * vcz
        # N = I alpha + omega x (I omega)
        i00 = pack[i, 19]
        i01 = pack[i, 20]
        i02 = pack[i, 21]
        i10 = pack[i, 22]
        i11 = pack[i, 23]
        i12 = pack[i, 24]
        i20 = pack[i, 25]
        i21 = pack[i, 26]
        i22 = pack[i, 27]
        iwx = i00 * oix + i01 * oiy + i02 * oiz
        iwy = i10 * oix + i11 * oiy + i12 * oiz
        iwz = i20 * oix + i21 * oiy + i22 * oiz
        iax = i00 * odix + i01 * odiy + i02 * odiz
        iay = i10 * odix + i11 * odiy + i12 * odiz
        iaz = i20 * odix + i21 * odiy + i22 * odiz
        N[i, 0] = iax + oiy * iwz - oiz * iwy
        N[i, 1] = iay + oiz * iwx - oix * iwz
        N[i, 2] = iaz + oix * iwy - oiy * iwx

        op_x = oix
        op_y = oiy
        op_z = oiz
        od_x = odix
        od_y = odiy
        od_z = odiz
        vd_x = vix
        vd_y = viy
        vd_z = viz

    # inward force/moment recursion
    fcx = 0.0
    fcy = 0.0
    fcz = 0.0
    ncx = 0.0
    ncy = 0.0
    ncz = 0.0
    for i in range(n - 1, -1, -1):
        if i < n - 1:
            j = i + 1
            r00 = Rj[j, 0]
            r01 = Rj[j, 1]
            r02 = Rj[j, 2]
            r10 = Rj[j, 3]
            r11 = Rj[j, 4]
            r12 = Rj[j, 5]
            r20 = Rj[j, 6]
            r21 = Rj[j, 7]
            r22 = Rj[j, 8]
            rfx = r00 * fcx + r01 * fcy + r02 * fcz
            rfy = r10 * fcx + r11 * fcy + r12 * fcz
            rfz = r20 * fcx + r21 * fcy + r22 * fcz
            rnx = r00 * ncx + r01 * ncy + r02 * ncz
            rny = r10 * ncx + r11 * ncy + r12 * ncz
            rnz = r20 * ncx + r21 * ncy + r22 * ncz
            px = pack[j, 0]
            py = pack[j, 1]
            pz = pack[j, 2]
            pfx = py * rfz - pz * rfy
            pfy = pz * rfx - px * rfz
            pfz = px * rfy - py * rfx
        else:
            rfx = 0.0
            rfy = 0.0
            rfz = 0.0
            rnx = 0.0
            rny = 0.0
            rnz = 0.0
            pfx = 0.0
            pfy = 0.0
            pfz = 0.0
        fix = F[i, 0] + rfx
        fiy = F[i, 1] + rfy
        fiz = F[i, 2] + rfz
        cx = pack[i, 16]
        cy = pack[i, 17]
        cz = pack[i, 18]
        cfx = cy * F[i, 2] - cz * F[i, 1]
        cfy = cz * F[i, 0] - cx * F[i, 2]
        cfz = cx * F[i, 1] - cy * F[i, 0]
        nix = N[i, 0] + cfx + rnx + pfx
        niy = N[i, 1] + cfy + rny + pfy
        niz = N[i, 2] + cfz + rnz + pfz
        tau_out[i] = pack[i, 12] * nix + pack[i, 13] * niy + pack[i, 14] * niz
        fcx = fix
        fcy = fiy
        fcz = fiz
        ncx = nix
        ncy = niy
        ncz = niz


@njit(cache=True)
def gravity_k(pack, q, gx, gy, gz, tau_out):
    n = pack.shape[0]
    z = np.zeros(n)
    rnea_k(pack, q, z, z, gx, gy, gz, tau_out)


@njit(cache=True)
def mass_matrix_k(pack, q, M_out):
    """Joint-space inertia via unit-acceleration inverse-dynamics columns."""
    n = pack.shape[0]
    zv = np.zeros(n)
    acc = np.zeros(n)
    col = np.empty(n)
    for j in range(n):
        acc[j] = 1.0
        rnea_k(pack, q, zv, acc, 0.0, 0.0, 0.0, col)
        for i in range(n):
            M_out[i, j] = col[i]
        acc[j] = 0.0


@njit(cache=True)
def chol_solve_k(M, rhs, x_out):
    """Solve M x = rhs for symmetric positive definite M, in place safe.

    Returns 0 on success, 1 if a pivot collapses (degenerate inertia).
    """
    n = M.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        d = M[j, j]
        for k in range(j):
            d -= L[j, k] * L[j, k]
        if d <= 1e-300:
            return 1
        dj = np.sqrt(d)
        L[j, j] = dj
        for i in range(j + 1, n):
            s = M[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / dj
    # forward then back substitution
    y = np.empty(n)
    for i in range(n):
        s = rhs[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s / L[i, i]
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= L[k, i] * x_out[k]
        x_out[i] = s / L[i, i]
    return 0


@njit(cache=True)
def fk_chain_k(pack, q, Rw, pw, axw):
    """World rotation (flattened row-major), origin, and axis of every link."""
    n = pack.shape[0]
    # running world rotation and origin of the parent frame
    w00 = 1.0
    w01 = 0.0
    w02 = 0.0
    w10 = 0.0
    w11 = 1.0
    w12 = 0.0
    w20 = 0.0
    w21 = 0.0
    w22 = 1.0
    ox = 0.0
    oy = 0.0
    oz = 0.0
    for i in range(n):
        px = pack[i, 0]
        py = pack[i, 1]
        pz = pack[i, 2]
        ox = ox + w00 * px + w01 * py + w02 * pz
        oy = oy + w10 * px + w11 * py + w12 * pz
        oz = oz + w20 * px + w21 * py + w22 * pz
        pw[i, 0] = ox
        pw[i, 1] = oy
        pw[i, 2] = oz
        ro00 = pack[i, 3]
        ro01 = pack[i, 4]
        ro02 = pack[i, 5]
        ro10 = pack[i, 6]
        ro11 = pack[i, 7]
        ro12 = pack[i, 8]
        ro20 = pack[i, 9]
        ro21 = pack[i, 10]
        ro22 = pack[i, 11]
        ax = pack[i, 12]
        ay = pack[i, 13]
        az = pack[i, 14]
        c = np.cos(q[i])
        s = np.sin(q[i])
        t = 1.0 - c
        rj00 = c + ax * ax * t
        rj01 = ax * ay * t - az * s
        rj02 = ax * az * t + ay * s
        rj10 = ax * ay * t + az * s
        rj11 = c + ay * ay * t
        rj12 = ay * az * t - ax * s
        rj20 = ax * az * t - ay * s
        rj21 = ay * az * t + ax * s
        rj22 = c + az * az * t
        # link -> parent
        l00 = ro00 * rj00 + ro01 * rj10 + ro02 * rj20
        l01 = ro00 * rj01 + ro01 * rj11 + ro02 * rj21
        l02 = ro00 * rj02 + ro01 * rj12 + ro02 * rj22
        l10 = ro10 * rj00 + ro11 * rj10 + ro12 * rj20
        l11 = ro10 * rj01 + ro11 * rj11 + ro12 * rj21
        l12 = ro10 * rj02 + ro11 * rj12 + ro12 * rj22
        l20 = ro20 * rj00 + ro21 * rj10 + ro22 * rj20
        l21 = ro20 * rj01 + ro21 * rj11 + ro22 * rj21
        l22 = ro20 * rj02 + ro21 * rj12 + ro22 * rj22
        # world rotation of link i
        n00 = w00 * l00 + w01 * l10 + w02 * l20
        n01 = w00 * l01 + w01 * l11 + w02 * l21
        n02 = w00 * l02 + w01 * l12 + w02 * l22
        n10 = w10 * l00 + w11 * l10 + w12 * l20
        n11 = w10 * l01 + w11 * l11 + w12 * l21
        n12 = w10 * l02 + w11 * l12 + w12 * l22
        n20 = w20 * l00 + w21 * l10 + w22 * l20
        n21 = w20 * l01 + w21 * l11 + w22 * l21
        n22 = w20 * l02 + w21 * l12 + w22 * l22
        w00 = n00
        w01 = n01
        w02 = n02
        w10 = n10
        w11 = n11
        w12 = n12
        w20 = n20
        w21 = n21
        w22 = n22
        Rw[i, 0] = w00
        Rw[i, 1] = w01
        Rw[i, 2] = w02
        Rw[i, 3] = w10
        Rw[i, 4] = w11
        Rw[i, 5] = w12
        Rw[i, 6] = w20
        Rw[i, 7] = w21
        Rw[i, 8] = w22
        axw[i, 0] = w00 * ax + w01 * ay + w02 * az
        axw[i, 1] = w10 * ax + w11 * ay + w12 * az
        axw[i, 2] = w20 * ax + w21 * ay + w22 * az


@njit(cache=True)
def fk_ee_k(pack, q, tool_p, tool_R9, p_out, R_out9):
    """End-effector position and rotation (flattened row-major)."""
    n = pack.shape[0]
    Rw = np.empty((n, 9))
    pw = np.empty((n, 3))
    axw = np.empty((n, 3))
    fk_chain_k(pack, q, Rw, pw, axw)
    k = n - 1
    for r in range(3):
        R0 = Rw[k, 3 * r + 0]
        R1 = Rw[k, 3 * r + 1]
        R2 = Rw[k, 3 * r + 2]
        p_out[r] = pw[k, r] + R0 * tool_p[0] + R1 * tool_p[1] + R2 * tool_p[2]
        for cidx in range(3):
            R_out9[3 * r + cidx] = (
                R0 * tool_R9[0 + cidx] + R1 * tool_R9[3 + cidx] + R2 * tool_R9[6 + cidx]
            )


@njit(cache=True)
def fk_jac_k(pack, q, tool_p, tool_R9, p_out, R_out9, J_out):
    """End-effector pose plus the world-frame geometric Jacobian (6 x n).

    Rows 0:3 are linear velocity, rows 3:6 angular.
    """
    n = pack.shape[0]
    Rw = np.empty((n, 9))
    pw = np.empty((n, 3))
    axw = np.empty((n, 3))
    fk_chain_k(pack, q, Rw, pw, axw)
    k = n - 1
    for r in range(3):
        R0 = Rw[k, 3 * r + 0]
        R1 = Rw[k, 3 * r + 1]
        R2 = Rw[k, 3 * r + 2]
        p_out[r] = pw[k, r] + R0 * tool_p[0] + R1 * tool_p[1] + R2 * tool_p[2]
        for cidx in range(3):
            R_out9[3 * r + cidx] = (
                R0 * tool_R9[0 + cidx] + R1 * tool_R9[3 + cidx] + R2 * tool_R9[6 + cidx]
            )
    for i in range(n):
        zx = axw[i, 0]
        zy = axw[i, 1]
        zz = axw[i, 2]
        rx = p_out[0] - pw[i, 0]
        ry = p_out[1] - pw[i, 1]
        rz = p_out[2] - pw[i, 2]
        J_out[0, i] = zy * rz - zz * ry
        J_out[1, i] = zz * rx - zx * rz
        J_out[2, i] = zx * ry - zy * rx
        J_out[3, i] = zx
        J_out[4, i] = zy
        J_out[5, i] = zz


@njit(cache=True)
def contact_k(p_ee, R9, vl, om, scene, cp, w_arm_out):
    """Penalty contact between the square peg and the table with a square hole.

    Eight probe points on the peg (four tip corners, four points up the
    sides) are tested against the table surface and hole walls. The
    resolved wrench ON THE ARM, about the end-effector origin, accumulates
    into w_arm_out. Returns the number of points in contact.

    scene: [table_h, hole_x, hole_y, hole_half, hole_depth, peg_half, side_h]
    cp:    [k_normal, c_normal, mu_table, v_regularization, mu_wall]
    """
    table_h = scene[0]
    hx = scene[1]
    hy = scene[2]
    hole_half = scene[3]
    hole_depth = scene[4]
    peg_half = scene[5]
    side_h = scene[6]
    kn = cp[0]
    cn = cp[1]
    mu_table = cp[2]
    vreg = cp[3]
    mu_wall = cp[4]
    bottom = table_h - hole_depth
    ncontact = 0
    for k in range(8):
        sx = -peg_half if (k & 1) == 0 else peg_half
        sy = -peg_half if (k & 2) == 0 else peg_half
        sz = side_h if k >= 4 else 0.0
        X = p_ee[0] + R9[0] * sx + R9[1] * sy + R9[2] * sz
        Y = p_ee[1] + R9[3] * sx + R9[4] * sy + R9[5] * sz
        Z = p_ee[2] + R9[6] * sx + R9[7] * sy + R9[8] * sz
        dx = X - hx
        dy = Y - hy
        inside = (abs(dx) < hole_half) and (abs(dy) < hole_half)
        pen = -1.0
        nxn = 0.0
        nyn = 0.0
        nzn = 0.0
        if inside:
            if Z < bottom:
                pen = bottom - Z
                nzn = 1.0
        elif Z < table_h:
            d_up = table_h - Z
            d_x = 1e30
            d_y = 1e30
            if Z > bottom:
                if abs(dy) < hole_half:
                    d_x = abs(dx) - hole_half
                if abs(dx) < hole_half:
                    d_y = abs(dy) - hole_half
            if d_up <= d_x and d_up <= d_y:
                pen = d_up
                nzn = 1.0
            elif d_x <= d_y:
                pen = d_x
                nxn = -1.0 if dx > 0.0 else 1.0
            else:
                pen = d_y
                nyn = -1.0 if dy > 0.0 else 1.0
        if pen > 0.0:
            rx = X - p_ee[0]
            ry = Y - p_ee[1]
            rz = Z - p_ee[2]
            vx = vl[0] + om[1] * rz - om[2] * ry
            vy = vl[1] + om[2] * rx - om[0] * rz
            vz = vl[2] + om[0] * ry - om[1] * rx
            vn = vx * nxn + vy * nyn + vz * nzn
            fn = kn * pen - cn * vn
            if fn > 0.0:
                ncontact += 1
                mu = mu_table if nzn != 0.0 else mu_wall
                vtx = vx - vn * nxn
                vty = vy - vn * nyn
                vtz = vz - vn * nzn
                speed = np.sqrt(vtx * vtx + vty * vty + vtz * vtz)
                scale = -mu * fn * np.tanh(speed / vreg) / (speed + 1e-12)
                fx = fn * nxn + scale * vtx
                fy = fn * nyn + scale * vty
                fz = fn * nzn + scale * vtz
                w_arm_out[0] += fx
                w_arm_out[1] += fy
                w_arm_out[2] += fz
                w_arm_out[3] += ry * fz - rz * fy
                w_arm_out[4] += rz * fx - rx * fz
                w_arm_out[5] += rx * fy - ry * fx
    return ncontact


@njit(cache=True)
def sim_step_k(
    pack,
    q,
    v,
    tau_cmd,
    gx,
    gy,
    gz,
    coulomb,
    viscous,
    fric_vscale,
    scene,
    cp,
    dt,
    tool_p,
    tool_R9,
    out_wenv,
    out_ee,
    out_aux,
):
    """One semi-implicit Euler step of the plant. Mutates q and v in place.

    out_wenv receives the contact wrench applied BY the peg ON the
    environment (reaction to the arm-side wrench). out_ee receives the
    end-effector position (0:3) and rotation (3:12, row-major) at the start
    of the step, the pose contact was evaluated at. out_aux[0] is the
    contact point count, out_aux[1] the squared contact force magnitude.

    Returns 0 normally, 1 when the new state is non-finite or the velocity
    runs away, 2 when the mass matrix is degenerate.
    """
    n = pack.shape[0]
    p_ee = np.empty(3)
    R9 = np.empty(9)
    J = np.empty((6, n))
    fk_jac_k(pack, q, tool_p, tool_R9, p_ee, R9, J)
    # end-effector twist
    vl = np.zeros(3)
    om = np.zeros(3)
    for i in range(n):
        vi = v[i]
        vl[0] += J[0, i] * vi
        vl[1] += J[1, i] * vi
        vl[2] += J[2, i] * vi
        om[0] += J[3, i] * vi
        om[1] += J[4, i] * vi
        om[2] += J[5, i] * vi
    warm = np.zeros(6)
    ncontact = contact_k(p_ee, R9, vl, om, scene, cp, warm)
    # generalized force: command, joint friction, contact through J^T
    tau_tot = np.empty(n)
    for i in range(n):
        ti = tau_cmd[i] - coulomb[i] * np.tanh(v[i] / fric_vscale) - viscous[i] * v[i]
        for r in range(6):
            ti += J[r, i] * warm[r]
        tau_tot[i] = ti
    zv = np.zeros(n)
    bias = np.empty(n)
    rnea_k(pack, q, v, zv, gx, gy, gz, bias)
    M = np.empty((n, n))
    mass_matrix_k(pack, q, M)
    rhs = np.empty(n)
    for i in range(n):
        rhs[i] = tau_tot[i] - bias[i]
    qdd = np.empty(n)
    if chol_solve_k(M, rhs, qdd) != 0:
        return 2
    status = 0
    for i in range(n):
        v[i] += qdd[i] * dt
        q[i] += v[i] * dt
        if not np.isfinite(q[i]) or abs(v[i]) > 100.0:
            status = 1
    for r in range(6):
        out_wenv[r] = -warm[r]
    for r in range(3):
        out_ee[r] = p_ee[r]
    for r in range(9):
        out_ee[3 + r] = R9[r]
    out_aux[0] = float(ncontact)
    out_aux[1] = warm[0] * warm[0] + warm[1] * warm[1] + warm[2] * warm[2]
    return status


@njit(cache=True)
def impedance_k(K, B, q_des, v_des, tau_ff, q, v, limit, tau_out):
    """Joint-space impedance law with symmetric torque saturation.

    Returns the number of saturated joints.
    """
    nsat = 0
    for i in range(q.shape[0]):
        t = B[i] * (v_des[i] - v[i]) + K[i] * (q_des[i] - q[i]) + tau_ff[i]
        if t > limit[i]:
            t = limit[i]
            nsat += 1
        elif t < -limit[i]:
            t = -limit[i]
            nsat += 1
        tau_out[i] = t
    return nsat
