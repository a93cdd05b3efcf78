# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation loops.

Mirrors ``_pykernel`` operation for operation (same evaluation order), so
traces agree bitwise except where the pure-Python path calls LAPACK (the
model-based delay schedule, which here uses an inline complex solve).
"""

from libc.math cimport atan2, ceil, fabs, isfinite, M_PI, sqrt
from libc.stdlib cimport free, malloc

import numpy as np

NAME = "cython"

cdef enum:
    REF = 0
    IMPULSE = 1
    CUTOFF = 2
    RESTORE = 3


# ---------------------------------------------------------------- delay line

cdef struct Line:
    double *buf
    int cap
    int head
    int count
    double dt


cdef int line_init(Line *ln, double dt, double max_delay) except -1:
    ln.cap = <int>ceil(max_delay / dt) + 2
    ln.buf = <double *>malloc(ln.cap * sizeof(double))
    if ln.buf == NULL:
        raise MemoryError()
    cdef int i
    for i in range(ln.cap):
        ln.buf[i] = 0.0
    ln.head = -1
    ln.count = 0
    ln.dt = dt
    return 0


cdef inline void line_push(Line *ln, double v) noexcept nogil:
    ln.head = (ln.head + 1) % ln.cap
    ln.buf[ln.head] = v
    if ln.count < ln.cap:
        ln.count += 1


cdef inline double line_ago(Line *ln, int k) noexcept nogil:
    cdef int i = (ln.head - k) % ln.cap
    if i < 0:
        i += ln.cap
    return ln.buf[i]


cdef double line_lookup(Line *ln, double delay) except? -1e308:
    if delay > (ln.cap - 2) * ln.dt * (1.0 + 1e-12):
        raise ValueError(f"delay {delay:g} s exceeds buffer span {(ln.cap - 2) * ln.dt:g} s")
    cdef double d = delay / ln.dt
    cdef int i0 = <int>d
    if i0 + 1 >= ln.count:
        return line_ago(ln, ln.count - 1)
    cdef double frac = d - i0
    cdef double s0 = line_ago(ln, i0)
    return s0 + frac * (line_ago(ln, i0 + 1) - s0)


# ------------------------------------------------------------------- plant

cdef struct Plant:
    double A[4][4]
    double B[4]
    double D[4]
    double kappa
    double tau
    double z_min
    double z_max
    int penalty
    double k_wall
    double c_wall


cdef inline void plant_rhs(Plant *P, double *s, double u, double *out) noexcept nogil:
    cdef double force, fd, z, zd, wf
    cdef int i
    if P.tau > 0.0:
        force = s[4]
        fd = (P.kappa * u - s[4]) / P.tau
    else:
        force = P.kappa * u
        fd = 0.0
    if P.penalty:
        z = s[1]
        zd = s[0]
        wf = 0.0
        if z < P.z_min:
            wf = -P.k_wall * (z - P.z_min) - P.c_wall * zd
            if not wf > 0.0:
                wf = 0.0
        elif z > P.z_max:
            wf = -P.k_wall * (z - P.z_max) - P.c_wall * zd
            if not wf < 0.0:
                wf = 0.0
        force = force + wf
    for i in range(4):
        out[i] = (P.A[i][0] * s[0] + P.A[i][1] * s[1] + P.A[i][2] * s[2] + P.A[i][3] * s[3]
                  + P.B[i] * force + P.D[i])
    out[4] = fd


cdef void plant_rk4(Plant *P, double *s, double u, double dt) noexcept nogil:
    cdef double k1[5]
    cdef double k2[5]
    cdef double k3[5]
    cdef double k4[5]
    cdef double tmp[5]
    cdef double h = 0.5 * dt
    cdef double c
    cdef int i
    plant_rhs(P, s, u, k1)
    for i in range(5):
        tmp[i] = s[i] + h * k1[i]
    plant_rhs(P, tmp, u, k2)
    for i in range(5):
        tmp[i] = s[i] + h * k2[i]
    plant_rhs(P, tmp, u, k3)
    for i in range(5):
        tmp[i] = s[i] + dt * k3[i]
    plant_rhs(P, tmp, u, k4)
    c = dt / 6.0
    for i in range(5):
        s[i] = s[i] + c * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    if P.tau <= 0.0:
        s[4] = P.kappa * u
    if not P.penalty:
        if s[1] < P.z_min:
            s[1] = P.z_min
            if s[0] < 0.0:
                s[0] = 0.0
        elif s[1] > P.z_max:
            s[1] = P.z_max
            if s[0] > 0.0:
                s[0] = 0.0


# ---------------------------------------------------------------- observer

cdef struct Obs:
    double A[4][4]   # A - Q C
    double B[4]
    double d[4]
    double q[4]
    double x[4]


cdef inline void obs_rhs(Obs *O, double *x, double f, double y, double *out) noexcept nogil:
    cdef int i, j
    cdef double acc
    for i in range(4):
        acc = 0.0
        for j in range(4):
            acc += O.A[i][j] * x[j]
        out[i] = acc + O.B[i] * f + O.d[i] + O.q[i] * y


cdef void obs_rk4(Obs *O, double f, double y, double dt) noexcept nogil:
    cdef double k1[4]
    cdef double k2[4]
    cdef double k3[4]
    cdef double k4[4]
    cdef double tmp[4]
    cdef double h = 0.5 * dt
    cdef double c
    cdef int i
    obs_rhs(O, O.x, f, y, k1)
    for i in range(4):
        tmp[i] = O.x[i] + h * k1[i]
    obs_rhs(O, tmp, f, y, k2)
    for i in range(4):
        tmp[i] = O.x[i] + h * k2[i]
    obs_rhs(O, tmp, f, y, k3)
    for i in range(4):
        tmp[i] = O.x[i] + dt * k3[i]
    obs_rhs(O, tmp, f, y, k4)
    c = dt / 6.0
    for i in range(4):
        O.x[i] = O.x[i] + c * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


# --------------------------------------------------------------- estimator

cdef struct Est:
    double e1
    double e2
    double om
    double gamma
    double floor
    double deadzone


cdef inline double sgn(double v, double dz) noexcept nogil:
    if v > dz:
        return 1.0
    if v < -dz:
        return -1.0
    return 0.0


cdef inline void est_rhs(Est *E, double e1, double e2, double om, double w,
                         double *o) noexcept nogil:
    o[0] = e2
    o[1] = (-om) * om * e1 - 2.0 * om * e2 + 2.0 * om * w
    o[2] = (-E.gamma) * om * sgn(e1, E.deadzone) * (w - e2)


cdef void est_step(Est *E, double w, double dt) noexcept nogil:
    cdef double a[3]
    cdef double b[3]
    cdef double c[3]
    cdef double d[3]
    cdef double h = 0.5 * dt
    cdef double s, om
    cdef double e1 = E.e1, e2 = E.e2
    om = E.om
    est_rhs(E, e1, e2, om, w, a)
    est_rhs(E, e1 + h * a[0], e2 + h * a[1], om + h * a[2], w, b)
    est_rhs(E, e1 + h * b[0], e2 + h * b[1], om + h * b[2], w, c)
    est_rhs(E, e1 + dt * c[0], e2 + dt * c[1], om + dt * c[2], w, d)
    s = dt / 6.0
    E.e1 = e1 + s * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0])
    E.e2 = e2 + s * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1])
    om = om + s * (a[2] + 2.0 * b[2] + 2.0 * c[2] + d[2])
    E.om = om if om > E.floor else E.floor


# ------------------------------------------------------- delay from phase

cdef double model_theta(Plant *P, double *C, double omega) except? -1.0:
    """``-arg G(i omega) / omega`` shifted into ``(0, 2 pi / omega]``."""
    cdef double mr[4][4]
    cdef double mi[4][4]
    cdef double vr[4]
    cdef double vi[4]
    cdef int i, j, k, p
    cdef double best, mag, pr, pi_, fr, fi, den, tr, ti, gr, gi, phase
    for i in range(4):
        for j in range(4):
            mr[i][j] = -P.A[i][j]
            mi[i][j] = 0.0
        mi[i][i] = omega
        vr[i] = P.B[i]
        vi[i] = 0.0
    # Gaussian elimination with partial pivoting
    for k in range(4):
        p = k
        best = mr[k][k] * mr[k][k] + mi[k][k] * mi[k][k]
        for i in range(k + 1, 4):
            mag = mr[i][k] * mr[i][k] + mi[i][k] * mi[i][k]
            if mag > best:
                best = mag
                p = i
        if best == 0.0:
            raise ZeroDivisionError("singular resolvent in delay schedule")
        if p != k:
            for j in range(4):
                mr[k][j], mr[p][j] = mr[p][j], mr[k][j]
                mi[k][j], mi[p][j] = mi[p][j], mi[k][j]
            vr[k], vr[p] = vr[p], vr[k]
            vi[k], vi[p] = vi[p], vi[k]
        pr = mr[k][k]
        pi_ = mi[k][k]
        den = pr * pr + pi_ * pi_
        for i in range(k + 1, 4):
            # factor = m[i][k] / m[k][k]
            fr = (mr[i][k] * pr + mi[i][k] * pi_) / den
            fi = (mi[i][k] * pr - mr[i][k] * pi_) / den
            for j in range(k, 4):
                mr[i][j] = mr[i][j] - (fr * mr[k][j] - fi * mi[k][j])
                mi[i][j] = mi[i][j] - (fr * mi[k][j] + fi * mr[k][j])
            vr[i] = vr[i] - (fr * vr[k] - fi * vi[k])
            vi[i] = vi[i] - (fr * vi[k] + fi * vr[k])
    for k in range(3, -1, -1):
        tr = vr[k]
        ti = vi[k]
        for j in range(k + 1, 4):
            tr = tr - (mr[k][j] * vr[j] - mi[k][j] * vi[j])
            ti = ti - (mr[k][j] * vi[j] + mi[k][j] * vr[j])
        pr = mr[k][k]
        pi_ = mi[k][k]
        den = pr * pr + pi_ * pi_
        vr[k] = (tr * pr + ti * pi_) / den
        vi[k] = (ti * pr - tr * pi_) / den
    gr = 0.0
    gi = 0.0
    for i in range(4):
        gr = gr + C[i] * vr[i]
        gi = gi + C[i] * vi[i]
    phase = atan2(gi, gr)
    if -phase > 0:
        return -phase / omega
    return (-phase + 2.0 * M_PI) / omega


cdef inline double schedule_target(Plant *P, double *C, double omega, int mode) except? -1.0:
    if mode == 0:
        return model_theta(P, C, omega)
    return M_PI / omega


# ---------------------------------------------------------------- drivers

def simulate(dict p):
    """Closed-loop run; returns ``(columns, bad_step, theta_wraps)``."""
    cdef int n = p["n_steps"]
    cdef double dt = p["dt"]
    cdef Plant P
    cdef double C[4]
    cdef double K[4]
    cdef Obs O
    cdef int i, j
    A_ = p["A"]
    B_ = p["B"]
    D_ = p["Doff"]
    C_ = p["C"]
    K_ = p["K"]
    Q_ = p["Q"]
    X0 = p["xhat0"]
    for i in range(4):
        for j in range(4):
            P.A[i][j] = A_[i, j]
        P.B[i] = B_[i]
        P.D[i] = D_[i]
        C[i] = C_[i]
        K[i] = K_[i]
    P.kappa = p["kappa"]
    P.tau = p["tau"]
    P.z_min = p["z_min"]
    P.z_max = p["z_max"]
    P.penalty = p["contact"]
    P.k_wall = p["k_wall"]
    P.c_wall = p["c_wall"]
    cdef double u_min = p["u_min"], u_max = p["u_max"]
    cdef int ctrl = p["ctrl"]
    cdef int adaptive = p["adaptive"]
    cdef double kappa = P.kappa

    cdef int use_obs = ctrl == 2
    cdef int obs_textbook = p["obs_input"] == 1
    if use_obs:
        for i in range(4):
            for j in range(4):
                O.A[i][j] = A_[i, j] - Q_[i] * C_[j]
            O.B[i] = B_[i]
            O.d[i] = D_[i]
            O.q[i] = Q_[i]
            O.x[i] = X0[i]

    cdef double s[5]
    x0 = p["x0"]
    for i in range(4):
        s[i] = x0[i]
    s[4] = p["f0"]
    cdef double r = p["r0"]
    cdef int cut = 0

    cdef double kp = p["kp"], ki = p["ki"], integ = p["integ0"], aw = p["aw_gain"]
    cdef double u_hold = p["u_hold"], u_g = p["u_g"], alpha = p["alpha"]

    cdef Est E
    cdef Line bias
    cdef Line comp
    bias.buf = NULL
    comp.buf = NULL
    cdef double bias_delay = 0.0
    cdef double theta, target = 0.0, smoothing = p["theta_smoothing"]
    cdef int theta_mode = p["theta_mode"]
    cdef int wraps = 0
    cdef double omega = np.nan

    cdef double[::1] noise = np.ascontiguousarray(p["noise"], dtype=float)
    cdef long[::1] ev_step = np.ascontiguousarray(p["ev_step"], dtype=np.int64)
    cdef long[::1] ev_kind = np.ascontiguousarray(p["ev_kind"], dtype=np.int64)
    cdef double[::1] ev_value = np.ascontiguousarray(p["ev_value"], dtype=float)
    cdef int n_ev = ev_step.shape[0]
    cdef int ie = 0

    names = ("t", "r", "y", "y_meas", "u_raw", "u_sat", "sat_flag", "z", "zdot", "ydot",
             "f_act", "omega_t", "theta", "xhat1", "xhat2", "xhat3", "xhat4")
    cols = {name: np.zeros(n) for name in names}
    cdef double[::1] c_t = cols["t"], c_r = cols["r"], c_y = cols["y"], c_ym = cols["y_meas"]
    cdef double[::1] c_ur = cols["u_raw"], c_us = cols["u_sat"], c_sf = cols["sat_flag"]
    cdef double[::1] c_z = cols["z"], c_zd = cols["zdot"], c_yd = cols["ydot"]
    cdef double[::1] c_f = cols["f_act"], c_om = cols["omega_t"], c_th = cols["theta"]
    cdef double[::1] c_x1 = cols["xhat1"], c_x2 = cols["xhat2"]
    cdef double[::1] c_x3 = cols["xhat3"], c_x4 = cols["xhat4"]

    cdef double y, ym, w, u_raw, u, sat, excess = 0.0, e, inc, f_start, dy
    cdef int kind, bad = -1
    cdef long k

    try:
        if adaptive:
            E.e1 = 0.0
            E.e2 = 0.0
            E.floor = p["omega_floor"]
            E.om = p["omega_init"] if p["omega_init"] > E.floor else E.floor
            E.gamma = p["gamma"]
            E.deadzone = p["deadzone"]
            bias_delay = M_PI / p["beta"]
            line_init(&bias, dt, bias_delay)
            target = schedule_target(&P, C, E.om, theta_mode)
            theta = target
            omega = p["omega_init"]
        else:
            theta = p["theta0"]
        line_init(&comp, dt, max(theta, p["theta_max"]))

        for k in range(n):
            while ie < n_ev and ev_step[ie] <= k:
                kind = ev_kind[ie]
                if kind == REF:
                    r = ev_value[ie]
                elif kind == IMPULSE:
                    s[2] += ev_value[ie]
                elif kind == CUTOFF:
                    cut = 1
                else:
                    cut = 0
                ie += 1

            y = s[3]
            ym = y + noise[k]

            if ctrl == 0:
                u_raw = u_hold
            elif ctrl == 1:
                if adaptive:
                    line_push(&bias, ym)
                    w = ym - line_lookup(&bias, bias_delay)
                    est_step(&E, w, dt)
                    omega = E.om
                    dy = schedule_target(&P, C, omega, theta_mode)
                    if fabs(dy - target) > M_PI / omega:
                        wraps += 1
                    target = dy
                    if smoothing > 0:
                        theta = theta + dt / smoothing * (target - theta)
                    else:
                        theta = target
                e = r - ym
                inc = e
                if aw != 0.0 and ki != 0.0:
                    inc = inc + aw / ki * excess
                integ = integ + inc * dt
                line_push(&comp, ym)
                u_raw = (kp * e + ki * integ) + alpha * (ym - line_lookup(&comp, theta)) + u_g
            elif ctrl == 2:
                u_raw = u_g + (r - (K[0] * O.x[0] + K[1] * O.x[1] + K[2] * O.x[2]
                                    + K[3] * O.x[3])) / kappa
            else:
                u_raw = u_g + (r - (K[0] * s[0] + K[1] * s[1] + K[2] * s[2]
                                    + K[3] * ym)) / kappa

            if cut:
                u = 0.0
                sat = 0.0
            elif u_raw < u_min:
                u = u_min
                sat = 1.0
            elif u_raw > u_max:
                u = u_max
                sat = 1.0
            else:
                u = u_raw
                sat = 0.0
            excess = u - u_raw

            c_t[k] = k * dt
            c_r[k] = r
            c_y[k] = y
            c_ym[k] = ym
            c_ur[k] = u_raw
            c_us[k] = u
            c_sf[k] = sat
            c_zd[k] = s[0]
            c_z[k] = s[1]
            c_yd[k] = s[2]
            c_f[k] = s[4]
            c_om[k] = omega
            c_th[k] = theta
            if use_obs:
                c_x1[k] = O.x[0]
                c_x2[k] = O.x[1]
                c_x3[k] = O.x[2]
                c_x4[k] = O.x[3]

            f_start = s[4]
            plant_rk4(&P, s, u, dt)
            if use_obs:
                obs_rk4(&O, f_start if obs_textbook else kappa * u, ym, dt)
            if not (isfinite(s[0]) and isfinite(s[1]) and isfinite(s[2]) and isfinite(s[3])
                    and isfinite(s[4])):
                bad = k
                break
            if use_obs and not (isfinite(O.x[0]) and isfinite(O.x[1]) and isfinite(O.x[2])
                                and isfinite(O.x[3])):
                bad = k
                break
    finally:
        free(bias.buf)
        free(comp.buf)

    return cols, bad, wraps


def run_estimator(signal, double dt, double omega_init, double gamma, double floor,
                  double deadzone, double beta):
    """Bias canceller (skipped when ``beta <= 0``) feeding the estimator.

    Returns arrays ``(w, nu, omega)``, one entry per input sample.
    """
    if omega_init <= 0:
        raise ValueError("initial frequency estimate must be positive")
    if floor <= 0:
        raise ValueError("floor must be positive")
    cdef double[::1] sig = np.ascontiguousarray(signal, dtype=float)
    cdef Py_ssize_t n = sig.shape[0], k
    w_arr = np.empty(n)
    nu_arr = np.empty(n)
    om_arr = np.empty(n)
    cdef double[::1] w_out = w_arr, nu_out = nu_arr, om_out = om_arr
    cdef Est E
    E.e1 = 0.0
    E.e2 = 0.0
    E.om = omega_init if omega_init > floor else floor
    E.gamma = gamma
    E.floor = floor
    E.deadzone = deadzone
    cdef Line bias
    bias.buf = NULL
    cdef double delay = 0.0, w
    cdef int use_bias = beta > 0
    try:
        if use_bias:
            delay = M_PI / beta
            line_init(&bias, dt, delay)
        for k in range(n):
            if use_bias:
                line_push(&bias, sig[k])
                w = sig[k] - line_lookup(&bias, delay)
            else:
                w = sig[k]
            est_step(&E, w, dt)
            w_out[k] = w
            nu_out[k] = E.e2
            om_out[k] = E.om
    finally:
        free(bias.buf)
    return w_arr, nu_arr, om_arr
