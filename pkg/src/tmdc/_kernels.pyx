# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=False
"""Compiled plant integrator kernel.

Bit-identical twin of _kernels_py.integrate: same formulas, same operation
order, libm transcendentals, built without -ffast-math and with
-ffp-contract=off.  Any change here must be mirrored in _kernels_py.py
(see that module for the state/cmd/phys array layouts).
"""

from libc.math cimport ceil, cos, fmod, sin

BACKEND_NAME = "cython"

cdef double _PI = 3.141592653589793
cdef double _TWO_PI = 6.283185307179586
cdef double _TILT_PHYS = _PI / 2.0 - 0.01


def integrate(double[::1] state, double[::1] cmd, double[::1] phys,
              double duration, double dt_max):
    """Advance the rigid-body state by `duration` using substeps <= dt_max."""
    if duration <= 0.0:
        return
    cdef long n = <long>ceil(duration / dt_max - 1e-12)
    if n < 1:
        n = 1
    cdef double h = duration / n

    cdef double x = state[0]
    cdef double y = state[1]
    cdef double z = state[2]
    cdef double vx = state[3]
    cdef double vy = state[4]
    cdef double vz = state[5]
    cdef double ax = state[6]
    cdef double ay = state[7]
    cdef double az = state[8]
    cdef double phi = state[9]
    cdef double theta = state[10]
    cdef double psi = state[11]
    cdef double dphi = state[12]
    cdef double dtheta = state[13]
    cdef double wz = state[14]

    cdef double u = cmd[0]
    cdef double roll_sp = cmd[1]
    cdef double pitch_sp = cmd[2]
    cdef double yaw_rate_sp = cmd[3]

    cdef double mass = phys[0]
    cdef double ixx = phys[1]
    cdef double iyy = phys[2]
    cdef double izz = phys[3]
    cdef double f_max = phys[4]
    cdef double eta = phys[5]
    cdef double rotor_r = phys[6]
    cdef double ge_on = phys[7]
    cdef double ground_on = phys[8]
    cdef double mx = phys[9]
    cdef double my = phys[10]
    cdef double mz = phys[11]
    cdef double fdx = phys[12]
    cdef double fdy = phys[13]
    cdef double fdz = phys[14]
    cdef double wn = phys[15]
    cdef double zeta = phys[16]
    cdef double yaw_tau = phys[17]
    cdef double g = phys[18]

    cdef double sphi, cphi, sth, cth, spsi, cpsi
    cdef double gbx, gby, gbz, tx, ty, tz
    cdef double ddphi, ddtheta, dwz
    cdef double bx, by, zbx, zby, zbz
    cdef double ge, zq, r4, force
    cdef long i

    for i in range(n):
        sphi = sin(phi)
        cphi = cos(phi)
        sth = sin(theta)
        cth = cos(theta)

        gbx = g * sth
        gby = -g * cth * sphi
        gbz = g * cth * cphi
        tx = my * gbz - mz * gby
        ty = mz * gbx - mx * gbz
        tz = mx * gby - my * gbx

        ddphi = wn * wn * (roll_sp - phi) - 2.0 * zeta * wn * dphi + tx / ixx
        ddtheta = wn * wn * (pitch_sp - theta) - 2.0 * zeta * wn * dtheta + ty / iyy
        dwz = (yaw_rate_sp - wz) / yaw_tau + tz / izz
        dphi = dphi + ddphi * h
        dtheta = dtheta + ddtheta * h
        wz = wz + dwz * h
        phi = phi + dphi * h
        theta = theta + dtheta * h
        psi = psi + wz * h

        if phi > _TILT_PHYS:
            phi = _TILT_PHYS
            if dphi > 0.0:
                dphi = 0.0
        elif phi < -_TILT_PHYS:
            phi = -_TILT_PHYS
            if dphi < 0.0:
                dphi = 0.0
        if theta > _TILT_PHYS:
            theta = _TILT_PHYS
            if dtheta > 0.0:
                dtheta = 0.0
        elif theta < -_TILT_PHYS:
            theta = -_TILT_PHYS
            if dtheta < 0.0:
                dtheta = 0.0
        psi = fmod(psi + _PI, _TWO_PI)
        if psi <= 0.0:
            psi += _TWO_PI
        psi -= _PI

        sphi = sin(phi)
        cphi = cos(phi)
        sth = sin(theta)
        cth = cos(theta)
        spsi = sin(psi)
        cpsi = cos(psi)
        bx = -sth * cphi
        by = sphi
        zbx = cpsi * bx - spsi * by
        zby = spsi * bx + cpsi * by
        zbz = cth * cphi

        ge = 1.0
        if ge_on != 0.0:
            zq = z
            if zq < 0.3 * rotor_r:
                zq = 0.3 * rotor_r
            r4 = rotor_r / (4.0 * zq)
            ge = 1.0 / (1.0 - r4 * r4)
        force = u * f_max * eta * ge

        ax = (force * zbx + fdx) / mass
        ay = (force * zby + fdy) / mass
        az = (force * zbz + fdz) / mass - g
        vx = vx + ax * h
        vy = vy + ay * h
        vz = vz + az * h
        x = x + vx * h
        y = y + vy * h
        z = z + vz * h

        if ground_on != 0.0 and z <= 0.0:
            z = 0.0
            if vz < 0.0:
                vz = 0.0
            if az < 0.0:
                az = 0.0

    state[0] = x
    state[1] = y
    state[2] = z
    state[3] = vx
    state[4] = vy
    state[5] = vz
    state[6] = ax
    state[7] = ay
    state[8] = az
    state[9] = phi
    state[10] = theta
    state[11] = psi
    state[12] = dphi
    state[13] = dtheta
    state[14] = wz
