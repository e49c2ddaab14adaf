"""Pure-Python plant integrator kernel.

This is the reference implementation; tmdc._kernels is the compiled twin.
The two must stay bit-identical: same formulas, same operation order, libm
transcendentals on both sides, no fused multiply-adds in the compiled build.
Any change here must be mirrored in _kernels.pyx.

State layout (float64[15]):
    0:3  position x, y, z          (world, m)
    3:6  velocity vx, vy, vz       (world, m/s)
    6:9  acceleration ax, ay, az   (world, m/s^2, kinematic)
    9:12 attitude phi, theta, psi  (rad)
   12:15 rates dphi, dtheta, wz    (rad/s)

Command layout (float64[4]): u, roll_sp, pitch_sp, yaw_rate_sp.

Physical-parameter layout (float64[19]):
    0 mass  1 ixx  2 iyy  3 izz  4 f_max  5 eta
    6 rotor_radius  7 ground_effect flag  8 ground_plane flag
    9:12 payload moment mx, my, mz (kg*m, body frame)
   12:15 disturbance force fdx, fdy, fdz (N, world frame)
   15 attitude omega_n  16 attitude zeta  17 yaw tau  18 g
"""

from math import ceil, cos, fmod, sin

BACKEND_NAME = "python"

_PI = 3.141592653589793
_TWO_PI = 6.283185307179586
_TILT_PHYS = _PI / 2.0 - 0.01


def integrate(state, cmd, phys, duration: float, dt_max: float) -> None:
    """Advance the rigid-body state by `duration` using substeps <= dt_max.

    Semi-implicit Euler: rates are updated first, then integrated into
    angles and positions within the same substep.  Mutates `state` in place.
    """
    if duration <= 0.0:
        return
    n = int(ceil(duration / dt_max - 1e-12))
    if n < 1:
        n = 1
    h = duration / n

    x = state[0]
    y = state[1]
    z = state[2]
    vx = state[3]
    vy = state[4]
    vz = state[5]
    ax = state[6]
    ay = state[7]
    az = state[8]
    phi = state[9]
    theta = state[10]
    psi = state[11]
    dphi = state[12]
    dtheta = state[13]
    wz = state[14]

    u = cmd[0]
    roll_sp = cmd[1]
    pitch_sp = cmd[2]
    yaw_rate_sp = cmd[3]

    mass = phys[0]
    ixx = phys[1]
    iyy = phys[2]
    izz = phys[3]
    f_max = phys[4]
    eta = phys[5]
    rotor_r = phys[6]
    ge_on = phys[7]
    ground_on = phys[8]
    mx = phys[9]
    my = phys[10]
    mz = phys[11]
    fdx = phys[12]
    fdy = phys[13]
    fdz = phys[14]
    wn = phys[15]
    zeta = phys[16]
    yaw_tau = phys[17]
    g = phys[18]

    for _ in range(n):
        sphi = sin(phi)
        cphi = cos(phi)
        sth = sin(theta)
        cth = cos(theta)

        # Gravity-compensation direction in the body frame: R^T (0, 0, g).
        gbx = g * sth
        gby = -g * cth * sphi
        gbz = g * cth * cphi
        # Off-center payload torque (angle sense): moment cross g_body.
        tx = my * gbz - mz * gby
        ty = mz * gbx - mx * gbz
        tz = mx * gby - my * gbx

        # Inner attitude tracker: critically-damped-ish 2nd order on roll and
        # pitch, first-order lag on yaw rate.
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

        # Thrust along the updated body z axis.
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
