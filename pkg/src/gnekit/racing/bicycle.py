"""Kinematic bicycle in Frenet coordinates with explicit-Euler stepping.

State: v (speed), psi (heading error to the center-line), s (arc length),
e (lateral deviation); X, Y are recomputed from (s, e) via the track map.
Rates: v' = u_a, psi' = (v/l) tan(u_delta) - kappa(s) sdot,
sdot = v cos(psi) / (1 - kappa(s) e), e' = v sin(psi).

All step functions broadcast: x4 of shape (..., 4) and u of shape (..., 2)
produce (..., 4) values, (..., 4, 6) Jacobians and (..., 4, 6, 6) Hessians
over the per-step variables (v, psi, s, e, u_a, u_delta).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WHEELBASE = 0.25  # m, small-RC-car scale


@dataclass
class CarState:
    v: float
    psi: float
    s: float
    e: float
    X: float = 0.0
    Y: float = 0.0

    def frenet(self):
        return np.array([self.v, self.psi, self.s, self.e])

    @staticmethod
    def on_track(track, v, psi, s, e):
        X, Y = track.to_inertial(s, e)
        return CarState(float(v), float(psi), float(s), float(e),
                        float(X), float(Y))


@dataclass
class CarInput:
    u_a: float
    u_delta: float

    def as_array(self):
        return np.array([self.u_a, self.u_delta])


def step_frenet(x4, u, track, dt, wheelbase=WHEELBASE):
    """One Euler step of the 4-dim Frenet state. x4 = [..., (v, psi, s, e)]."""
    x4 = np.asarray(x4, dtype=float)
    u = np.asarray(u, dtype=float)
    v, psi, s, e = (x4[..., i] for i in range(4))
    ua, ud = u[..., 0], u[..., 1]
    k = np.asarray(track.curvature(s))
    D = 1.0 - k * e
    sdot = v * np.cos(psi) / D
    return np.stack([
        v + ua * dt,
        psi + (v * np.tan(ud) / wheelbase - k * sdot) * dt,
        s + sdot * dt,
        e + v * np.sin(psi) * dt,
    ], axis=-1)


def step_jacobian(x4, u, track, dt, wheelbase=WHEELBASE):
    """d(next state)/d(v, psi, s, e, u_a, u_delta), shape (..., 4, 6)."""
    x4 = np.asarray(x4, dtype=float)
    u = np.asarray(u, dtype=float)
    v, psi, s, e = (x4[..., i] for i in range(4))
    ud = u[..., 1]
    k = np.asarray(track.curvature(s))
    kd = np.asarray(track.curvature_deriv(s))
    D = 1.0 - k * e
    c, sn = np.cos(psi), np.sin(psi)
    sec2 = 1.0 / np.cos(ud) ** 2
    sdot = v * c / D
    sd_v = c / D
    sd_psi = -v * sn / D
    sd_s = v * c * e * kd / D ** 2
    sd_e = v * c * k / D ** 2
    J = np.zeros(x4.shape[:-1] + (4, 6))
    J[..., 0, 0] = 1.0
    J[..., 0, 4] = dt
    J[..., 1, 0] = dt * (np.tan(ud) / wheelbase - k * sd_v)
    J[..., 1, 1] = 1.0 - dt * k * sd_psi
    J[..., 1, 2] = -dt * (kd * sdot + k * sd_s)
    J[..., 1, 3] = -dt * k * sd_e
    J[..., 1, 5] = dt * v * sec2 / wheelbase
    J[..., 2, 0] = dt * sd_v
    J[..., 2, 1] = dt * sd_psi
    J[..., 2, 2] = 1.0 + dt * sd_s
    J[..., 2, 3] = dt * sd_e
    J[..., 3, 0] = dt * sn
    J[..., 3, 1] = dt * v * c
    J[..., 3, 3] = 1.0
    return J


def step_hessians(x4, u, track, dt, wheelbase=WHEELBASE):
    """Per-row Hessians of the Euler step, shape (..., 4, 6, 6)."""
    x4 = np.asarray(x4, dtype=float)
    u = np.asarray(u, dtype=float)
    v, psi, s, e = (x4[..., i] for i in range(4))
    ud = u[..., 1]
    k = np.asarray(track.curvature(s))
    kd = np.asarray(track.curvature_deriv(s))
    kdd = np.asarray(track.curvature_second(s))
    D = 1.0 - k * e
    c, sn = np.cos(psi), np.sin(psi)
    tanu = np.tan(ud)
    sec2 = 1.0 / np.cos(ud) ** 2
    sdot = v * c / D
    sd_v = c / D
    sd_psi = -v * sn / D
    sd_s = v * c * e * kd / D ** 2
    sd_e = v * c * k / D ** 2

    # Hessian of sdot over (v, psi, s, e)
    Hs = np.zeros(x4.shape[:-1] + (6, 6))
    Hs[..., 0, 1] = Hs[..., 1, 0] = -sn / D
    Hs[..., 0, 2] = Hs[..., 2, 0] = c * e * kd / D ** 2
    Hs[..., 0, 3] = Hs[..., 3, 0] = c * k / D ** 2
    Hs[..., 1, 1] = -v * c / D
    Hs[..., 1, 2] = Hs[..., 2, 1] = -v * sn * e * kd / D ** 2
    Hs[..., 1, 3] = Hs[..., 3, 1] = -v * sn * k / D ** 2
    Hs[..., 2, 2] = v * c * e * (kdd * D + 2.0 * e * kd ** 2) / D ** 3
    Hs[..., 2, 3] = Hs[..., 3, 2] = v * c * kd * (1.0 + e * k) / D ** 3
    Hs[..., 3, 3] = 2.0 * v * c * k ** 2 / D ** 3

    # Hessian of kappa(s) * sdot: product rule in the s-slots
    Hks = k[..., None, None] * Hs
    sd_grad = np.stack([sd_v, sd_psi, sd_s, sd_e,
                        np.zeros_like(v), np.zeros_like(v)], axis=-1)
    Hks[..., 2, :] += kd[..., None] * sd_grad
    Hks[..., :, 2] += kd[..., None] * sd_grad
    Hks[..., 2, 2] += kdd * sdot

    H = np.zeros(x4.shape[:-1] + (4, 6, 6))
    # psi row: dt * (v tan(ud)/l - kappa sdot)
    H[..., 1, 0, 5] = H[..., 1, 5, 0] = dt * sec2 / wheelbase
    H[..., 1, 5, 5] = dt * v * 2.0 * sec2 * tanu / wheelbase
    H[..., 1, :, :] -= dt * Hks
    # s row: dt * sdot
    H[..., 2, :, :] = dt * Hs
    # e row: dt * v * sin(psi)
    H[..., 3, 0, 1] = H[..., 3, 1, 0] = dt * c
    H[..., 3, 1, 1] = -dt * v * sn
    return H


def bicycle_step(state, inp, track, dt, wheelbase=WHEELBASE):
    """Advance one CarState by explicit Euler; (X, Y) follow the track map.

    Returns (next_state, left_track) where left_track flags |e| > half width.
    """
    x4 = step_frenet(state.frenet(), inp.as_array(), track, dt, wheelbase)
    nxt = CarState.on_track(track, *x4)
    return nxt, bool(abs(nxt.e) > track.half_width)
