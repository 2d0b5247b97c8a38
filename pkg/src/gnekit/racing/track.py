"""Track center-lines with smooth curvature and Frenet <-> inertial maps.

A track is declared as arc/line segments, but the curvature profile blends
each segment-to-segment jump with a quintic smoothstep over a +/- ``blend``
window so kappa(s) is C^2 everywhere. The heading integrates the blended
curvature in closed form; the center-line position integrates the heading
numerically once (per-cell Gauss quadrature) and is served by a cubic
spline. Beyond either end of an open track the geometry extrapolates
straight, so a finite episode never runs off the map. Positive lateral
deviation e points left of the travel direction.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline


def _smoothstep(t):
    """C^2 ramp 0 -> 1 on [0, 1]: 6t^5 - 15t^4 + 10t^3."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _smoothstep_d(t):
    out = np.zeros_like(t)
    m = (t > 0.0) & (t < 1.0)
    tm = t[m]
    out[m] = 30.0 * tm * tm * (tm - 1.0) ** 2
    return out


def _smoothstep_dd(t):
    out = np.zeros_like(t)
    m = (t > 0.0) & (t < 1.0)
    tm = t[m]
    out[m] = 60.0 * tm * (tm - 1.0) * (2.0 * tm - 1.0)
    return out


def _smoothstep_int(t):
    """Antiderivative of the ramp with value 0 at t = 0."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 4 * (t * (t - 3.0) + 2.5)


class Track:
    """Smooth-curvature track built from (length, curvature) segments."""

    def __init__(self, segments, half_width=0.5, closed=False,
                 origin=(0.0, 0.0), heading=0.0, blend=0.3, grid_step=0.002):
        lengths = np.array([float(L) for L, _ in segments])
        kappas = np.array([float(k) for _, k in segments])
        if np.any(lengths <= 0.0):
            raise ValueError("segment length must be positive")
        if blend <= 0.0:
            raise ValueError("blend window must be positive")
        self.half_width = float(half_width)
        self.closed = bool(closed)
        self.length = float(lengths.sum())
        self.blend = float(blend)
        self._origin = (float(origin[0]), float(origin[1]))
        self._heading = float(heading)
        cum = np.concatenate([[0.0], np.cumsum(lengths)])

        # Curvature transitions: jumps of kappa at boundary positions,
        # each spread over [p - blend, p + blend] by the smoothstep.
        # Open tracks extend straight, so virtual kappa outside is 0.
        if self.closed and abs(kappas[0] - kappas[-1]) > 0.0:
            raise ValueError("closed track needs matching curvature at the seam")
        outside = kappas[-1] if self.closed else 0.0
        values = np.concatenate([[0.0 if not self.closed else outside],
                                 kappas,
                                 [outside]])
        points = np.concatenate([[0.0], cum[1:-1], [self.length]])
        deltas = np.diff(values)
        keep = deltas != 0.0
        self._trans_pos = points[keep]
        self._trans_delta = deltas[keep]
        self._kappa_base = values[0]

        # center-line table: integrate the heading over a fine grid
        lo = min(0.0, (self._trans_pos - blend).min(initial=0.0))
        hi = max(self.length, (self._trans_pos + blend).max(initial=self.length))
        n_cells = max(2, int(np.ceil((hi - lo) / float(grid_step))))
        nodes = np.linspace(lo, hi, n_cells + 1)
        h = nodes[1] - nodes[0]
        gauss_x = np.array([-0.8611363115940526, -0.3399810435848563,
                            0.3399810435848563, 0.8611363115940526])
        gauss_w = np.array([0.3478548451374538, 0.6521451548625461,
                            0.6521451548625461, 0.3478548451374538])
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        pts = mids[:, None] + 0.5 * h * gauss_x[None, :]
        th = self.heading(pts.ravel()).reshape(pts.shape)
        dx = 0.5 * h * (np.cos(th) @ gauss_w)
        dy = 0.5 * h * (np.sin(th) @ gauss_w)
        # anchor the center-line at the declared origin (s = 0)
        cx = np.concatenate([[0.0], np.cumsum(dx)])
        cy = np.concatenate([[0.0], np.cumsum(dy)])
        i0 = int(np.searchsorted(nodes, 0.0))
        cx += self._origin[0] - cx[i0]
        cy += self._origin[1] - cy[i0]
        self._grid_lo, self._grid_hi = float(lo), float(hi)
        self._spline_x = CubicSpline(nodes, cx)
        self._spline_y = CubicSpline(nodes, cy)
        self._pose_lo = (cx[0], cy[0], float(self.heading(lo)))
        self._pose_hi = (cx[-1], cy[-1], float(self.heading(hi)))

    # -- curvature profile ------------------------------------------------

    def _wrap(self, s):
        s = np.asarray(s, dtype=float)
        return np.mod(s, self.length) if self.closed else s

    def curvature(self, s):
        s = self._wrap(s)
        t = (s[..., None] - self._trans_pos + self.blend) / (2.0 * self.blend)
        out = self._kappa_base + _smoothstep(t) @ self._trans_delta
        return float(out) if out.ndim == 0 else out

    def curvature_deriv(self, s):
        s = self._wrap(s)
        t = (s[..., None] - self._trans_pos + self.blend) / (2.0 * self.blend)
        out = (_smoothstep_d(t) @ self._trans_delta) / (2.0 * self.blend)
        return float(out) if out.ndim == 0 else out

    def curvature_second(self, s):
        s = self._wrap(s)
        t = (s[..., None] - self._trans_pos + self.blend) / (2.0 * self.blend)
        out = (_smoothstep_dd(t) @ self._trans_delta) / (2.0 * self.blend) ** 2
        return float(out) if out.ndim == 0 else out

    def heading(self, s):
        """Center-line heading theta(s) (exact integral of the curvature)."""
        s = self._wrap(s)
        w = self.blend
        t = (s[..., None] - self._trans_pos + w) / (2.0 * w)
        out = self._heading + self._kappa_base * s \
            + (2.0 * w * _smoothstep_int(t) + np.maximum(s[..., None] - self._trans_pos - w, 0.0)
               ) @ self._trans_delta
        return float(out) if out.ndim == 0 else out

    # -- center-line and maps ---------------------------------------------

    def center_xy(self, s):
        s = self._wrap(s)
        below = s < self._grid_lo
        above = s > self._grid_hi
        x = self._spline_x(np.clip(s, self._grid_lo, self._grid_hi))
        y = self._spline_y(np.clip(s, self._grid_lo, self._grid_hi))
        if np.any(below):
            x0, y0, th0 = self._pose_lo
            d = np.where(below, s - self._grid_lo, 0.0)
            x = x + d * np.cos(th0) * below
            y = y + d * np.sin(th0) * below
        if np.any(above):
            x1, y1, th1 = self._pose_hi
            d = np.where(above, s - self._grid_hi, 0.0)
            x = x + d * np.cos(th1) * above
            y = y + d * np.sin(th1) * above
        return x, y

    def center_pose(self, s):
        """(x_c, y_c, theta_c) of the center-line at arc length s."""
        x, y = self.center_xy(np.asarray(s, dtype=float))
        th = self.heading(s)
        if np.ndim(s) == 0:
            return float(x), float(y), float(th)
        return x, y, th

    def to_inertial(self, s, e):
        """Map Frenet (s, e) to inertial (X, Y)."""
        s = np.asarray(s, dtype=float)
        e = np.asarray(e, dtype=float)
        x, y = self.center_xy(s)
        th = self.heading(s)
        X = x - e * np.sin(th)
        Y = y + e * np.cos(th)
        if X.ndim == 0:
            return float(X), float(Y)
        return X, Y

    def position_jacobian(self, s, e):
        """First derivatives of (X, Y) w.r.t. (s, e); rows (X, Y).

        Batched inputs of shape (n,) return shape (n, 2, 2).
        """
        s = np.asarray(s, dtype=float)
        e = np.asarray(e, dtype=float)
        th = self.heading(s)
        k = self.curvature(s)
        c, sn = np.cos(th), np.sin(th)
        fac = 1.0 - np.asarray(k) * e
        J = np.empty(np.shape(s) + (2, 2))
        J[..., 0, 0] = fac * c
        J[..., 1, 0] = fac * sn
        J[..., 0, 1] = -sn
        J[..., 1, 1] = c
        return J

    def position_hessians(self, s, e):
        """Second derivatives over (s, e): (H_X, H_Y), each 2x2.

        Batched inputs return a pair of (n, 2, 2) arrays.
        """
        s = np.asarray(s, dtype=float)
        e = np.asarray(e, dtype=float)
        th = self.heading(s)
        k = np.asarray(self.curvature(s))
        kd = np.asarray(self.curvature_deriv(s))
        c, sn = np.cos(th), np.sin(th)
        fac = 1.0 - k * e
        # d2p/ds2 = fac*k*n - kd*e*t ;  d2p/(ds de) = -k*t ;  d2p/de2 = 0
        ss_x = fac * k * (-sn) - kd * e * c
        ss_y = fac * k * c - kd * e * sn
        se_x = -k * c
        se_y = -k * sn
        HX = np.zeros(np.shape(s) + (2, 2))
        HY = np.zeros(np.shape(s) + (2, 2))
        HX[..., 0, 0] = ss_x
        HX[..., 0, 1] = HX[..., 1, 0] = se_x
        HY[..., 0, 0] = ss_y
        HY[..., 0, 1] = HY[..., 1, 0] = se_y
        return HX, HY


def l_shaped_track(straight=6.0, radius=1.0, half_width=0.5, blend=0.3):
    """Two straights joined by a 90-degree left arc; open ends."""
    arc_len = 0.5 * np.pi * radius
    return Track([(straight, 0.0), (arc_len, 1.0 / radius), (straight, 0.0)],
                 half_width=half_width, closed=False, blend=blend)


def straight_track(length=20.0, half_width=0.5):
    return Track([(length, 0.0)], half_width=half_width, closed=False)
