"""Smooth scalar functions and grouped constraint blocks.

Costs and constraints are supplied with analytic gradients. Hessians may be
omitted, in which case a central finite-difference of the gradient is used
(step 1e-6 * (1 + |x|)). Quadratic functions carry their (Q, q, c) data
explicitly so downstream sensitivity code can use the matrix blocks directly.
"""

from __future__ import annotations

import numpy as np

FD_HESS_STEP = 1e-6


def fd_gradient(fun, x, step=None):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    if step is None:
        step = 1e-6 * (1.0 + np.abs(x))
    else:
        step = np.full_like(x, step)
    g = np.zeros_like(x)
    for j in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[j] += step[j]
        xm[j] -= step[j]
        g[j] = (fun(xp) - fun(xm)) / (2.0 * step[j])
    return g


def fd_hessian_from_grad(grad, x):
    """Central finite-difference Hessian built from a gradient callback."""
    x = np.asarray(x, dtype=float)
    step = FD_HESS_STEP * (1.0 + np.abs(x))
    n = x.size
    H = np.zeros((n, n))
    for j in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[j] += step[j]
        xm[j] -= step[j]
        H[:, j] = (np.asarray(grad(xp)) - np.asarray(grad(xm))) / (2.0 * step[j])
    return 0.5 * (H + H.T)


class SmoothFunction:
    """Scalar function over a designated variable block.

    Parameters
    ----------
    dim : size of the input block.
    value : callable x -> float
    grad : callable x -> (dim,) array. Required (analytic).
    hess : callable x -> (dim, dim) array, or None for the FD fallback.
    quadratic : flag marking exact quadratic structure.
    """

    def __init__(self, dim, value, grad, hess=None, quadratic=False):
        self.dim = int(dim)
        self._value = value
        self._grad = grad
        self._hess = hess
        self.quadratic = bool(quadratic)

    def value(self, x):
        return float(self._value(np.asarray(x, dtype=float)))

    def grad(self, x):
        return np.asarray(self._grad(np.asarray(x, dtype=float)), dtype=float)

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        if self._hess is not None:
            return np.asarray(self._hess(x), dtype=float)
        return fd_hessian_from_grad(self._grad, x)


class QuadraticFunction(SmoothFunction):
    """f(x) = 0.5 x'Qx + q'x + c with Q symmetric."""

    def __init__(self, Q, q, c=0.0):
        Q = np.asarray(Q, dtype=float)
        q = np.asarray(q, dtype=float)
        if Q.shape != (q.size, q.size):
            raise ValueError("Q must be square and match q")
        Q = 0.5 * (Q + Q.T)
        self.Q = Q
        self.q = q
        self.c = float(c)
        super().__init__(
            dim=q.size,
            value=lambda x: 0.5 * x @ Q @ x + q @ x + self.c,
            grad=lambda x: Q @ x + q,
            hess=lambda x: Q,
            quadratic=True,
        )


def linear(a, c=0.0):
    """a'x + c as a QuadraticFunction (zero curvature)."""
    a = np.asarray(a, dtype=float)
    return QuadraticFunction(np.zeros((a.size, a.size)), a, c)


class ConstraintBlock:
    """A group of p scalar constraints sharing vectorized callbacks.

    value(x) -> (p,), jac(x) -> (p, dim), hess_combo(x, w) -> (dim, dim)
    returning sum_j w_j * Hessian(c_j). Grouping keeps assembly fast for
    structured games (e.g. stage-wise dynamics constraints).
    """

    def __init__(self, dim, size, value, jac, hess_combo=None):
        self.dim = int(dim)
        self.size = int(size)
        self._value = value
        self._jac = jac
        self._hess_combo = hess_combo

    def value(self, x):
        v = np.asarray(self._value(np.asarray(x, dtype=float)), dtype=float)
        return v.reshape(self.size)

    def jac(self, x):
        J = np.asarray(self._jac(np.asarray(x, dtype=float)), dtype=float)
        return J.reshape(self.size, self.dim)

    def hess_combo(self, x, w):
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        if self._hess_combo is not None:
            return np.asarray(self._hess_combo(x, w), dtype=float)
        # FD fallback on the weighted Jacobian row sum
        grad = lambda y: w @ self.jac(y)
        return fd_hessian_from_grad(grad, x)

    @staticmethod
    def from_scalars(funcs, dim):
        """Wrap a list of SmoothFunction into one block."""
        funcs = list(funcs)

        def value(x):
            return np.array([f.value(x) for f in funcs])

        def jac(x):
            if not funcs:
                return np.zeros((0, dim))
            return np.vstack([f.grad(x) for f in funcs])

        def hess_combo(x, w):
            H = np.zeros((dim, dim))
            for wj, f in zip(w, funcs):
                if wj != 0.0:
                    H += wj * f.hess(x)
            return H

        return ConstraintBlock(dim, len(funcs), value, jac, hess_combo)
