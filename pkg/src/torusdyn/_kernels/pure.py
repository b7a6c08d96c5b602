"""NumPy fallback kernels for orbit iteration.

A compiled lift is a short program of steps applied left to right.  The
packed layout (see :mod:`torusdyn.lift`) uses plain arrays so the same
data feeds either backend:

* kind 0 "base":   (x, y) += (alpha + P(x, y), beta + Q(x, y))
* kind 1 "affine": (x, y) -> M (x, y) + (tx, ty), M an integer matrix
* kind 2 "invbase": Newton inversion of a "base" step

P and Q are trigonometric polynomials, sums of
``amp_sin*sin(2*pi*(kx*x + ky*y)) + amp_cos*cos(2*pi*(kx*x + ky*y))``.
The phase is reduced to turns (t - rint(t)) before multiplying by 2*pi,
which keeps the evaluation numerically periodic far from the origin.
"""

import numpy as np

NAME = "pure"

_TWO_PI = 2.0 * np.pi

NEWTON_TOL = 1e-12
NEWTON_BUDGET = 100


def _trig_sum(terms, x, y):
    """Evaluate one trig polynomial at arrays x, y."""
    acc = np.zeros_like(x)
    for kx, ky, a_sin, a_cos in terms:
        t = kx * x + ky * y
        r = _TWO_PI * (t - np.rint(t))
        if a_sin != 0.0:
            acc += a_sin * np.sin(r)
        if a_cos != 0.0:
            acc += a_cos * np.cos(r)
    return acc


def _trig_sum_jac(terms, x, y):
    """Value and partials (v, dvx, dvy) of one trig polynomial."""
    v = np.zeros_like(x)
    dvx = np.zeros_like(x)
    dvy = np.zeros_like(x)
    for kx, ky, a_sin, a_cos in terms:
        t = kx * x + ky * y
        r = _TWO_PI * (t - np.rint(t))
        s = np.sin(r)
        c = np.cos(r)
        v += a_sin * s + a_cos * c
        d = _TWO_PI * (a_sin * c - a_cos * s)
        dvx += kx * d
        dvy += ky * d
    return v, dvx, dvy


def _base_step(step, x, y):
    alpha, beta = step.trans
    return x + alpha + _trig_sum(step.pterms, x, y), y + beta + _trig_sum(step.qterms, x, y)


def _invbase_step(step, x, y):
    """Solve base(z) = (x, y) per point by damped-free Newton iteration.

    Converged points are frozen so the result for each point does not
    depend on which other points share the batch.
    """
    alpha, beta = step.trans
    zx = x - alpha
    zy = y - beta
    active = np.ones(x.shape, dtype=bool)
    for _ in range(NEWTON_BUDGET):
        ax, ay = zx[active], zy[active]
        p, px, py = _trig_sum_jac(step.pterms, ax, ay)
        q, qx, qy = _trig_sum_jac(step.qterms, ax, ay)
        rx = ax + alpha + p - x[active]
        ry = ay + beta + q - y[active]
        done = np.maximum(np.abs(rx), np.abs(ry)) < NEWTON_TOL
        if done.all():
            active[active] = False
            break
        # Jacobian of the base step: [[1+px, py], [qx, 1+qy]]
        j11 = 1.0 + px
        j22 = 1.0 + qy
        det = j11 * j22 - py * qx
        dx = (j22 * rx - py * ry) / det
        dy = (j11 * ry - qx * rx) / det
        dx[done] = 0.0
        dy[done] = 0.0
        zx[active] = ax - dx
        zy[active] = ay - dy
        still = np.zeros_like(active)
        still[active] = ~done
        active = still
        if not active.any():
            break
    if active.any():
        raise ArithmeticError(
            "inverse evaluation did not converge within %d Newton steps; "
            "the map may not be invertible" % NEWTON_BUDGET
        )
    return zx, zy


def apply_program(program, x, y):
    """Apply every step of the program once to arrays x, y."""
    x = np.array(x, dtype=np.float64, copy=True)
    y = np.array(y, dtype=np.float64, copy=True)
    for step in program:
        if step.kind == 0:
            x, y = _base_step(step, x, y)
        elif step.kind == 1:
            a, b, c, d = step.mat
            tx, ty = step.trans
            x, y = a * x + b * y + tx, c * x + d * y + ty
        else:
            x, y = _invbase_step(step, x, y)
    return x, y


def run_orbits(program, x0, y0, n, nmid):
    """Iterate the program n times from (x0, y0).

    Returns (xmid, ymid, xfin, yfin, dbox) where (xmid, ymid) is the state
    after nmid applications and dbox = (dxmin, dxmax, dymin, dymax) bounds
    every per-application displacement observed over the whole batch.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    y = np.array(y0, dtype=np.float64, copy=True)
    xmid = x.copy()
    ymid = y.copy()
    dxmin = dymin = np.inf
    dxmax = dymax = -np.inf
    for k in range(1, n + 1):
        xn, yn = apply_program(program, x, y)
        dx = xn - x
        dy = yn - y
        if dx.size:
            dxmin = min(dxmin, float(dx.min()))
            dxmax = max(dxmax, float(dx.max()))
            dymin = min(dymin, float(dy.min()))
            dymax = max(dymax, float(dy.max()))
        x, y = xn, yn
        if k == nmid:
            xmid = x.copy()
            ymid = y.copy()
    return xmid, ymid, x, y, (dxmin, dxmax, dymin, dymax)
