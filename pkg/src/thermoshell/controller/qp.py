"""Box-constrained convex QP by accelerated projected gradient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class QPResult:
    x: np.ndarray
    objective: float
    iterations: int
    converged: bool
    pg_norm: float


def box_qp_objective(H, g, x):
    return 0.5 * float(x @ H @ x) + float(g @ x)


def solve_box_qp(H, g, lower, upper, x0=None, tol=1e-8, max_iter=500):
    """Minimize ``0.5 x'Hx + g'x`` subject to ``lower <= x <= upper``.

    Nesterov-accelerated projected gradient with gradient-based adaptive
    restart, run on the Jacobi-scaled problem ``x = D y``, ``D = diag(H)^-1/2``
    (a diagonal change of variables keeps the feasible set a box). Stops when
    the gradient-mapping step, mapped back to input units, has infinity norm
    below ``tol``, or after ``max_iter`` iterations. The test is unchanged when
    ``H`` and ``g`` are multiplied by a common positive constant.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    diag = np.diag(H)
    if np.any(diag <= 0):
        raise ValueError("H must be positive definite")
    d = 1.0 / np.sqrt(diag)
    Hs = H * np.outer(d, d)
    gs = g * d
    lo = np.asarray(lower, dtype=float) / d
    hi = np.asarray(upper, dtype=float) / d
    lipschitz = float(np.linalg.eigvalsh(Hs)[-1])
    step = 1.0 / lipschitz
    start = np.zeros_like(g) if x0 is None else np.asarray(x0, dtype=float) / d
    y_prev = np.clip(start, lo, hi)
    z = y_prev.copy()
    theta = 1.0
    pg = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        grad_z = Hs @ z + gs
        y = np.clip(z - step * grad_z, lo, hi)
        pg = float(np.max(np.abs(d * (y - np.clip(y - step * (Hs @ y + gs), lo, hi)))))
        if pg < tol:
            y_prev = y
            break
        if float(grad_z @ (y - y_prev)) > 0:  # momentum opposes descent: restart
            theta = 1.0
            z = y_prev.copy()
            continue
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        z = y + ((theta - 1.0) / theta_new) * (y - y_prev)
        y_prev, theta = y, theta_new
    # d * (upper / d) can round one ulp past the bound
    x = np.clip(d * y_prev, lower, upper)
    return QPResult(x, box_qp_objective(H, g, x), it, pg < tol, pg)
