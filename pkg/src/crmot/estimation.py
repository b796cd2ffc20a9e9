"""Least-squares recovery of loading, decay and interspecies parameters.

All fits are unweighted least squares. Positive scale parameters are
fitted in log space, which keeps them in bounds and makes the problem
well scaled whatever the units. Times are divided by the record length
before fitting so the optimizer sees the same numbers in s or ms.
Confidence half-widths come from the Gauss-Newton curvature
``s^2 (J^T J)^-1`` at the optimum (one standard error).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, nnls

from .trap import SQRT8
from .units import k_B


class FitDomainError(ValueError):
    pass


@dataclass
class FitResult:
    names: tuple
    values: np.ndarray
    half_widths: np.ndarray
    rss: float
    converged: bool
    iterations: int
    message: str = ""
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def error(self, name):
        return float(self.half_widths[self.names.index(name)])

    def as_dict(self):
        d = {n: float(v) for n, v in zip(self.names, self.values)}
        d.update({f"{n}_err": float(e) for n, e in zip(self.names, self.half_widths)})
        d.update(rss=float(self.rss), converged=bool(self.converged),
                 iterations=int(self.iterations), message=self.message)
        d.update(self.meta)
        return d

    def record(self):
        """Plain-text ``key = value`` lines."""
        lines = []
        for k, v in self.as_dict().items():
            if isinstance(v, float):
                v = f"{v:.9e}"
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


def add_noise(values, rel, seed):
    """Multiplicative Gaussian noise ``y (1 + rel * xi)`` from a seeded generator."""
    rng = np.random.default_rng(seed)
    values = np.asarray(values, dtype=float)
    return values * (1.0 + rel * rng.standard_normal(values.shape))


def _prepare(t, y, minimum=3):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise FitDomainError("time and data arrays must be one-dimensional and of equal length")
    if t.size < minimum:
        raise FitDomainError(f"need at least {minimum} points, got {t.size}")
    if not np.all(np.isfinite(t)) or not np.all(np.isfinite(y)):
        raise FitDomainError("data contain non-finite values")
    if np.any(np.diff(t) <= 0):
        raise FitDomainError("time points must be strictly increasing")
    return t, y


def _curvature_errors(sol, n_par):
    """Standard errors of the fitted (internal) parameters."""
    J = sol.jac
    dof = max(J.shape[0] - n_par, 1)
    s2 = 2.0 * sol.cost / dof
    try:
        cov = np.linalg.pinv(J.T @ J) * s2
        err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        err = np.full(n_par, np.inf)
    cond = np.linalg.cond(J) if J.size else np.inf
    return err, cond


def _solve(residual, p0, bounds=(-np.inf, np.inf)):
    return least_squares(residual, p0, bounds=bounds, method="trf", x_scale="jac",
                         ftol=1e-15, xtol=1e-15, gtol=1e-15, max_nfev=2000)


# ------------------------------------------------------------------ loading

def loading_curve(t, gamma, tau, n0=0.0):
    """``N(t) = G tau + (n0 - G tau) exp(-t/tau)``."""
    t = np.asarray(t, dtype=float)
    ss = gamma * tau
    return ss + (n0 - ss) * np.exp(-t / tau)


def fit_linear_loading(t, n):
    """Fit ``N = G tau (1 - exp(-t/tau))`` to a loading record starting at t=0.

    The result is flagged (``converged = False``) when tau is not
    identifiable: shorter than the sampling step, so the record is a flat
    plateau, or longer than a third of the record, so only the slope is seen.
    """
    t, n = _prepare(t, n)
    span = t[-1]
    if not span > 0:
        raise FitDomainError("loading record must extend past t = 0")
    u = t / span
    scale = np.max(np.abs(n))
    if scale == 0:
        raise FitDomainError("loading record is identically zero")
    y = n / scale

    # start from the 1 - 1/e crossing of the plateau
    plateau = np.mean(y[-max(3, y.size // 10):])
    cross = np.argmax(y >= (1 - np.exp(-1)) * plateau)
    tau0 = max(u[cross], u[1] if u.size > 1 else 1e-3, 1e-6)
    p0 = np.array([np.log(max(plateau, 1e-12) / tau0), np.log(tau0)])

    def res(p):
        g, tau = np.exp(p)
        return g * tau * -np.expm1(-u / tau) - y

    sol = _solve(res, p0)
    err, cond = _curvature_errors(sol, 2)
    g_u, tau_u = np.exp(sol.x)
    gamma = g_u * scale / span
    tau = tau_u * span
    dt_min = np.min(np.diff(t))
    ok = bool(sol.success)
    msg = sol.message
    if tau < dt_min or tau_u > 1.0 / 3.0 or not np.isfinite(cond) or cond > 1e10:
        ok = False
        msg = (f"tau not identifiable: fitted {tau:.3e} vs sampling step {dt_min:.3e}"
               f" and record length {span:.3e}")
    return FitResult(("gamma", "tau"), np.array([gamma, tau]),
                     np.array([gamma * err[0], tau * err[1]]),
                     rss=float(np.sum((res(sol.x) * scale) ** 2)),
                     converged=ok, iterations=int(sol.nfev), message=msg)


# ---------------------------------------------------------------- decay

def two_body_decay(t, n0, tau, k):
    """Solution of ``dN/dt = -N/tau - k N^2`` with ``N(0) = n0``."""
    t = np.asarray(t, dtype=float)
    e = np.exp(-t / tau)
    return n0 * e / (1.0 + k * n0 * tau * -np.expm1(-t / tau))


def fit_two_body_decay(t, n, v1):
    """Fit a free decay for ``(n0, tau, beta)``; ``v1`` is the cloud volume (cm^3).

    The fitted nonlinearity is ``c = k n0 tau >= 0`` with ``k = beta / (2^{3/2} v1)``.
    """
    t, n = _prepare(t, n)
    if not v1 > 0:
        raise FitDomainError("cloud volume must be > 0")
    t0 = t[0]
    span = t[-1] - t0
    u = (t - t0) / span
    scale = np.max(np.abs(n))
    if scale == 0:
        raise FitDomainError("decay record is identically zero")
    y = n / scale

    # initial guess from the late-time log slope and the initial slope
    pos = y > 0
    tail = pos & (u >= 0.5)
    if tail.sum() >= 2:
        slope = np.polyfit(u[tail], np.log(y[tail]), 1)[0]
        tau0 = -1.0 / slope if slope < 0 else 1.0
    else:
        tau0 = 0.2
    head = slice(0, max(3, y.size // 20))
    d0 = np.polyfit(u[head], y[head], 1)[0]
    c0 = max(-d0 * tau0 / max(y[0], 1e-12) - 1.0, 0.0)
    p0 = np.array([np.log(max(y[0], 1e-12)), np.log(tau0), c0])

    def model(p, uu):
        n0, tau, c = np.exp(p[0]), np.exp(p[1]), p[2]
        return n0 * np.exp(-uu / tau) / (1.0 + c * -np.expm1(-uu / tau))

    def res(p):
        return model(p, u) - y

    sol = _solve(res, p0, bounds=([-np.inf, -np.inf, 0.0], [np.inf, np.inf, np.inf]))
    err, cond = _curvature_errors(sol, 3)
    n0_u, tau_u, c = np.exp(sol.x[0]), np.exp(sol.x[1]), sol.x[2]
    n0, tau = n0_u * scale, tau_u * span
    k = c / (n0 * tau)
    beta = k * SQRT8 * v1
    # beta ~ c / (n0 tau), with log-space errors on n0 and tau
    beta_err = SQRT8 * v1 / (n0 * tau) * np.sqrt(err[2] ** 2 + c * c * (err[0] ** 2 + err[1] ** 2))
    return FitResult(("n0", "tau", "beta"), np.array([n0, tau, beta]),
                     np.array([n0 * err[0], tau * err[1], beta_err]),
                     rss=float(np.sum((res(sol.x) * scale) ** 2)),
                     converged=bool(sol.success) and np.isfinite(cond), iterations=int(sol.nfev),
                     message=sol.message)


# ---------------------------------------------------------- interspecies

def interspecies_curve(t, gamma, tau, k, t1, t2, n_start=None):
    """Piecewise solution of ``dN/dt = G - N/tau - k N [t1 <= t < t2]`` loading from 0 at t=0.

    ``n_start`` overrides the number at ``t1`` (default: loading from zero).
    """
    t = np.asarray(t, dtype=float)
    n1 = loading_curve(t1, gamma, tau) if n_start is None else n_start
    lam = 1.0 / tau + k
    n_on = gamma / lam
    n2 = n_on + (n1 - n_on) * np.exp(-lam * (t2 - t1))
    out = np.where(t < t1, loading_curve(t, gamma, tau),
                   np.where(t < t2, n_on + (n1 - n_on) * np.exp(-lam * (t - t1)),
                            gamma * tau + (n2 - gamma * tau) * np.exp(-(t - t2) / tau)))
    return out


def fit_interspecies(t, n, t1, t2, nbar, gamma, tau):
    """Fit ``beta_BF`` on the ``t >= t1`` part of a dual-MOT record.

    ``gamma`` and ``tau`` come from the ``t < t1`` loading fit; ``nbar`` is the
    mean partner density (cm^-3). Only the product ``beta_BF nbar`` enters the
    model, so it is fitted and divided by ``nbar`` at the end.
    """
    t, n = _prepare(t, n)
    if not (t[0] <= t1 < t2 <= t[-1]):
        raise FitDomainError(f"segment [{t1}, {t2}] must lie inside the record [{t[0]}, {t[-1]}]")
    if not nbar > 0:
        raise FitDomainError("partner density must be > 0")
    sel = t >= t1
    if sel.sum() < 3:
        raise FitDomainError("need at least 3 points after t1")
    tt, yy = t[sel], n[sel]
    scale = gamma * tau

    def res(p):
        return (interspecies_curve(tt, gamma, tau, p[0] / tau, t1, t2) - yy) / scale

    # initial guess from the depth of the dip: N_on / N_ss = 1 / (1 + k tau)
    during = (tt >= t1 + 0.5 * (t2 - t1)) & (tt < t2)
    ratio = np.mean(yy[during]) / scale if during.any() else 1.0
    x0 = max(1.0 / max(ratio, 1e-3) - 1.0, 0.0)
    sol = _solve(res, np.array([x0]), bounds=([0.0], [np.inf]))
    err, _ = _curvature_errors(sol, 1)
    k = sol.x[0] / tau
    beta = k / nbar
    return FitResult(("beta_bf",), np.array([beta]), np.array([err[0] / tau / nbar]),
                     rss=float(np.sum((res(sol.x) * scale) ** 2)),
                     converged=bool(sol.success), iterations=int(sol.nfev), message=sol.message,
                     meta={"k": float(k)})


# --------------------------------------------------------------------- TOF

def fit_tof_temperature(t, sigma, mass):
    """Fit ``sigma^2 = sigma0^2 + (k_B T / m) t^2`` with both coefficients >= 0 (SI)."""
    t, sigma = _prepare(t, sigma)
    if not mass > 0:
        raise FitDomainError("mass must be > 0")
    tscale = np.max(np.abs(t)) or 1.0
    sscale = np.max(np.abs(sigma)) or 1.0
    A = np.column_stack([np.ones_like(t), (t / tscale) ** 2])
    b = (sigma / sscale) ** 2
    coef, rnorm = nnls(A, b)
    a0, a1 = coef[0] * sscale ** 2, coef[1] * sscale ** 2 / tscale ** 2
    sigma0 = np.sqrt(a0)
    temp = a1 * mass / k_B
    dof = max(t.size - 2, 1)
    s2 = rnorm ** 2 / dof
    cov = np.linalg.pinv(A.T @ A) * s2
    e0 = np.sqrt(cov[0, 0]) * sscale ** 2
    e1 = np.sqrt(cov[1, 1]) * sscale ** 2 / tscale ** 2
    sig_err = e0 / (2 * sigma0) if sigma0 > 0 else np.sqrt(e0)
    return FitResult(("sigma0", "temperature"), np.array([sigma0, temp]),
                     np.array([sig_err, e1 * mass / k_B]),
                     rss=float(np.sum((A @ coef - b) ** 2) * sscale ** 4),
                     converged=True, iterations=1, message="closed-form nonnegative least squares")
