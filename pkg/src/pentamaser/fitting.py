"""Least-squares estimators for the characterisation data.

Nonlinear models are minimised with a Levenberg-Marquardt solver
(``scipy.optimize.least_squares(method="lm")``) fed with analytic Jacobians;
each nonlinear fit is restarted from a few perturbed initial guesses and the
lowest residual wins. Standard errors come from s²(JᵀJ)⁻¹ at the optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import least_squares, minimize_scalar

from .errors import DegenerateFit, InsufficientData, NoBreakpoint, NoConvergence, ValidationError

__all__ = [
    "FitResult",
    "MAX_ITERATIONS",
    "damped_cosine",
    "damped_cosine_jacobian",
    "lorentzian",
    "lorentzian_jacobian",
    "double_lorentzian",
    "double_lorentzian_jacobian",
    "hinge",
    "fit_damped_oscillation",
    "fit_line",
    "fit_lorentzian",
    "fit_double_lorentzian",
    "fit_piecewise_linear",
    "fit_rabi_damping",
]

MAX_ITERATIONS = 500
RSS_TOL = 1e-10
SINGULAR_CONDITION = 1e12


@dataclass(frozen=True)
class FitResult:
    params: dict[str, float]
    stderr: dict[str, float]
    rss: float
    converged: bool
    iterations: int
    n_points: int
    degenerate: bool = False
    extra: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    def to_dict(self) -> dict:
        return {
            "params": dict(self.params),
            "stderr": dict(self.stderr),
            "rss": self.rss,
            "converged": self.converged,
            "iterations": self.iterations,
            "n_points": self.n_points,
            "degenerate": self.degenerate,
            **({"extra": self.extra} if self.extra else {}),
        }


def _xy(x: ArrayLike, y: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValidationError("x and y must have the same length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("data must be finite")
    return x, y


def _covariance(jac: NDArray, rss: float, n: int) -> tuple[NDArray, bool]:
    p = jac.shape[1]
    jtj = jac.T @ jac
    cond = np.linalg.cond(jtj)
    if not np.isfinite(cond) or cond > SINGULAR_CONDITION:
        return np.full((p, p), np.inf), True
    dof = n - p
    s2 = rss / dof if dof > 0 else math.nan
    return s2 * np.linalg.inv(jtj), False


# ---------------------------------------------------------------- models


def damped_cosine(t, A, gamma, omega, phi, offset):
    t = np.asarray(t, dtype=float)
    return A * np.exp(-gamma * t) * np.cos(omega * t + phi) + offset


def damped_cosine_jacobian(t, A, gamma, omega, phi, offset):
    t = np.asarray(t, dtype=float)
    env = np.exp(-gamma * t)
    c, s = np.cos(omega * t + phi), np.sin(omega * t + phi)
    return np.column_stack(
        [env * c, -A * t * env * c, -A * t * env * s, -A * env * s, np.ones_like(t)]
    )


def lorentzian(x, center, fwhm, amplitude, offset):
    hw2 = (0.5 * fwhm) ** 2
    return amplitude * hw2 / ((np.asarray(x, dtype=float) - center) ** 2 + hw2) + offset


def lorentzian_jacobian(x, center, fwhm, amplitude, offset):
    d = np.asarray(x, dtype=float) - center
    hw2 = (0.5 * fwhm) ** 2
    den = d**2 + hw2
    shape = hw2 / den
    return np.column_stack(
        [
            amplitude * 2 * d * hw2 / den**2,
            amplitude * 0.5 * fwhm * d**2 / den**2,
            shape,
            np.ones_like(d),
        ]
    )


def double_lorentzian(x, c1, w1, a1, c2, w2, a2, offset):
    return lorentzian(x, c1, w1, a1, 0.0) + lorentzian(x, c2, w2, a2, 0.0) + offset


def double_lorentzian_jacobian(x, c1, w1, a1, c2, w2, a2, offset):
    j1 = lorentzian_jacobian(x, c1, w1, a1, 0.0)[:, :3]
    j2 = lorentzian_jacobian(x, c2, w2, a2, 0.0)[:, :3]
    return np.column_stack([j1, j2, np.ones(len(j1))])


def hinge(x, breakpoint, slope1, slope2, intercept):
    """Continuous two-segment line; ``intercept`` is the first segment at x = 0."""
    x = np.asarray(x, dtype=float)
    y_break = intercept + slope1 * breakpoint
    return np.where(x < breakpoint, intercept + slope1 * x, y_break + slope2 * (x - breakpoint))


def _hinge_jacobian(x, breakpoint, slope1, slope2, intercept):
    right = (np.asarray(x) >= breakpoint).astype(float)
    return np.column_stack(
        [
            (slope1 - slope2) * right,
            np.where(right > 0, breakpoint, x),
            right * (x - breakpoint),
            np.ones_like(x),
        ]
    )


# ---------------------------------------------------------------- engine


def _least_squares(
    model: Callable,
    jacobian: Callable,
    names: Sequence[str],
    x: NDArray,
    y: NDArray,
    starts: Sequence[Sequence[float]],
) -> FitResult:
    best = None
    for p0 in starts:
        res = least_squares(
            lambda p: model(x, *p) - y,
            np.asarray(p0, dtype=float),
            jac=lambda p: jacobian(x, *p),
            method="lm",
            ftol=RSS_TOL,
            xtol=1e-12,
            gtol=1e-12,
            max_nfev=MAX_ITERATIONS,
        )
        if res.status > 0 and (best is None or res.cost < best.cost):
            best = res
    if best is None:
        raise NoConvergence(f"no start converged within {MAX_ITERATIONS} iterations")
    rss = float(2.0 * best.cost)
    cov, degenerate = _covariance(best.jac, rss, len(x))
    se = np.sqrt(np.diag(cov)) if not degenerate else np.full(len(names), np.inf)
    return FitResult(
        params=dict(zip(names, map(float, best.x))),
        stderr=dict(zip(names, map(float, se))),
        rss=rss,
        converged=True,
        iterations=int(best.nfev),
        n_points=len(x),
        degenerate=degenerate,
    )


# ---------------------------------------------------------------- estimators


def _dominant_frequency(t: NDArray, y: NDArray) -> tuple[float, float]:
    """Angular frequency and phase of the strongest non-DC spectral component."""
    dt = np.median(np.diff(t))
    n_fft = 1 << int(math.ceil(math.log2(len(t) * 16)))
    spec = np.fft.rfft(y - y.mean(), n_fft)
    freqs = np.fft.rfftfreq(n_fft, dt)
    power = np.abs(spec)
    power[0] = 0.0
    k = int(np.argmax(power))
    if power[k] <= 1e-12 * max(np.abs(y).max(), 1e-300) * len(t):
        raise InsufficientData("no spectral peak in the signal")
    return 2 * math.pi * freqs[k], float(np.angle(spec[k]))


def fit_damped_oscillation(t: ArrayLike, y: ArrayLike, restarts: int = 3) -> FitResult:
    """Fit A·exp(-Γt)·cos(Ω₁t + φ) + offset; t in µs gives Γ in µs⁻¹ and Ω₁ in rad/µs."""
    t, y = _xy(t, y)
    if len(t) < 8:
        raise InsufficientData("need at least 8 samples")
    if np.ptp(y) == 0:
        raise InsufficientData("constant signal has no spectral peak")
    order = np.argsort(t)
    t, y = t[order], y[order]
    omega, _ = _dominant_frequency(t, y)
    span = t[-1] - t[0]
    if omega <= 0 or span * omega < 2 * math.pi * (1 - 1e-9):
        raise InsufficientData("data must span at least one oscillation period")
    offset = float(np.mean(y))
    amp = float(np.ptp(y) / 2)
    t0 = t[0]
    starts = []
    for k in range(max(restarts, 1)):
        gamma0 = [1.0 / span, 0.1 / span, 5.0 / span][k % 3]
        for phi0 in (0.0, math.pi / 2, math.pi, -math.pi / 2):
            starts.append([amp, gamma0, omega, phi0 - omega * t0, offset])
    res = _least_squares(
        damped_cosine, damped_cosine_jacobian, ("A", "gamma", "omega", "phi", "offset"), t, y, starts
    )
    p = dict(res.params)
    if p["A"] < 0:
        p["A"] = -p["A"]
        p["phi"] += math.pi
    if p["omega"] < 0:
        p["omega"], p["phi"] = -p["omega"], -p["phi"]
    p["phi"] = math.remainder(p["phi"], 2 * math.pi)
    return FitResult(**{**res.__dict__, "params": p})


def fit_line(x: ArrayLike, y: ArrayLike) -> FitResult:
    """Ordinary least squares y = slope·x + intercept."""
    x, y = _xy(x, y)
    if np.unique(x).size < 2:
        raise DegenerateFit("need at least two distinct x values")
    n = len(x)
    X = np.column_stack([x, np.ones(n)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    rss = float(resid @ resid)
    if n > 2:
        cov = rss / (n - 2) * np.linalg.inv(X.T @ X)
        se = np.sqrt(np.diag(cov))
    else:
        se = np.full(2, math.nan)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / ss_tot if ss_tot > 0 else 1.0
    return FitResult(
        params={"slope": float(coef[0]), "intercept": float(coef[1])},
        stderr={"slope": float(se[0]), "intercept": float(se[1])},
        rss=rss,
        converged=True,
        iterations=1,
        n_points=n,
        extra={"r_squared": r2},
    )


def fit_rabi_damping(rabi_frequency_mhz: ArrayLike, damping_per_us: ArrayLike) -> FitResult:
    """Line Γ = 1/(2T₂) + ε·Ω₁/2π; adds ``T2`` (µs) and ``epsilon`` to ``extra``."""
    res = fit_line(rabi_frequency_mhz, damping_per_us)
    b, sb = res.params["intercept"], res.stderr["intercept"]
    T2 = 1.0 / (2.0 * b) if b > 0 else math.inf
    extra = dict(res.extra)
    extra.update(T2=T2, T2_stderr=abs(T2 * sb / b) if b > 0 else math.nan, epsilon=res.params["slope"])
    return FitResult(**{**res.__dict__, "extra": extra})


def _half_width_guess(x: NDArray, y: NDArray, base: float, peak_idx: int) -> float:
    half = base + 0.5 * (y[peak_idx] - base)
    sign = 1.0 if y[peak_idx] >= base else -1.0
    inside = sign * (y - half) >= 0
    lo = hi = peak_idx
    while lo > 0 and inside[lo - 1]:
        lo -= 1
    while hi < len(x) - 1 and inside[hi + 1]:
        hi += 1
    width = x[hi] - x[lo]
    return float(width) if width > 0 else float(np.median(np.diff(x)) * 2)


def fit_lorentzian(x: ArrayLike, y: ArrayLike, restarts: int = 3) -> FitResult:
    x, y = _xy(x, y)
    if len(x) < 5:
        raise InsufficientData("need at least 5 samples")
    order = np.argsort(x)
    x, y = x[order], y[order]
    if np.ptp(y) == 0:
        raise NoConvergence("flat input: no peak to fit")
    base = float(np.median(np.concatenate([y[:2], y[-2:]])))
    k = int(np.argmax(np.abs(y - base)))
    amp = float(y[k] - base)
    fwhm = _half_width_guess(x, y, base, k)
    starts = [[x[k], fwhm * f, amp, base] for f in (1.0, 0.5, 2.0)[: max(restarts, 1)]]
    res = _least_squares(lorentzian, lorentzian_jacobian, ("center", "fwhm", "amplitude", "offset"), x, y, starts)
    p = dict(res.params)
    p["fwhm"] = abs(p["fwhm"])
    out = FitResult(**{**res.__dict__, "params": p})
    if abs(p["amplitude"]) <= 2 * out.stderr["amplitude"] or p["fwhm"] == 0:
        out.extra["flag"] = "amplitude consistent with zero"
    return out


def fit_double_lorentzian(x: ArrayLike, y: ArrayLike, restarts: int = 3) -> FitResult:
    """Two Lorentzians on a common offset; components returned ordered by centre."""
    x, y = _xy(x, y)
    if len(x) < 9:
        raise InsufficientData("need at least 9 samples")
    order = np.argsort(x)
    x, y = x[order], y[order]
    if np.ptp(y) == 0:
        raise NoConvergence("flat input: no peaks to fit")
    base = float(min(y[0], y[-1]))
    resid = y - base
    k1 = int(np.argmax(resid))
    w1 = _half_width_guess(x, y, base, k1)
    # strongest local maximum outside the first peak's half-width
    far = np.abs(x - x[k1]) > w1
    local_max = np.r_[False, (resid[1:-1] >= resid[:-2]) & (resid[1:-1] >= resid[2:]), False]
    cand = np.flatnonzero(far & local_max)
    if cand.size:
        k2 = int(cand[np.argmax(resid[cand])])
        a2, w2 = float(resid[k2]), _half_width_guess(x, y, base, k2)
    else:
        k2 = int(np.argmax(np.where(far, resid, -np.inf))) if far.any() else k1
        a2, w2 = 0.1 * float(resid[k1]), w1
    span = float(np.ptp(x))
    starts = []
    for f in (1.0, 0.5, 2.0)[: max(restarts, 1)]:
        starts.append([x[k1], w1 * f, resid[k1], x[k2], w2 * f, a2, base])
    starts.append([x[k1] - 0.1 * span, w1, 0.5 * resid[k1], x[k1] + 0.1 * span, w1, 0.5 * resid[k1], base])
    names = ("center1", "fwhm1", "amplitude1", "center2", "fwhm2", "amplitude2", "offset")
    res = _least_squares(double_lorentzian, double_lorentzian_jacobian, names, x, y, starts)
    p, se = dict(res.params), dict(res.stderr)
    p["fwhm1"], p["fwhm2"] = abs(p["fwhm1"]), abs(p["fwhm2"])
    if p["center2"] < p["center1"]:
        for a, b in (("center1", "center2"), ("fwhm1", "fwhm2"), ("amplitude1", "amplitude2")):
            p[a], p[b] = p[b], p[a]
            se[a], se[b] = se[b], se[a]
    return FitResult(**{**res.__dict__, "params": p, "stderr": se})


def _hinge_rss(x, y, xb):
    X = np.column_stack([np.ones_like(x), x, np.maximum(0.0, x - xb)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    return float(r @ r), coef


def fit_piecewise_linear(
    x: ArrayLike,
    y: ArrayLike,
    f_ratio: float = 10.0,
    grid_size: int = 400,
) -> FitResult:
    """Continuous two-segment fit; the breakpoint is the extracted threshold.

    The breakpoint is found by exhaustive search over ``grid_size`` candidates
    between the second and second-to-last samples, refined by a bounded
    scalar search. ``NoBreakpoint`` is raised unless
    ((RSS₁ - RSS₂)/2)/(RSS₂/(n-4)) ≥ ``f_ratio``.
    """
    x, y = _xy(x, y)
    n = len(x)
    if n < 6:
        raise InsufficientData("need at least 6 samples")
    order = np.argsort(x)
    x, y = x[order], y[order]
    if np.unique(x).size < 4:
        raise DegenerateFit("need at least four distinct x values")

    line = fit_line(x, y)
    rss1 = line.rss
    lo, hi = x[1], x[-2]
    grid = np.linspace(lo, hi, grid_size)
    rss_grid = np.array([_hinge_rss(x, y, b)[0] for b in grid])
    i = int(np.argmin(rss_grid))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid_size - 1)]
    opt = minimize_scalar(lambda xb: _hinge_rss(x, y, xb)[0], bounds=(a, b), method="bounded", options={"xatol": 1e-12 * max(1.0, abs(hi - lo))})
    xb = float(opt.x) if opt.fun <= rss_grid[i] else float(grid[i])
    rss2, coef = _hinge_rss(x, y, xb)

    scale = max(float(np.sum((y - y.mean()) ** 2)), 1e-300)
    gain = rss1 - rss2
    if gain <= 1e-12 * scale:
        raise NoBreakpoint("two-segment model does not improve on a single line")
    F = math.inf if rss2 <= 1e-24 * scale else (gain / 2) / (rss2 / (n - 4))
    if F < f_ratio:
        raise NoBreakpoint(f"F-ratio {F:.3g} below {f_ratio}")

    intercept, slope1, bend = map(float, coef)
    params = {"breakpoint": xb, "slope1": slope1, "slope2": slope1 + bend, "intercept": intercept}
    jac = _hinge_jacobian(x, *params.values())
    cov, degenerate = _covariance(jac, rss2, n)
    se = np.sqrt(np.diag(cov)) if not degenerate else np.full(4, np.inf)
    return FitResult(
        params=params,
        stderr=dict(zip(params, map(float, se))),
        rss=rss2,
        converged=True,
        iterations=grid_size + int(opt.nfev),
        n_points=n,
        degenerate=degenerate,
        extra={"f_ratio": F, "rss_line": rss1},
    )
