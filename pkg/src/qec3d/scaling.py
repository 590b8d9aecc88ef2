"""Failure-rate estimation and finite-size-scaling threshold fits.

Curves p_fail(p, L) near the threshold are fitted to the quadratic scaling
ansatz::

    p_fail = a0 + a1 * x + a2 * x**2,    x = (p - p_th) * L**(1/nu)

by weighted least squares over (a0, a1, a2, p_th, nu), weights 1/stderr^2.
The nonlinear minimization is a damped least-squares iteration
(scipy.optimize.least_squares) multi-started over a grid of p_th quantiles
and nu values; for each start the quadratic coefficients are seeded by an
exact linear solve.  Parameter uncertainties come from the local quadratic
approximation of the objective at the optimum (absolute-sigma convention).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

__all__ = [
    "failure_rate",
    "FitResult",
    "fit_threshold",
    "scaling_collapse",
    "estimate_crossing",
    "read_curve_csvs",
    "write_fit_json",
    "collapse_csv_text",
]


def failure_rate(k: int, n: int) -> tuple[float, float]:
    """Binomial estimate k/n with a guarded standard error.

    The stderr uses g = clip(k, 1, n-1)/n in place of k/n, which avoids
    zero-width error bars at k = 0 and k = n while matching the plain
    binomial formula elsewhere.
    """
    if n < 1:
        raise ValueError("need at least one trial")
    if not 0 <= k <= n:
        raise ValueError(f"failure count {k} outside [0, {n}]")
    g = min(max(k, 1), max(n - 1, 1)) / n
    return k / n, math.sqrt(g * (1.0 - g) / n)


@dataclass(frozen=True)
class FitResult:
    p_th: float
    nu: float
    a0: float
    a1: float
    a2: float
    p_th_err: float
    nu_err: float
    a0_err: float
    a1_err: float
    a2_err: float
    rss: float
    converged: bool
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def _as_columns(data):
    """Accept CellResult-like records or an (N, 4) array of L, p, pfail, err."""
    if isinstance(data, np.ndarray):
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise ValueError("expected columns L, p, pfail, err")
        L, p, y, e = arr.T
    else:
        L = np.array([r.L for r in data], dtype=float)
        p = np.array([r.p for r in data], dtype=float)
        y = np.array([r.pfail for r in data], dtype=float)
        e = np.array([r.stderr for r in data], dtype=float)
    if (e <= 0).any():
        raise ValueError("all points need a positive stderr")
    order = np.lexsort((p, L))  # canonical order: fit independent of row order
    return L[order], p[order], y[order], e[order]


def _model(theta, L, p):
    a0, a1, a2, p_th, nu = theta
    x = (p - p_th) * L ** (1.0 / nu)
    return a0 + a1 * x + a2 * x * x


def _solve_quadratic(L, p, y, w, p_th, nu):
    x = (p - p_th) * L ** (1.0 / nu)
    V = np.stack([np.ones_like(x), x, x * x], axis=1) * w[:, None]
    coeffs, *_ = np.linalg.lstsq(V, y * w, rcond=None)
    return coeffs


def fit_threshold(data, p_window: tuple[float, float] | None = None,
                  nu_starts=(0.7, 1.0, 1.5)) -> FitResult:
    """Fit the scaling ansatz to sweep data spanning at least 3 lattice sizes.

    `data` is a list of records with attributes L, p, pfail, stderr (e.g.
    CellResult) or an (N, 4) array with those columns.  `p_window` restricts
    the fit to a p-range around the visual crossing.
    """
    L, p, y, e = _as_columns(data)
    if p_window is not None:
        lo, hi = p_window
        keep = (p >= lo) & (p <= hi)
        L, p, y, e = L[keep], p[keep], y[keep], e[keep]
    if len(np.unique(L)) < 3:
        raise ValueError("need data for at least 3 lattice sizes")
    if p.size < 8:
        raise ValueError("need at least 8 data points")
    w = 1.0 / e

    def residuals(theta):
        return (_model(theta, L, p) - y) * w

    p_lo, p_hi = p.min(), p.max()
    span = max(p_hi - p_lo, 1e-12)
    starts = []
    for frac in (0.1, 0.3, 0.5, 0.7, 0.9):
        for nu0 in nu_starts:
            starts.append((p_lo + frac * span, nu0))
    best = None
    bounds = (
        [-np.inf, -np.inf, -np.inf, 1e-12, 0.05],
        [np.inf, np.inf, np.inf, p_hi, 20.0],
    )
    for p_th0, nu0 in starts:
        a = _solve_quadratic(L, p, y, w, p_th0, nu0)
        theta0 = np.array([a[0], a[1], a[2], p_th0, nu0])
        theta0[3] = min(max(theta0[3], bounds[0][3]), bounds[1][3])
        try:
            res = least_squares(residuals, theta0, bounds=bounds, method="trf",
                                xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
        except Exception:
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        raise RuntimeError("all fit starts failed")

    rss = float(2.0 * best.cost)
    # covariance from the Jacobian at the optimum; stderr already in weights
    try:
        _, s, VT = np.linalg.svd(best.jac, full_matrices=False)
        good = s > s[0] * np.finfo(float).eps * max(best.jac.shape)
        cov = (VT[good].T / s[good] ** 2) @ VT[good]
        perr = np.sqrt(np.diag(cov))
        cov_ok = np.isfinite(perr).all()
    except np.linalg.LinAlgError:
        perr = np.full(5, np.nan)
        cov_ok = False
    a0, a1, a2, p_th, nu = best.x
    converged = bool(best.status > 0 and cov_ok and 0.0 < p_th < p_hi and nu > 0.0)
    return FitResult(
        p_th=float(p_th), nu=float(nu), a0=float(a0), a1=float(a1), a2=float(a2),
        p_th_err=float(perr[3]), nu_err=float(perr[4]), a0_err=float(perr[0]),
        a1_err=float(perr[1]), a2_err=float(perr[2]), rss=rss,
        converged=converged, n_points=int(p.size),
    )


def scaling_collapse(data, fit: FitResult) -> np.ndarray:
    """Rescaled abscissa table (x, pfail, L) for collapse plots."""
    if not fit.converged:
        raise ValueError("scaling_collapse needs a converged fit")
    L, p, y, _ = _as_columns(data)
    x = (p - fit.p_th) * L ** (1.0 / fit.nu)
    return np.stack([x, y, L], axis=1)


def estimate_crossing(p: np.ndarray, y_small: np.ndarray, y_large: np.ndarray):
    """Crossing point of two p_fail curves sampled on a common grid.

    Scans d = y_small - y_large for sign changes from + to - (the smaller
    lattice is worse above threshold, better below) and linearly
    interpolates; the median is returned when several changes occur.
    Returns None when the curves do not cross.
    """
    p = np.asarray(p, dtype=float)
    d = np.asarray(y_small, dtype=float) - np.asarray(y_large, dtype=float)
    crossings = []
    for i in range(len(p) - 1):
        if d[i] > 0 >= d[i + 1]:
            t = d[i] / (d[i] - d[i + 1])
            crossings.append(p[i] + t * (p[i + 1] - p[i]))
    if not crossings:
        return None
    return float(np.median(crossings))


def read_curve_csvs(paths) -> np.ndarray:
    """Load per-L curve CSVs (p,pfail,err) into (N, 4) columns L, p, pfail, err.

    The lattice size is parsed from each file name, e.g. ``L12.csv``.
    """
    rows = []
    for path in paths:
        path = Path(path)
        m = re.search(r"L(\d+)", path.name)
        if not m:
            raise ValueError(f"cannot parse lattice size from file name {path.name!r}")
        L = int(m.group(1))
        body = path.read_text().strip().split("\n")
        if body[0] != "p,pfail,err":
            raise ValueError(f"{path}: expected header 'p,pfail,err'")
        for line in body[1:]:
            p, y, e = (float(tok) for tok in line.split(","))
            rows.append((L, p, y, e))
    if not rows:
        raise ValueError("no data rows found")
    return np.array(rows, dtype=float)


def write_fit_json(fit: FitResult, path) -> None:
    Path(path).write_text(json.dumps(fit.to_dict(), indent=2, sort_keys=True) + "\n")


def collapse_csv_text(table: np.ndarray) -> str:
    lines = ["x,pfail,L"]
    for x, y, L in table:
        lines.append(f"{x!r},{y!r},{int(L)}")
    return "\n".join(lines) + "\n"
