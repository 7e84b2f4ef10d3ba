"""Calibrated hierarchical linear-Gaussian tree sampler.

Level 0 holds the N leaves (the output increments), level L = log2(N) a
single root.  Going down, child ``i`` of level l receives

    pass_coeff[l] * parent(i) + mix_coeff[l] * neighbour_parent(i) + noise_std[l] * xi

where the neighbour parent is the block adjacent to the child's side of its
own block (left child -> left neighbour, right child -> right neighbour).
Boundaries are open.  The mixing term plays the role of a disentangler: it
couples leaves on either side of a block boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import rng
from .errors import ConvergenceError, DimensionError, DomainError
from .fbm_cov import CovarianceMatrix, increment_cov_matrix
from .grid import GridSpec
from .series import IncrementSeries

__all__ = [
    "TreeLayerParams",
    "CalibrationReport",
    "n_levels",
    "tree_model_cov",
    "tree_sample",
    "tree_batch",
    "initial_params",
    "calibrate",
    "hurst_fit_from_tree",
    "params_to_json",
    "params_from_json",
]


@dataclass(frozen=True)
class TreeLayerParams:
    level: int
    pass_coeff: float
    mix_coeff: float
    noise_std: float

    def __post_init__(self) -> None:
        vals = (self.pass_coeff, self.mix_coeff, self.noise_std)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError(f"non-finite parameters at level {self.level}")
        if self.noise_std <= 0:
            raise DomainError(f"noise_std must be positive at level {self.level}")


@dataclass
class CalibrationReport:
    target: CovarianceMatrix
    achieved: CovarianceMatrix
    frobenius_rel_error: float
    iterations: int
    converged: bool
    history: list


def n_levels(n_leaves: int) -> int:
    """L with n_leaves = 2**L."""
    if n_leaves < 1 or n_leaves & (n_leaves - 1):
        raise DimensionError(f"n_leaves must be a power of two, got {n_leaves}")
    return n_leaves.bit_length() - 1


def _arrays(params):
    p = np.array([lp.pass_coeff for lp in params])
    m = np.array([lp.mix_coeff for lp in params])
    s = np.array([lp.noise_std for lp in params])
    return p, m, s


def _cov_from_arrays(p, m, s, n_leaves: int) -> np.ndarray:
    levels = n_levels(n_leaves)
    a = np.eye(n_leaves)  # leaves' loading on level-l noise, shape (N, n_l)
    cov = s[0] ** 2 * np.eye(n_leaves)
    for lev in range(1, levels + 1):
        child = a
        nc = child.shape[1]
        # a_new[:, q] = p*(child[:, 2q] + child[:, 2q+1]) + m*(child[:, 2q-1] + child[:, 2q+2])
        a = p[lev - 1] * (child[:, 0::2] + child[:, 1::2])
        if nc > 2:
            a[:, :-1] += m[lev - 1] * child[:, 2::2]
            a[:, 1:] += m[lev - 1] * child[:, 1:-1:2]
        cov += s[lev] ** 2 * (a @ a.T)
    return cov


def tree_model_cov(params, n_leaves: int) -> CovarianceMatrix:
    """Exact leaf covariance: sum over levels of noise_std^2 * (loading)(loading)^T."""
    levels = n_levels(n_leaves)
    if len(params) != levels + 1:
        raise DimensionError(f"need {levels + 1} levels of parameters, got {len(params)}")
    return CovarianceMatrix(_cov_from_arrays(*_arrays(params), n_leaves))


def tree_batch(params, n_leaves: int, seed: int, count: int = 1, ops: dict | None = None) -> np.ndarray:
    """``count`` samples of the leaves; other sizes are padded to a power of two.

    When ``ops`` is a dict its ``"flops"`` entry is incremented by the number
    of multiply-adds performed per sample.
    """
    levels = len(params) - 1
    width = 1 << levels
    if n_leaves > width:
        raise DimensionError(f"{len(params)} levels hold at most {width} leaves")
    p, m, s = _arrays(params)
    flops = 0
    z = s[levels] * rng.stream(seed, rng.TREE, levels).standard_normal((count, 1))
    for lev in range(levels - 1, -1, -1):
        nparent = z.shape[1]
        child = np.repeat(p[lev] * z, 2, axis=1)
        if nparent > 1:
            child[:, 2::2] += m[lev] * z[:, :-1]
            child[:, 1:-1:2] += m[lev] * z[:, 1:]
        child += s[lev] * rng.stream(seed, rng.TREE, lev).standard_normal((count, 2 * nparent))
        flops += 2 * nparent + 2 * (2 * nparent - 2) + 2 * nparent
        z = child
    if ops is not None:
        ops["flops"] = ops.get("flops", 0) + flops
    return z[:, :n_leaves]


def tree_sample(params, n_leaves: int, seed: int, eps: float = 1.0, ops: dict | None = None) -> IncrementSeries:
    x = tree_batch(params, n_leaves, seed, 1, ops)[0]
    return IncrementSeries(x, eps, {"method": "tree", "seed": seed})


def initial_params(grid: GridSpec) -> list[TreeLayerParams]:
    """Starting point for calibration.

    For H > 1/2 the pass coefficient follows the power-law part of the
    light-cone coefficient profile at dyadic levels, 2**(H - 1/2) per level,
    with equal noise at every level scaled to the target variance; otherwise
    all coefficients start flat (pass 1, no mixing).
    """
    levels = n_levels(grid.n_steps)
    var0 = grid.sigma**2 * grid.eps ** (2 * grid.hurst)
    if grid.hurst > 0.5:
        pc = 2.0 ** (grid.hurst - 0.5)
        # leaf variance sum_l s^2 pc^(2l) 2^l (binary fan-in) ~ matched to var0
        weight = sum((pc * pc * 2) ** lev for lev in range(levels + 1))
        s = math.sqrt(var0 / weight)
        return [TreeLayerParams(lev, pc, 0.0, s) for lev in range(levels + 1)]
    s = math.sqrt(var0 / (levels + 1))
    return [TreeLayerParams(lev, 1.0, 0.0, s) for lev in range(levels + 1)]


def calibrate(
    grid: GridSpec, max_iter: int = 500, tol: float = 1e-3, init=None
) -> tuple[list[TreeLayerParams], CalibrationReport]:
    """Fit the tree to the exact fGn covariance by coordinate descent.

    Each sweep visits every free parameter (pass and mix below the root,
    log noise_std everywhere) and runs a golden-section search on the
    relative Frobenius error with the others held fixed.  A move is accepted
    only if it lowers the objective.  Stops once the error is <= tol, after
    ``max_iter`` sweeps, or when a sweep no longer improves the fit.
    """
    levels = n_levels(grid.n_steps)
    target = increment_cov_matrix(grid).entries
    tnorm = float(np.linalg.norm(target))
    params = list(init) if init is not None else initial_params(grid)
    p, m, s = (arr.copy() for arr in _arrays(params))
    logs = np.log(s)

    def objective() -> float:
        c = _cov_from_arrays(p, m, np.exp(logs), grid.n_steps)
        return float(np.linalg.norm(c - target) / tnorm)

    cur = objective()
    history = [cur]
    iterations = 0
    coords = [(arr, lev) for lev in range(levels) for arr in (p, m)]
    coords += [(logs, lev) for lev in range(levels + 1)]
    while cur > tol and iterations < max_iter:
        start = cur
        for arr, lev in coords:
            x0 = arr[lev]

            def f(x, arr=arr, lev=lev):
                arr[lev] = x
                return objective()

            res = minimize_scalar(f, bracket=(x0, x0 + 0.05 + 0.05 * abs(x0)), method="golden",
                                  options={"xtol": 1e-8})
            if res.fun < cur and np.isfinite(res.x):
                arr[lev] = res.x
                new = objective()
                if new > cur + 1e-12:
                    raise ConvergenceError(f"objective rose from {cur} to {new}")
                cur = new
            else:
                arr[lev] = x0
        iterations += 1
        history.append(cur)
        if start - cur < 1e-10:
            break

    if iterations == 0:
        out = params  # untouched; avoids an exp(log(s)) round trip
    else:
        out = [TreeLayerParams(lev, float(p[lev]), float(m[lev]), float(np.exp(logs[lev])))
               for lev in range(levels + 1)]
    achieved = tree_model_cov(out, grid.n_steps)
    report = CalibrationReport(
        target=CovarianceMatrix(target),
        achieved=achieved,
        frobenius_rel_error=cur,
        iterations=iterations,
        converged=cur <= tol,
        history=history,
    )
    return out, report


def hurst_fit_from_tree(params, n_leaves: int, n_samples: int, seed: int, eps: float = 1.0,
                        exact: bool = False) -> tuple[float, float]:
    """Growth exponent of E[B_t^2] on the dyadic times in [T/8, T].

    With ``exact=True`` the variances come from partial sums of
    tree_model_cov instead of Monte Carlo (the standard error is then 0).
    """
    from .stats import ols_slope, variance_growth_fit

    times = eps * np.arange(1, n_leaves + 1, dtype=float)
    horizon = times[-1]
    if exact:
        c = tree_model_cov(params, n_leaves).entries
        idx = [k - 1 for k in (n_leaves // 8, n_leaves // 4, n_leaves // 2, n_leaves)]
        var = [c[: i + 1, : i + 1].sum() for i in idx]
        return ols_slope(np.log(times[idx]), np.log(var))[0], 0.0
    paths = np.cumsum(tree_batch(params, n_leaves, seed, n_samples), axis=1)
    return variance_growth_fit(paths, times, horizon / 8, horizon, dyadic=True)


def params_to_json(params, hurst: float, n_leaves: int, frobenius_rel_error: float) -> str:
    doc = {
        "hurst": hurst,
        "n_leaves": n_leaves,
        "levels": [asdict(lp) for lp in params],
        "frobenius_rel_error": frobenius_rel_error,
    }
    return json.dumps(doc, indent=2)


def params_from_json(text: str):
    """Inverse of :func:`params_to_json`: (params, hurst, n_leaves, frobenius_rel_error)."""
    doc = json.loads(text)
    params = [TreeLayerParams(**lv) for lv in doc["levels"]]
    return params, doc["hurst"], doc["n_leaves"], doc["frobenius_rel_error"]
