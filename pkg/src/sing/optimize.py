"""Maximum-likelihood fitting of triangular maps and their Fisher information."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from ._parallel import pmap
from .numerics import cholesky
from .transport import (
    DEFAULT_EPS,
    DEFAULT_QUAD_ORDER,
    LOG_2PI,
    ComponentEngine,
    MapComponent,
    SparsityPattern,
    TriangularMap,
    build_map,
    make_component,
)

__all__ = [
    "UnderdeterminedWarning",
    "ComponentFit",
    "FitResult",
    "bfgs",
    "fit_component",
    "fit_map",
    "fit_affine_closed_form",
    "fisher_blocks",
    "fisher_information",
]

log = logging.getLogger(__name__)

GTOL = 1e-6
MAX_ITER = 500
FISHER_RIDGE = 1e-8


class UnderdeterminedWarning(UserWarning):
    pass


@dataclass
class ComponentFit:
    component: MapComponent
    objective: float
    iterations: int
    converged: bool
    grad_norm: float
    engine: ComponentEngine | None = field(default=None, repr=False)


@dataclass
class FitResult:
    map: TriangularMap
    objective: float
    iterations: list[int]
    converged: list[bool]
    engines: list[ComponentEngine] | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "objective": self.objective,
            "iterations": list(self.iterations),
            "converged": list(self.converged),
        }


@dataclass
class _BfgsResult:
    x: np.ndarray
    f: float
    grad_norm: float
    iterations: int
    converged: bool
    history: list[float]


def bfgs(fun_grad, x0, hess0=None, gtol: float = GTOL, max_iter: int = MAX_ITER) -> _BfgsResult:
    """BFGS with Armijo backtracking.

    ``fun_grad(x)`` returns ``(f, g)``.  When ``hess0`` is given and positive
    definite its inverse seeds the inverse-Hessian approximation, otherwise
    the identity is used.  The objective never increases between iterates.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun_grad(x)
    p = len(x)
    eye = np.eye(p)
    H = eye
    if hess0 is not None:
        try:
            low = sla.cholesky(0.5 * (hess0 + hess0.T), lower=True)
            H = sla.cho_solve((low, True), eye)
        except np.linalg.LinAlgError:
            H = eye
    history = [f]
    it = 0
    gnorm = float(np.linalg.norm(g))
    while gnorm >= gtol and it < max_iter:
        it += 1
        step_dir = -H @ g
        slope = float(g @ step_dir)
        if not slope < 0.0:
            H = eye
            step_dir = -g
            slope = -float(g @ g)
        t = 1.0
        for _ in range(60):
            x_new = x + t * step_dir
            f_new, g_new = fun_grad(x_new)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            rho = 1.0 / sy
            Hy = H @ y
            H = H + ((sy + y @ Hy) * rho * rho) * np.outer(s, s) - rho * (np.outer(Hy, s) + np.outer(s, Hy))
        x, f, g = x_new, f_new, g_new
        gnorm = float(np.linalg.norm(g))
        history.append(f)
    return _BfgsResult(x, f, gnorm, it, gnorm < gtol, history)


def fit_component(comp: MapComponent, data, quadrature_order: int = DEFAULT_QUAD_ORDER,
                  eps: float = DEFAULT_EPS, gtol: float = GTOL, max_iter: int = MAX_ITER) -> ComponentFit:
    """Maximize the average log-likelihood of one component.

    ``comp`` supplies the bases and the starting coefficients.  The reported
    objective is the component's average negative log-likelihood including
    its ``log(2 pi)/2`` share.
    """
    Z = np.atleast_2d(np.asarray(data, dtype=float))
    n = Z.shape[0]
    if n < comp.n_coeffs:
        warnings.warn(
            f"component {comp.index + 1}: {n} samples for {comp.n_coeffs} coefficients",
            UnderdeterminedWarning,
            stacklevel=2,
        )
    engine = ComponentEngine(comp, Z, quadrature_order, eps)

    def fun_grad(theta):
        engine.set_coeffs(theta)
        return engine.objective(), engine.gradient()

    res = bfgs(fun_grad, comp.coeffs, engine.hessian(), gtol=gtol, max_iter=max_iter)
    if not res.converged:
        log.warning("component %d stopped after %d iterations (|grad| = %.2e)",
                    comp.index + 1, res.iterations, res.grad_norm)
    engine.set_coeffs(res.x)
    fitted = comp.with_coeffs(res.x)
    engine.comp = fitted
    return ComponentFit(fitted, res.f + 0.5 * LOG_2PI, res.iterations, res.converged, res.grad_norm, engine)


def fit_map(data, pattern: SparsityPattern | None = None, degree: int = 1,
            quadrature_order: int = DEFAULT_QUAD_ORDER, eps: float = DEFAULT_EPS,
            gtol: float = GTOL, max_iter: int = MAX_ITER, keep_engines: bool = False) -> FitResult:
    """Fit every component of a degree-``degree`` map respecting ``pattern``.

    Components are independent problems on the same data and are fitted in
    parallel; results are merged by component index.
    """
    Z = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = Z.shape
    if n < 2 or d < 1:
        raise ValueError("need at least 2 samples")
    start = build_map(d, degree, pattern, quadrature_order, eps)
    fits = pmap(lambda c: fit_component(c, Z, quadrature_order, eps, gtol, max_iter), start.components)
    tmap = TriangularMap([f.component for f in fits], start.sparsity, quadrature_order, eps)
    return FitResult(
        tmap,
        float(sum(f.objective for f in fits)),
        [f.iterations for f in fits],
        [f.converged for f in fits],
        [f.engine for f in fits] if keep_engines else None,
    )


def fit_affine_closed_form(data, quadrature_order: int = DEFAULT_QUAD_ORDER,
                           eps: float = DEFAULT_EPS) -> FitResult:
    """Degree-1 maximum-likelihood map in closed form.

    The pullback is ``N(m, Sigma)`` with the empirical mean and the 1/n
    empirical covariance, realized as ``z -> L (z - m)`` where ``L`` is the
    inverse of the Cholesky factor of ``Sigma`` (so ``L^T L = Sigma^-1``).
    """
    Z = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = Z.shape
    if n < d:
        raise ValueError("closed-form affine fit needs n >= d")
    mean = Z.mean(axis=0)
    cov = (Z - mean).T @ (Z - mean) / n
    low = cholesky(cov)
    L = sla.solve_triangular(low, np.eye(d), lower=True)
    comps = []
    for k in range(d):
        comp = make_component(k, range(k), 1)
        c = np.zeros(len(comp.c_basis))
        # c basis for degree 1 is (1, z_0, ..., z_{k-1}) in that order
        c[0] = -L[k, : k + 1] @ mean[: k + 1]
        c[1:] = L[k, :k]
        hk = np.sqrt(max(L[k, k] - eps, 0.0))
        comps.append(comp.with_coeffs(np.concatenate([c, [hk]])))
    tmap = TriangularMap(comps, SparsityPattern(), quadrature_order, eps)
    engines = pmap(lambda cm: ComponentEngine(cm, Z, quadrature_order, eps), comps)
    objective = float(sum(e.objective() for e in engines)) + 0.5 * d * LOG_2PI
    return FitResult(tmap, objective, [0] * d, [True] * d, engines)


def fisher_blocks(tmap: TriangularMap, data=None, engines=None, ridge: bool = True) -> list[np.ndarray]:
    """Per-component blocks of the empirical Fisher information.

    The full matrix is block diagonal because the log-likelihood separates
    across components.  With ``ridge`` each block gets ``1e-8 * trace / p``
    added to its diagonal, using the trace and size of the full matrix.
    """
    if engines is None:
        Z = np.atleast_2d(np.asarray(data, dtype=float))
        engines = pmap(lambda c: ComponentEngine(c, Z, tmap.quadrature_order, tmap.eps), tmap.components)
    blocks = pmap(lambda e: e.hessian(), engines)
    if ridge:
        p = sum(b.shape[0] for b in blocks)
        lam = FISHER_RIDGE * sum(float(np.trace(b)) for b in blocks) / p
        blocks = [b + lam * np.eye(b.shape[0]) for b in blocks]
    return blocks


def fisher_information(tmap: TriangularMap, data, ridge: bool = True) -> np.ndarray:
    """Empirical Fisher information of all map coefficients (block diagonal)."""
    return sla.block_diag(*fisher_blocks(tmap, data, ridge=ridge))
