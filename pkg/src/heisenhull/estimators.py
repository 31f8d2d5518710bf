"""Estimator-style wrappers around the envelope and hull pipelines."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .direct import ScanParams
from .grid import BoxDomain, eval_field
from .hj import HamiltonianParams, SolveParams
from .hull import envelope, hull_compute
from .validation import (check_field, check_int, check_option, check_points, check_real,
                         check_region)


class _SolverParamsMixin:
    def _solver_kwargs(self):
        check_option(self.method, "method", ("direct", "pde"))
        scan = ScanParams(n_theta=check_int(self.n_theta, "n_theta", 4),
                          n_s=check_int(self.n_s, "n_s", 2))
        hparams = HamiltonianParams(
            n_theta=max(check_int(self.n_theta, "n_theta", 4), 8),
            n_rho=check_int(self.n_rho, "n_rho", 2),
            eps_strict=None if self.eps_strict is None else check_real(self.eps_strict, "eps_strict", 0.0),
            stencil=check_option(self.stencil, "stencil", ("upwind", "central")))
        sp = SolveParams(omega_relax=check_real(self.omega_relax, "omega_relax", 0.0, 1.0, True),
                         tol_inner=check_real(self.tol_inner, "tol_inner", 0.0, low_open=True),
                         max_inner=check_int(self.max_inner, "max_inner", 1),
                         tol_outer=check_real(self.tol, "tol", 0.0, low_open=True),
                         max_outer=check_int(self.max_iter, "max_iter", 1))
        return dict(scan=scan, max_iter=check_int(self.max_iter, "max_iter", 1),
                    tol_fix=check_real(self.tol, "tol", 0.0, low_open=True),
                    hparams=hparams, sp=sp)


class HQuasiconvexEnvelope(_SolverParamsMixin, TransformerMixin, BaseEstimator):
    """Quasiconvex envelope of a grid field.

    ``fit`` computes the envelope of the given field; ``transform`` returns it
    (recomputing for a different field).

    Parameters
    ----------
    method : {"direct", "pde"}
        Iterated convexification or the nonlocal Hamilton-Jacobi scheme.
    n_theta, n_s : int
        Line directions and samples used by the direct route (``n_theta`` is
        also the number of plane directions of the PDE route, at least 8).
    max_iter, tol : int, float
        Outer iteration cap and fixed-point tolerance for either route.
    n_rho, eps_strict, stencil, omega_relax, tol_inner, max_inner
        PDE route controls.
    """

    def __init__(self, method="direct", n_theta=32, n_s=32, max_iter=50, tol=1e-6,
                 n_rho=24, eps_strict=None, stencil="upwind", omega_relax=0.8,
                 tol_inner=1e-6, max_inner=200):
        self.method = method
        self.n_theta = n_theta
        self.n_s = n_s
        self.max_iter = max_iter
        self.tol = tol
        self.n_rho = n_rho
        self.eps_strict = eps_strict
        self.stencil = stencil
        self.omega_relax = omega_relax
        self.tol_inner = tol_inner
        self.max_inner = max_inner

    def _compute(self, X):
        kw = self._solver_kwargs()
        return envelope(X, self.method, **kw)

    def fit(self, X, y=None):
        X = check_field(X)
        env, rep = self._compute(X)
        self.envelope_ = env
        self.report_ = rep
        self.n_iter_ = rep.iterations
        self.converged_ = rep.converged
        self._fit_input = X
        return self

    def transform(self, X):
        check_is_fitted(self, "envelope_")
        X = check_field(X)
        if X is self._fit_input:
            return self.envelope_
        return self._compute(X)[0]


class HConvexHull(_SolverParamsMixin, BaseEstimator):
    """H-convex hull of a region on a grid.

    ``fit`` takes a :class:`~heisenhull.regions.RegionSpec`; ``predict``
    answers hull membership for arbitrary points by interpolating the
    envelope, and ``decision_function`` returns the envelope values.
    """

    def __init__(self, domain=None, dims=(41, 41, 41), K=1.0, method="direct",
                 sigma=None, n_theta=32, n_s=32, max_iter=50, tol=1e-6, n_rho=24,
                 eps_strict=None, stencil="upwind", omega_relax=0.8, tol_inner=1e-6,
                 max_inner=200):
        self.domain = domain
        self.dims = dims
        self.K = K
        self.method = method
        self.sigma = sigma
        self.n_theta = n_theta
        self.n_s = n_s
        self.max_iter = max_iter
        self.tol = tol
        self.n_rho = n_rho
        self.eps_strict = eps_strict
        self.stencil = stencil
        self.omega_relax = omega_relax
        self.tol_inner = tol_inner
        self.max_inner = max_inner

    def fit(self, X, y=None):
        region = check_region(X)
        if not isinstance(self.domain, BoxDomain):
            raise TypeError("domain must be a BoxDomain")
        dims = tuple(check_int(int(d) if isinstance(d, np.integer) else d, "dims", 2)
                     for d in self.dims)
        if len(dims) != 3:
            raise ValueError("dims needs three entries")
        K = check_real(self.K, "K", 0.0, low_open=True)
        res = hull_compute(region, self.domain, K, dims, self.method, self.sigma,
                           **self._solver_kwargs())
        self.result_ = res
        self.envelope_ = res.envelope
        self.open_ = region.open
        return self

    def decision_function(self, X):
        check_is_fitted(self, "result_")
        return np.atleast_1d(eval_field(self.envelope_, check_points(X)))

    def predict(self, X):
        v = self.decision_function(X)
        return v < 0 if self.open_ else v <= 0
