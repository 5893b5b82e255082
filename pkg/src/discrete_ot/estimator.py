"""scikit-learn style wrapper: fit a discrete transport map between two 1-D samples."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .partitions import discretize, uniform_interval_partition
from .projections import barycentric_projection, gm_projection
from .solver import plan_cost, solve_entropic, solve_exact
from .spaces import Interval, Measure1D, get_cost

__all__ = ["DiscreteTransport", "empirical_measure"]


def empirical_measure(samples, space: Interval | None = None) -> Measure1D:
    """Uniform atoms on the sample points (repeated points are merged)."""
    x = np.asarray(samples, dtype=float).ravel()
    if space is None:
        lo, hi = float(x.min()), float(x.max())
        space = Interval(lo, hi if hi > lo else lo + 1.0)
    pts, counts = np.unique(x, return_counts=True)
    w = counts / counts.sum()
    w[-1] = 1.0 - w[:-1].sum()
    return Measure1D(space, tuple(zip(pts, w)))


class DiscreteTransport(TransformerMixin, BaseEstimator):
    """Transport map from the ``X`` sample to the ``y`` sample.

    Both samples are discretized on ``n_cells`` uniform cells of their
    range, the finite transport problem is solved and the plan is projected
    to a map (barycentric ``"B"`` or generalized median ``"GM"``).
    ``transform`` evaluates that map, which is constant on each source cell.

    Attributes after ``fit``: ``plan_``, ``cost_``, ``gap_``, ``map_``.
    """

    def __init__(self, n_cells: int = 32, cost: str = "quadratic", projection: str = "B",
                 solver: str = "exact", eps_target: float = 1e-3, anchors: str = "center"):
        self.n_cells = n_cells
        self.cost = cost
        self.projection = projection
        self.solver = solver
        self.eps_target = eps_target
        self.anchors = anchors

    def _validate(self):
        if self.projection not in ("B", "GM"):
            raise ValueError("projection must be 'B' or 'GM'")
        if self.solver not in ("exact", "entropic"):
            raise ValueError("solver must be 'exact' or 'entropic'")
        if int(self.n_cells) < 1:
            raise ValueError("n_cells must be positive")

    def fit(self, X, y):
        self._validate()
        X = check_array(X, ensure_2d=False)
        Y = check_array(np.asarray(y), ensure_2d=False)
        if X.ndim == 2 and X.shape[1] != 1 or Y.ndim == 2 and Y.shape[1] != 1:
            raise ValueError("only one-dimensional samples are supported")
        mu, nu = empirical_measure(X), empirical_measure(Y)
        k = int(self.n_cells)
        mu_h = discretize(mu, uniform_interval_partition(mu.space, k, self.anchors))
        nu_h = discretize(nu, uniform_interval_partition(nu.space, k, self.anchors))
        c = get_cost(self.cost)
        if self.solver == "exact":
            plan, cert = solve_exact(mu_h, nu_h, c)
        else:
            plan, cert = solve_entropic(mu_h, nu_h, c, float(self.eps_target))
        self.plan_ = plan
        self.cost_ = plan_cost(plan, c)
        self.gap_ = cert.gap
        self.map_ = barycentric_projection(plan) if self.projection == "B" else gm_projection(plan)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "map_")
        X = check_array(X, ensure_2d=False)
        x = np.asarray(X, dtype=float).ravel()
        space = self.plan_.source.space
        # points outside the fitted range are sent to the nearest end cell
        x = np.clip(x, space.lo, space.hi)
        return np.asarray(self.map_(x), dtype=float).reshape(-1, 1)
