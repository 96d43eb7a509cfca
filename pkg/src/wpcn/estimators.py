"""scikit-learn style estimators wrapping the solvers.

The channel pmf plays the role of the training data: ``fit(pmf)`` solves
the long-term scheduling problem for the configured system and exposes
the learned policy; ``predict`` maps (b1, b2, outcome) state rows to the
seven-entry actions.  Construction arguments follow the sklearn contract
(stored verbatim, validated in fit), so the solvers compose with
``clone``, ``get_params`` and friends.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .approx import ApproxViaResult, SubsetSchedule, approx_value_iteration
from .fairness import find_fair_alpha
from .mdp import evaluate_policy, value_iteration
from .params import GridSpec, SystemParams, default_system
from .slot import long_term_slot_reward, slot_solutions
from .validation import check_alpha, check_grid, check_pmf, check_states, check_system

_ACTION_COLUMNS = ("tau1", "tau2", "tau_ap", "rho1", "rho2", "q1", "q2")


class _FittedMixin:
    def _check_fitted(self, attr: str = "policy_"):
        if not hasattr(self, attr):
            raise NotFittedError(
                f"this {type(self).__name__} instance is not fitted yet; "
                "call fit(pmf) first")


class ValueIterationSolver(BaseEstimator, _FittedMixin):
    """Exact average-reward solver for a fixed scalarization weight.

    Parameters
    ----------
    params : SystemParams, physical constants (a standard set when None)
    grid : GridSpec, discretization (package default when None)
    alpha : weight on device 1 in the per-slot reward
    tol : span tolerance on successive value differences
    max_iter : sweep budget
    anchor : keep the value table anchored at the empty-battery state

    Attributes after fit: ``value_function_`` (battery-lattice table),
    ``policy_``, ``throughput_`` (exact per-device bits/s), ``n_iter_``,
    ``converged_``.
    """

    def __init__(self, params=None, grid=None, alpha=0.5, tol=1e-6,
                 max_iter=300, anchor=True, rounding="floor"):
        self.params = params
        self.grid = grid
        self.alpha = alpha
        self.tol = tol
        self.max_iter = max_iter
        self.anchor = anchor
        self.rounding = rounding

    def _resolved(self):
        params = check_system(self.params) if self.params is not None else default_system()
        grid = check_grid(self.grid) if self.grid is not None else GridSpec()
        return params, grid

    def _solve(self, pmf, params, grid):
        return value_iteration(check_alpha(self.alpha), pmf, params, grid,
                               tol=self.tol, max_iters=self.max_iter,
                               anchor=self.anchor, rounding=self.rounding)

    def fit(self, X, y=None):
        pmf = check_pmf(X)
        params, grid = self._resolved()
        res = self._solve(pmf, params, grid)
        self.result_ = res
        self.value_function_ = res.value_function
        self.policy_ = res.policy
        self.n_iter_ = res.n_iter
        self.converged_ = res.converged
        self.throughput_ = evaluate_policy(res.policy, pmf, params, grid,
                                           model=res.model)
        return self

    def predict(self, X):
        """Actions for (b1, b2, outcome) rows as an (n, 7) array.

        Columns: tau1, tau2, tau_ap, rho1, rho2, q1, q2.
        """
        self._check_fitted()
        pol = self.policy_
        X = check_states(X, pol.n1, pol.n2, pol.n_out)
        rows = pol.state_index(X[:, 0], X[:, 1])
        return np.column_stack([pol.fields[c][rows, X[:, 2]]
                                for c in _ACTION_COLUMNS])

    def score(self, X=None, y=None):
        """Weighted long-term objective in bits/s."""
        self._check_fitted("throughput_")
        return self.throughput_.weighted(check_alpha(self.alpha))


class ApproxValueIterationSolver(ValueIterationSolver):
    """Subset policy improvement plus interpolation (same surface).

    Extra attributes after fit: ``epsilon_observed_`` (audited
    interpolation error) and ``subset_sizes_``.
    """

    def __init__(self, params=None, grid=None, alpha=0.5, tol=1e-6,
                 max_iter=300, anchor=True, rounding="floor",
                 schedule=None, audit_fraction=0.1, audit_seed=0):
        super().__init__(params=params, grid=grid, alpha=alpha, tol=tol,
                         max_iter=max_iter, anchor=anchor, rounding=rounding)
        self.schedule = schedule
        self.audit_fraction = audit_fraction
        self.audit_seed = audit_seed

    def _solve(self, pmf, params, grid) -> ApproxViaResult:
        schedule = self.schedule if self.schedule is not None else SubsetSchedule()
        res = approx_value_iteration(
            check_alpha(self.alpha), pmf, params, grid, schedule=schedule,
            tol=self.tol, max_iters=self.max_iter, anchor=self.anchor,
            audit_fraction=self.audit_fraction, audit_seed=self.audit_seed,
            rounding=self.rounding)
        self.epsilon_observed_ = res.epsilon_observed
        self.subset_sizes_ = res.subset_sizes
        return res


class FairThroughputSolver(BaseEstimator, _FittedMixin):
    """Max-min fair point: bisection over the scalarization weight.

    Attributes after fit: ``alpha_bar_`` (weight on device 2 at the fair
    point, the usual way the balancing weight is quoted), ``alpha1_``
    (weight on device 1), ``policy_``, ``throughput_``, ``trace_``,
    ``mixed_``.
    """

    def __init__(self, params=None, grid=None, epsilon_fair=1e-3,
                 max_bisect=30, tol=1e-6, max_iter=300):
        self.params = params
        self.grid = grid
        self.epsilon_fair = epsilon_fair
        self.max_bisect = max_bisect
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        pmf = check_pmf(X)
        params = check_system(self.params) if self.params is not None else default_system()
        grid = check_grid(self.grid) if self.grid is not None else GridSpec()
        fp = find_fair_alpha(pmf, params, grid, epsilon_fair=self.epsilon_fair,
                             max_bisect=self.max_bisect, tol=self.tol,
                             max_iters=self.max_iter)
        self.fair_point_ = fp
        self.alpha_bar_ = fp.alpha_bar
        self.alpha1_ = fp.alpha1
        self.policy_ = fp.policy
        self.throughput_ = fp.throughput
        self.trace_ = fp.trace
        self.mixed_ = fp.mixed
        return self

    def score(self, X=None, y=None):
        """Fair (min) throughput in bits/s."""
        self._check_fitted("throughput_")
        return self.throughput_.min_bps


class SlotOrientedBaseline(BaseEstimator, _FittedMixin):
    """Per-slot max-min baseline; no energy is carried between slots.

    Attributes after fit: ``gain_bps_`` (long-term average throughput,
    equal for both devices by construction) and ``solutions_`` (one
    per-slot schedule per channel outcome).
    """

    def __init__(self, params=None):
        self.params = params

    def fit(self, X, y=None):
        pmf = check_pmf(X)
        params = check_system(self.params) if self.params is not None else default_system()
        self.solutions_ = slot_solutions(pmf, params)
        self.gain_bps_ = long_term_slot_reward(pmf, params)
        return self

    def score(self, X=None, y=None):
        self._check_fitted("gain_bps_")
        return self.gain_bps_
