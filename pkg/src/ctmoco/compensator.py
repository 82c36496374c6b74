"""Autofocus motion compensation as a scikit-learn style estimator.

`MotionCompensator.fit` takes a measured sinogram, starts from the ideal
circular trajectory (all-zero spline), and iteratively adjusts the 6 * N_n
spline node values so that the reconstruction scores better under a
reference-free quality metric. Gradients come from central finite
differences over the node parameters; the sinogram is weighted and
ramp-filtered once and only the backprojection is repeated per evaluation.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from sklearn.base import BaseEstimator

from .geometry import ScanGeometry, Trajectory, circular_trajectory, perturb_trajectory
from .motion import SplineMotionModel, spline_to_curve
from .projector import backproject, filter_sinogram
from .quality import evaluate_quality
from .validation import check_condition
from .volume import Sinogram, Volume

__all__ = ["MotionCompensator", "finite_difference_gradient"]


def finite_difference_gradient(
    fun: Callable[[np.ndarray], float], theta: np.ndarray, steps: np.ndarray
) -> np.ndarray:
    """Central-difference gradient of `fun` at `theta` with per-parameter steps.

    Costs 2 * len(theta) function evaluations.
    """
    theta = np.asarray(theta, dtype=float)
    steps = np.broadcast_to(np.asarray(steps, dtype=float), theta.shape)
    grad = np.empty_like(theta)
    for j in range(theta.size):
        probe = theta.copy()
        probe[j] = theta[j] + steps[j]
        f_plus = fun(probe)
        probe[j] = theta[j] - steps[j]
        f_minus = fun(probe)
        grad[j] = (f_plus - f_minus) / (2.0 * steps[j])
    return grad


class _Budget(Exception):
    """Raised internally when the evaluation budget is exhausted."""


class MotionCompensator(BaseEstimator):
    """Estimates rigid per-projection motion from a sinogram by autofocus.

    Parameters
    ----------
    n_nodes : int
        Number of Akima spline nodes per rigid parameter.
    metric : str
        Quality metric kind: "histogram_entropy" (default), "total_variation",
        or "gradient_l1"; lower score is better. Entropy is the most robust
        guide: gradient-based scores also drop under plain blur, which can
        reward over-smoothed reconstructions.
    max_evaluations : int
        Hard cap on the number of reconstruction + scoring evaluations
        across all stages. 0 returns the initial (zero-motion) state.
    stages : tuple of (int, float)
        Coarse-to-fine schedule of (grid size, voxel spacing mm) for the
        intermediate reconstructions.
    stage_budget_weights : tuple of float or None
        Relative share of `max_evaluations` per stage; must match the number
        of stages. None picks a 3:1 geometric split favoring the earlier
        stages, whose reconstructions are much cheaper.
    method : str
        "gradient" for finite-difference gradient descent with per-parameter
        step adaptation, "coordinate" for derivative-free per-coordinate
        line search.
    fd_step_mm, fd_step_deg : float
        Central-difference probe steps per parameter class.
    init_step_mm, init_step_deg : float
        Initial descent step sizes per parameter class; steps grow 1.2x on
        improvement and halve otherwise.
    bound_mm, bound_deg : float
        Symmetric box bound on node values.
    tol : float
        Stop a stage when the best score improves by less than this
        relative amount over a full iteration.

    Attributes (after fit)
    ----------------------
    model_ : SplineMotionModel
        Estimated motion model (best visited state).
    curve_ : ndarray, shape (6, N_p)
        Dense motion curve of `model_`.
    trajectory_ : Trajectory
        Circular trajectory perturbed by the estimate.
    volume_ : Volume
        Reconstruction with the estimated trajectory on the finest stage grid.
    score_trace_ : list of (int, float)
        (evaluation index, score) for every objective evaluation.
    n_evaluations_ : int
        Total objective evaluations spent.
    initial_score_, final_score_ : float
        Scores of the zero-motion and best state on the finest stage.
    """

    def __init__(
        self,
        n_nodes: int = 10,
        metric: str = "histogram_entropy",
        max_evaluations: int = 2000,
        stages: tuple = ((32, 4.0), (64, 2.0)),
        stage_budget_weights: tuple | None = None,
        method: str = "gradient",
        fd_step_mm: float = 0.25,
        fd_step_deg: float = 0.25,
        init_step_mm: float = 1.0,
        init_step_deg: float = 1.0,
        bound_mm: float = 15.0,
        bound_deg: float = 15.0,
        tol: float = 1e-4,
    ):
        self.n_nodes = n_nodes
        self.metric = metric
        self.max_evaluations = max_evaluations
        self.stages = stages
        self.stage_budget_weights = stage_budget_weights
        self.method = method
        self.fd_step_mm = fd_step_mm
        self.fd_step_deg = fd_step_deg
        self.init_step_mm = init_step_mm
        self.init_step_deg = init_step_deg
        self.bound_mm = bound_mm
        self.bound_deg = bound_deg
        self.tol = tol

    # -- helpers ------------------------------------------------------------

    def _per_class(self, mm_value: float, deg_value: float) -> np.ndarray:
        half = 3 * self.n_nodes
        return np.concatenate(
            [np.full(half, mm_value), np.full(half, deg_value)]
        )

    def _theta_to_model(self, theta: np.ndarray, n_proj: int) -> SplineMotionModel:
        return SplineMotionModel(n_proj, theta.reshape(6, self.n_nodes))

    # -- fitting ------------------------------------------------------------

    def fit(self, sinogram: Sinogram, geometry: ScanGeometry, y=None):
        """Estimate the motion model that best explains `sinogram`."""
        check_condition(self.max_evaluations >= 0, "max_evaluations must be >= 0")
        check_condition(len(self.stages) >= 1, "need at least one stage")
        check_condition(
            2 <= self.n_nodes <= geometry.n_projections,
            "n_nodes must lie in [2, n_projections]",
        )
        if self.method not in ("gradient", "coordinate"):
            raise ValueError(f"unknown method {self.method!r}")

        circular = circular_trajectory(geometry)
        filtered = filter_sinogram(sinogram, geometry)

        self.score_trace_ = []
        self._n_evals = 0
        theta = np.zeros(6 * self.n_nodes)
        bounds = self._per_class(self.bound_mm, self.bound_deg)

        if self.stage_budget_weights is None:
            weights = 3.0 ** np.arange(len(self.stages) - 1, -1, -1)
        else:
            weights = np.asarray(self.stage_budget_weights, dtype=float)
            check_condition(
                weights.shape == (len(self.stages),),
                "stage_budget_weights must have one entry per stage",
            )
        check_condition(np.all(weights > 0), "stage budget weights must be positive")
        for stage_idx, (grid, spacing) in enumerate(self.stages):
            objective = self._make_objective(
                filtered, circular, geometry, int(grid), float(spacing)
            )
            remaining = self.max_evaluations - self._n_evals
            share = weights[stage_idx] / weights[stage_idx:].sum()
            stage_budget = int(round(remaining * share))
            theta, _ = self._optimize(objective, theta, bounds, stage_budget)

        self.n_evaluations_ = self._n_evals
        grid, spacing = int(self.stages[-1][0]), float(self.stages[-1][1])
        zero_vol = backproject(filtered, circular, geometry, grid, spacing)
        self.initial_score_ = evaluate_quality(zero_vol, self.metric)

        model = self._theta_to_model(theta, geometry.n_projections)
        traj = perturb_trajectory(circular, spline_to_curve(model))
        vol = backproject(filtered, traj, geometry, grid, spacing)
        score = evaluate_quality(vol, self.metric)
        if score > self.initial_score_:
            # never return a worse-than-initial state
            model = SplineMotionModel.zeros(self.n_nodes, geometry.n_projections)
            traj, vol, score = circular, zero_vol, self.initial_score_
        self.model_ = model
        self.curve_ = spline_to_curve(model)
        self.trajectory_ = traj
        self.volume_ = vol
        self.final_score_ = score
        return self

    def _make_objective(self, filtered, circular, geometry, grid, spacing):
        def objective(theta: np.ndarray) -> float:
            if self._n_evals >= self.max_evaluations:
                raise _Budget
            model = self._theta_to_model(theta, geometry.n_projections)
            traj = perturb_trajectory(circular, spline_to_curve(model))
            vol = backproject(filtered, traj, geometry, grid, spacing)
            score = evaluate_quality(vol, self.metric)
            self.score_trace_.append((self._n_evals, score))
            self._n_evals += 1
            return score

        return objective

    def _optimize(self, objective, theta, bounds, budget):
        """Run one stage; returns (best theta, best score)."""
        start_evals = self._n_evals
        best_theta = theta.copy()
        try:
            best_score = objective(theta)
        except _Budget:
            return best_theta, np.inf

        def spent():
            return self._n_evals - start_evals

        fd_steps = self._per_class(self.fd_step_mm, self.fd_step_deg)
        steps = self._per_class(self.init_step_mm, self.init_step_deg)
        min_step = 1e-3

        try:
            if self.method == "coordinate":
                improved = True
                while improved and spent() < budget:
                    improved = False
                    for j in range(theta.size):
                        for sign in (1.0, -1.0):
                            cand = best_theta.copy()
                            cand[j] = np.clip(
                                cand[j] + sign * steps[j], -bounds[j], bounds[j]
                            )
                            score = objective(cand)
                            if score < best_score:
                                best_score, best_theta = score, cand
                                steps[j] = min(steps[j] * 1.2, bounds[j])
                                improved = True
                                break
                        else:
                            steps[j] *= 0.5
                    if np.all(steps < min_step):
                        break
            else:
                prev_sign = np.zeros_like(theta)
                while spent() < budget:
                    reference = best_score
                    grad = finite_difference_gradient(
                        objective, best_theta, fd_steps
                    )
                    sign = np.sign(grad)
                    same = sign * prev_sign
                    steps[same > 0] = np.minimum(steps[same > 0] * 1.2, bounds[same > 0])
                    steps[same < 0] *= 0.5
                    prev_sign = sign
                    # backtracking on the proposed descent direction
                    while spent() < budget:
                        cand = np.clip(
                            best_theta - steps * sign, -bounds, bounds
                        )
                        score = objective(cand)
                        if score < best_score:
                            best_score, best_theta = score, cand
                            break
                        steps *= 0.5
                        if np.all(steps < min_step):
                            break
                    if np.all(steps < min_step):
                        break
                    if reference - best_score < self.tol * abs(reference):
                        break
        except _Budget:
            pass
        return best_theta, best_score
