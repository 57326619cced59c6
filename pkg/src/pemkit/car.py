"""Spatial smoothing of per-condition estimates with a conditional autoregressive prior.

The latent field y (one value per condition, on a transformed scale chosen per
field) gets the proper CAR prior with joint precision

    Q = kappa * (D - alpha * B)

where B is the 0/1 adjacency between conditions, D = diag(row sums of B), and
alpha in (0, 1) is the spatial dependence. The implied full conditionals are

    y_c | y_rest ~ Normal(alpha * mean of y over c's neighbors, 1 / (kappa * d_c))

i.e. row-normalized neighbor weights with a per-partition conditional
precision kappa * d_c; kappa carries a Gamma(1, 1) prior and is profiled out
in closed form. Fields with bounded domains are fitted on transformed scales
(log-odds for probabilities, log for deviations, Fisher-z for correlations)
so smoothed values respect the model invariants by construction.

The posterior mode over (y, kappa) is found by damped Newton iterations with
the exact Hessian; the data terms are convex on the fitting scales, so each
inner step is a descent step on a strictly convex objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import expit

from .geometry import GridSpec, N_OCCLUSION_LEVELS

GRAD_TOL = 1e-6
MAX_ITERATIONS = 10_000

# Degenerate observations (zero-variance data) would demand more precision
# than float64 gradients can express; cap so convergence stays checkable.
_PRECISION_CAP = 1e9


class CarConvergenceError(RuntimeError):
    def __init__(self, field: str, grad_norm: float, iterations: int):
        super().__init__(
            f"CAR fit for {field} did not converge: |grad| = {grad_norm:.3e} after {iterations} iterations"
        )
        self.grad_norm = grad_norm
        self.iterations = iterations


def build_adjacency(grid: GridSpec) -> np.ndarray:
    """0/1 adjacency over conditions: same occlusion level, edge-sharing grid cells.

    Two cells share an edge when they sit in the same ring and adjacent
    sectors (wrapping across the +/-pi seam), or in the same sector and
    adjacent rings. Occlusion levels are never linked, so each level forms
    its own connected component.
    """
    n = grid.n_conditions
    nr, ns = grid.n_rings, grid.n_sectors
    b = np.zeros((n, n), dtype=np.int8)

    def idx(occ: int, ring: int, sector: int) -> int:
        return occ * (nr * ns) + ring * ns + sector

    for occ in range(N_OCCLUSION_LEVELS):
        for ring in range(nr):
            for sector in range(ns):
                c = idx(occ, ring, sector)
                if ns > 2:
                    b[c, idx(occ, ring, (sector + 1) % ns)] = 1
                    b[c, idx(occ, ring, (sector - 1) % ns)] = 1
                elif ns == 2:
                    b[c, idx(occ, ring, 1 - sector)] = 1
                if ring + 1 < nr:
                    b[c, idx(occ, ring + 1, sector)] = 1
                if ring > 0:
                    b[c, idx(occ, ring - 1, sector)] = 1
    return b


@dataclass(slots=True)
class CarSpec:
    """Prior configuration: spatial dependence, adjacency, Gamma(shape, rate) on the precision."""

    adjacency: np.ndarray
    alpha: float = 0.95
    gamma_shape: float = 1.0
    gamma_rate: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")
        b = np.asarray(self.adjacency)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError("adjacency must be square")
        if np.any(np.diag(b) != 0):
            raise ValueError("adjacency must have a zero diagonal")
        if not np.array_equal(b, b.T):
            raise ValueError("adjacency must be symmetric")
        self.adjacency = b.astype(float)

    @classmethod
    def for_grid(cls, grid: GridSpec, alpha: float = 0.95) -> "CarSpec":
        return cls(adjacency=build_adjacency(grid), alpha=alpha)


FieldKind = Literal["binomial", "mean", "log_scale", "fisher_z"]


@dataclass(slots=True)
class FieldObservation:
    """One field's per-condition data: natural-scale values, weights, empty mask.

    kind selects the likelihood and fitting scale:
      binomial  -- values are success ratios, weights trial counts; log-odds scale
      mean      -- values are sample means, weights sample counts, ``scale`` the
                   per-sample deviation; identity scale
      log_scale -- values are sample deviations (> 0), weights sample counts;
                   log scale with Var(log s_hat) ~ 1/(2n)
      fisher_z  -- values are correlations in (-1, 1), weights sample counts;
                   atanh scale with Var(z_hat) ~ 1/(n-3)
    """

    kind: FieldKind
    values: np.ndarray
    weights: np.ndarray
    empty: np.ndarray
    scale: float = 1.0


@dataclass(slots=True)
class CarFit:
    values: np.ndarray
    grad_norm: float
    iterations: int
    kappa: float
    converged: bool


def _to_fitting_scale(obs: FieldObservation) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (observed z, successes, trials) for binomial, or (z, precision, _) otherwise."""
    active = ~obs.empty
    v = np.asarray(obs.values, dtype=float)
    w = np.asarray(obs.weights, dtype=float)
    z = np.zeros_like(v)
    if obs.kind == "binomial":
        succ = np.where(active, v * w, 0.0)
        trials = np.where(active, w, 0.0)
        return z, succ, trials
    if obs.kind == "mean":
        z_obs = np.where(active, v, 0.0)
        prec = np.where(active, w / (obs.scale * obs.scale), 0.0)
    elif obs.kind == "log_scale":
        z_obs = np.where(active, np.log(np.maximum(v, 1e-300)), 0.0)
        prec = np.where(active, 2.0 * w, 0.0)
    elif obs.kind == "fisher_z":
        z_obs = np.where(active, np.arctanh(np.clip(v, -0.999999, 0.999999)), 0.0)
        prec = np.where(active, np.maximum(w - 3.0, 1.0), 0.0)
    else:
        raise ValueError(f"unknown field kind {obs.kind!r}")
    prec = np.minimum(prec, _PRECISION_CAP)
    return z_obs, prec, np.array([])


def _from_fitting_scale(kind: FieldKind, z: np.ndarray) -> np.ndarray:
    if kind == "binomial":
        return expit(z)
    if kind == "mean":
        return z.copy()
    if kind == "log_scale":
        return np.exp(z)
    return np.tanh(z)


def fit_car(obs: FieldObservation, spec: CarSpec, field_name: str = "field") -> CarFit:
    """MAP estimate of one smoothed field.

    Conditions with no data take the prior's conditional mean (alpha times the
    neighbor average); conditions with heavy data stay at their own estimate.
    Raises CarConvergenceError if the gradient norm fails to drop below
    GRAD_TOL within MAX_ITERATIONS.
    """
    b = spec.adjacency
    n = b.shape[0]
    deg = b.sum(axis=1)
    q0 = np.diag(deg) - spec.alpha * b  # prior precision up to kappa; PD when alpha < 1
    n_eff = int((deg > 0).sum())
    active = ~np.asarray(obs.empty, dtype=bool)

    binomial = obs.kind == "binomial"
    if binomial:
        _, succ, trials = _to_fitting_scale(obs)
        z_obs = prec = None
    else:
        z_obs, prec, _ = _to_fitting_scale(obs)
        succ = trials = None

    def data_terms(y: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        if binomial:
            nll = float(np.sum(trials * np.logaddexp(0.0, y) - succ * y))
            p = expit(y)
            grad = trials * p - succ
            hess = trials * p * (1.0 - p)
        else:
            resid = y - z_obs
            nll = 0.5 * float(np.sum(prec * resid * resid))
            grad = prec * resid
            hess = prec
        return nll, grad, hess

    def kappa_star(y: np.ndarray) -> float:
        s = float(y @ q0 @ y)
        num = 0.5 * n_eff + spec.gamma_shape - 1.0
        return max(num, 1e-12) / (0.5 * s + spec.gamma_rate)

    def objective(y: np.ndarray, kappa: float) -> float:
        return 0.5 * kappa * float(y @ q0 @ y) + data_terms(y)[0]

    # Warm start at the observed values (zero where empty).
    if binomial:
        ratio = np.where(trials > 0, succ / np.maximum(trials, 1.0), 0.5)
        y = np.where(active, np.log(np.clip(ratio, 1e-6, 1 - 1e-6) / (1 - np.clip(ratio, 1e-6, 1 - 1e-6))), 0.0)
    else:
        y = np.where(active, z_obs, 0.0)

    iterations = 0
    grad_norm = np.inf
    kappa = kappa_star(y)
    while iterations < MAX_ITERATIONS:
        kappa = kappa_star(y)
        nll, g_data, h_data = data_terms(y)
        grad = kappa * (q0 @ y) + g_data
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < GRAD_TOL:
            return CarFit(
                values=_from_fitting_scale(obs.kind, y),
                grad_norm=grad_norm,
                iterations=iterations,
                kappa=kappa,
                converged=True,
            )
        hess = kappa * q0 + np.diag(h_data)
        # Isolated conditions with no data have an all-zero row; pin them.
        lonely = (deg == 0) & ~active
        if lonely.any():
            hess[lonely, lonely] += 1.0
        step = np.linalg.solve(hess, grad)
        f0 = 0.5 * kappa * float(y @ q0 @ y) + nll
        slope = float(grad @ step)
        if slope <= 1e-11 * max(1.0, abs(f0)):
            # Predicted decrease is below the float resolution of the
            # objective; the full Newton step is safe on a convex problem.
            scale = 1.0
        else:
            scale = 1.0
            for _ in range(60):
                if objective(y - scale * step, kappa) <= f0 - 1e-4 * scale * slope:
                    break
                scale *= 0.5
        y = y - scale * step
        iterations += 1

    raise CarConvergenceError(field_name, grad_norm, iterations)
