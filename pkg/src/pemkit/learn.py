"""End-to-end model fitting: match, count, estimate, smooth, assemble."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .car import CarFit, CarSpec, FieldObservation, fit_car
from .dataset import PerceptionDataset
from .geometry import GridSpec
from .matching import DEFAULT_GATE_M
from .model import PemModel
from .stats import FIELD_NAMES, FieldEstimates, PartitionStats, accumulate_stats, estimate_mle

_FIELD_KINDS = {
    "a01": "binomial",
    "a11": "binomial",
    "mu_r": "mean",
    "mu_theta": "mean",
    "sigma_r": "log_scale",
    "sigma_theta": "log_scale",
    "rho": "fisher_z",
}


class EmptyDatasetError(ValueError):
    """Every condition is empty: there is nothing to fit."""


@dataclass(slots=True)
class LearnDiagnostics:
    fits: dict[str, CarFit]
    transition_counts: np.ndarray
    sample_counts: np.ndarray

    def to_dict(self) -> dict:
        return {
            "fields": {
                name: {
                    "converged": fit.converged,
                    "grad_norm": fit.grad_norm,
                    "iterations": fit.iterations,
                    "kappa": fit.kappa,
                }
                for name, fit in self.fits.items()
            },
            "per_condition": {
                "transitions": self.transition_counts.tolist(),
                "samples": self.sample_counts.tolist(),
            },
        }


def field_observation(estimates: FieldEstimates, name: str) -> FieldObservation:
    """Package one field of the raw estimates for the smoother."""
    f = estimates.field_index(name)
    return FieldObservation(
        kind=_FIELD_KINDS[name],
        values=estimates.values[f],
        weights=estimates.weights[f],
        empty=estimates.empty[f],
        scale=estimates.scales.get(name, 1.0),
    )


def fit_fields(estimates: FieldEstimates, spec: CarSpec) -> tuple[dict[str, np.ndarray], dict[str, CarFit]]:
    """Smooth each of the seven fields independently."""
    values: dict[str, np.ndarray] = {}
    fits: dict[str, CarFit] = {}
    for name in FIELD_NAMES:
        fit = fit_car(field_observation(estimates, name), spec, field_name=name)
        values[name] = fit.values
        fits[name] = fit
    return values, fits


def learn_pem(
    dataset: PerceptionDataset,
    grid: GridSpec | None = None,
    car_spec: CarSpec | None = None,
    gate_m: float = DEFAULT_GATE_M,
    metadata: str = "learned",
) -> tuple[PemModel, LearnDiagnostics]:
    """Build a model from a paired ground-truth / detection dataset.

    Raises EmptyDatasetError when the dataset contributes no transitions and
    no error samples at all; propagates CarConvergenceError from the smoother.
    """
    grid = grid or GridSpec()
    stats = accumulate_stats(dataset, grid, gate_m)
    return learn_from_stats(stats, car_spec, metadata)


def learn_from_stats(
    stats: PartitionStats,
    car_spec: CarSpec | None = None,
    metadata: str = "learned",
) -> tuple[PemModel, LearnDiagnostics]:
    if stats.total_transitions == 0 and stats.total_samples == 0:
        raise EmptyDatasetError("no observations")
    spec = car_spec or CarSpec.for_grid(stats.grid)
    estimates = estimate_mle(stats)
    values, fits = fit_fields(estimates, spec)
    model = PemModel(grid=stats.grid, metadata=metadata, **values)
    diagnostics = LearnDiagnostics(
        fits=fits,
        transition_counts=stats.transitions.reshape(stats.grid.n_conditions, 4).sum(axis=1),
        sample_counts=stats.sample_counts(),
    )
    return model, diagnostics
