"""Observed units and column-oriented datasets.

A unit carries the response ``y`` (linear-model response or log survival
time), the observed biomarker count ``w`` on a core of area ``a``, any
error-free covariates ``z`` and the censoring indicator ``event``.  The
observed density w/a is the surrogate for the true, unobservable density.

Datasets store columns; simulators may additionally retain the hidden true
density ``x`` per unit, which only truth-using fits are allowed to read.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class ObservedUnit:
    y: float
    w: int
    a: float = 1.0
    z: tuple = ()
    event: int = 1

    def __post_init__(self):
        if self.w != int(self.w) or self.w < 0:
            raise ParameterError(f"count w must be a non-negative integer, got {self.w}")
        if not self.a > 0:
            raise ParameterError(f"area a must be positive, got {self.a}")
        if self.event not in (0, 1):
            raise ParameterError(f"event flag must be 0 or 1, got {self.event}")

    @property
    def surrogate_density(self) -> float:
        return self.w / self.a


def surrogate_density(unit: ObservedUnit) -> float:
    """Observed density w/a, the error-prone stand-in for the true density."""
    return unit.w / unit.a


def _readonly(arr):
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


class Dataset:
    """Column-oriented collection of observed units.

    ``x`` holds the simulator's hidden true densities when available.
    ``density_override`` replaces the surrogate density column; it is how
    pseudo-noise-perturbed copies of a dataset are represented (counts stay
    integers, the working covariate column does not).
    """

    def __init__(self, y, w, a, z=None, event=None, x=None, density_override=None):
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise ParameterError("dataset must contain at least one unit")
        n = y.size

        w = np.asarray(w)
        if w.shape != (n,):
            raise ParameterError("w column must match the number of units")
        if np.any(w < 0) or not np.all(w == np.floor(w)):
            raise ParameterError("counts w must be non-negative integers")

        a = np.asarray(a, dtype=float)
        if a.shape != (n,):
            raise ParameterError("a column must match the number of units")
        if not np.all(a > 0):
            raise ParameterError("areas a must be positive")

        if z is None:
            z = np.empty((n, 0))
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if z.shape[0] != n:
            raise ParameterError("z columns must match the number of units")

        if event is None:
            event = np.ones(n, dtype=int)
        event = np.asarray(event)
        if event.shape != (n,) or not np.all(np.isin(event, (0, 1))):
            raise ParameterError("event flags must be 0 or 1, one per unit")

        if x is not None:
            x = np.asarray(x, dtype=float)
            if x.shape != (n,):
                raise ParameterError("hidden truth x must match the number of units")

        if density_override is not None:
            density_override = np.asarray(density_override, dtype=float)
            if density_override.shape != (n,):
                raise ParameterError("density override must match the number of units")

        self.y = _readonly(y)
        self.w = _readonly(np.asarray(w, dtype=np.int64))
        self.a = _readonly(a)
        self.z = _readonly(z)
        self.event = _readonly(event.astype(np.int8))
        self.x = None if x is None else _readonly(x)
        self.density_override = (
            None if density_override is None else _readonly(density_override)
        )

    @classmethod
    def from_units(cls, units, x=None):
        units = list(units)
        if not units:
            raise ParameterError("dataset must contain at least one unit")
        zdim = len(units[0].z)
        if any(len(u.z) != zdim for u in units):
            raise ParameterError("all units must have the same z dimensionality")
        return cls(
            y=[u.y for u in units],
            w=[u.w for u in units],
            a=[u.a for u in units],
            z=np.array([u.z for u in units], dtype=float).reshape(len(units), zdim),
            event=[u.event for u in units],
            x=x,
        )

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def z_dim(self) -> int:
        return self.z.shape[1]

    @property
    def has_truth(self) -> bool:
        return self.x is not None

    @property
    def densities(self) -> np.ndarray:
        """Working covariate column: the override if set, else w/a."""
        if self.density_override is not None:
            return self.density_override
        return self.w / self.a

    def unit(self, i) -> ObservedUnit:
        return ObservedUnit(
            y=float(self.y[i]),
            w=int(self.w[i]),
            a=float(self.a[i]),
            z=tuple(self.z[i]),
            event=int(self.event[i]),
        )

    def __len__(self):
        return self.n

    def __iter__(self):
        return (self.unit(i) for i in range(self.n))

    def with_densities(self, values) -> "Dataset":
        """Copy of the dataset with the covariate column replaced."""
        return Dataset(
            self.y, self.w, self.a, self.z, self.event, self.x, density_override=values
        )

    def take(self, indices) -> "Dataset":
        """Row subset / resample (used by the bootstrap)."""
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(
            self.y[idx],
            self.w[idx],
            self.a[idx],
            self.z[idx],
            self.event[idx],
            None if self.x is None else self.x[idx],
            None if self.density_override is None else self.density_override[idx],
        )
