"""Gaussian radial-basis system over the normalized phase domain [0, 1].

All models in this package share one basis layout: trajectories of any
duration are indexed by phase z = t / T so that demonstrations line up on a
common support.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError

DEFAULT_N_BASIS = 31


@dataclass(frozen=True)
class BasisSystem:
    """Immutable bank of Gaussian basis functions.

    :param n_basis: number of basis functions
    :param centers: strictly increasing centers in [-0.1, 1.1]
    :param width: common bandwidth (> 0)
    :param normalize: divide basis rows by their sum so they sum to 1
    """
    n_basis: int
    centers: np.ndarray
    width: float
    normalize: bool = True

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64)
        object.__setattr__(self, "centers", centers)
        if self.n_basis < 1 or self.n_basis != centers.shape[0]:
            raise DomainError(
                f"n_basis={self.n_basis} does not match {centers.shape[0]} centers")
        if not np.all(np.isfinite(centers)):
            raise DomainError("basis centers must be finite")
        if np.any(np.diff(centers) <= 0):
            raise DomainError("basis centers must be strictly increasing")
        if centers[0] < -0.1 or centers[-1] > 1.1:
            raise DomainError("basis centers must lie in [-0.1, 1.1]")
        if not (np.isfinite(self.width) and self.width > 0):
            raise DomainError(f"basis width must be positive, got {self.width}")

    @classmethod
    def uniform(cls, n_basis=DEFAULT_N_BASIS, width=None, overlap=1.0,
                normalize=True):
        """Evenly spaced centers on [0, 1] including the endpoints.

        Default bandwidth is the center spacing scaled by ``overlap``;
        a single-basis system is centered at 0.5.
        """
        if n_basis == 1:
            centers = np.array([0.5])
            spacing = 1.0
        else:
            centers = np.linspace(0.0, 1.0, n_basis)
            spacing = 1.0 / (n_basis - 1)
        if width is None:
            width = overlap * spacing
        return cls(n_basis=n_basis, centers=centers, width=float(width),
                   normalize=normalize)


def evaluate(basis: BasisSystem, z: float) -> np.ndarray:
    """Basis values at a single phase; nonnegative, summing to 1 if normalized."""
    if not np.isfinite(z):
        raise DomainError(f"phase value must be finite, got {z}")
    return _kernels.rbf_rows(np.array([z], dtype=np.float64), basis.centers,
                             basis.width, basis.normalize)[0]


def design_matrix(basis: BasisSystem, z_values) -> np.ndarray:
    """Stack basis rows for each phase in ``z_values`` into a (T, N) matrix."""
    z = np.asarray(z_values, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] == 0:
        raise DomainError("z_values must be a nonempty 1-D array")
    if not np.all(np.isfinite(z)):
        raise DomainError("z_values must be finite")
    if z.min() < 0.0 or z.max() > 1.0:
        raise DomainError("z_values must lie in [0, 1]")
    return _kernels.rbf_rows(z, basis.centers, basis.width, basis.normalize)
