"""scikit-learn style wrappers around the diagonalizers and the level-statistics fit."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .ensemble import LlaFit, lla_fit
from .kam import KamConfig, diagonalize_kam
from .kam.linalg import max_offdiag
from .model import PAPER_EPS_EXPONENT, ChainGeometry
from .kam.schedule import PAPER_GROWTH
from .observables import eigenstate_expectation_all, liom
from .oracle import diagonalize
from .validation import check_gaps, check_hamiltonian, check_operator

__all__ = ["KamDiagonalizer", "ExactDiagonalizer", "LlaEstimator"]


class _RotationMixin(TransformerMixin):
    """Shared ``transform`` / ``predict`` once ``U_`` is known."""

    def transform(self, X):
        """Rotate an operator into the eigenbasis: ``U^T X U``."""
        check_is_fitted(self, "U_")
        X = check_operator(X, self.U_.shape[0])
        if X.ndim == 1:
            return (self.U_.T * X) @ self.U_
        return self.U_.T @ X @ self.U_

    def inverse_transform(self, X):
        check_is_fitted(self, "U_")
        X = check_operator(X, self.U_.shape[0])
        if X.ndim == 1:
            X = np.diag(X)
        return self.U_ @ X @ self.U_.T

    def predict(self, X):
        """Eigenstate expectation values of operator ``X``, one per column of ``U_``."""
        check_is_fitted(self, "U_")
        return eigenstate_expectation_all(self.U_, check_operator(X, self.U_.shape[0]))

    def liom(self, site: int):
        check_is_fitted(self, "U_")
        return liom(self.U_, site, self.geometry_)


class KamDiagonalizer(_RotationMixin, BaseEstimator):
    """Multi-scale rotation diagonalizer.

    Parameters
    ----------
    gamma : float or None
        Perturbation strength that sets resonance thresholds and term orders.
        ``None`` uses the largest off-diagonal magnitude of the input.
    eps_exponent : float
        Resonance threshold ``eps = gamma ** eps_exponent``.
    rho : float or None
        Ratio cutoff; ``None`` means ``gamma / eps``.
    left_end : int or None
        Number of sites left of the origin; ``None`` centres the chain.

    Attributes
    ----------
    U_ : ndarray
        Orthogonal matrix whose columns are eigenvectors.
    energies_ : ndarray
        Eigenvalue belonging to each column of ``U_``.
    """

    def __init__(
        self,
        gamma=None,
        eps_exponent=PAPER_EPS_EXPONENT,
        rho=None,
        growth=PAPER_GROWTH,
        tol_offdiag=1e-12,
        k_max=40,
        block_constant=1.0,
        left_end=None,
    ):
        self.gamma = gamma
        self.eps_exponent = eps_exponent
        self.rho = rho
        self.growth = growth
        self.tol_offdiag = tol_offdiag
        self.k_max = k_max
        self.block_constant = block_constant
        self.left_end = left_end

    def _geometry(self, dim):
        n = dim.bit_length() - 1
        if self.left_end is None:
            return ChainGeometry.from_n(n)
        return ChainGeometry(self.left_end, n - 1 - self.left_end)

    def fit(self, X, y=None):
        H = check_hamiltonian(X)
        geometry = self._geometry(H.shape[0])
        gamma = max_offdiag(H) if self.gamma is None else self.gamma
        config = KamConfig(
            gamma=float(gamma),
            eps_exponent=self.eps_exponent,
            rho=self.rho,
            growth=self.growth,
            tol_offdiag=self.tol_offdiag,
            k_max=self.k_max,
            block_constant=self.block_constant,
        )
        result = diagonalize_kam(H, config, geometry)
        self.geometry_ = geometry
        self.gamma_ = float(gamma)
        self.result_ = result
        self.U_ = result.U
        self.energies_ = result.final_diagonal
        self.steps_ = result.steps
        self.blocks_ = result.blocks
        self.fully_resonant_ = result.fully_resonant_flag
        self.converged_ = result.converged
        self.n_features_in_ = H.shape[1]
        return self


class ExactDiagonalizer(_RotationMixin, BaseEstimator):
    """Dense symmetric eigensolver with the same interface as :class:`KamDiagonalizer`."""

    def __init__(self, left_end=None):
        self.left_end = left_end

    def fit(self, X, y=None):
        H = check_hamiltonian(X)
        n = H.shape[0].bit_length() - 1
        self.geometry_ = (
            ChainGeometry.from_n(n) if self.left_end is None else ChainGeometry(self.left_end, n - 1 - self.left_end)
        )
        spectrum = diagonalize(H)
        self.U_ = spectrum.eigenvectors
        self.energies_ = spectrum.eigenvalues
        self.n_features_in_ = H.shape[1]
        return self


class LlaEstimator(BaseEstimator):
    """Fit ``P(min gap < delta) ~ delta**nu * C**n`` to minimum-gap samples.

    ``fit`` takes one minimum gap per realization; ``predict`` evaluates the
    fitted bound on new ``delta`` values.
    """

    def __init__(self, n=1, delta_grid=None, n_grid=25, min_count=10):
        self.n = n
        self.delta_grid = delta_grid
        self.n_grid = n_grid
        self.min_count = min_count

    def fit(self, X, y=None):
        gaps = check_gaps(X)
        fit: LlaFit = lla_fit(gaps, self.n, self.delta_grid, self.n_grid, self.min_count)
        self.fit_ = fit
        self.fitted_ = fit.fitted
        self.nu_ = fit.nu
        self.C_ = fit.C_n
        self.delta_grid_ = fit.delta_grid
        self.P_ = fit.P
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        if not self.fitted_:
            raise ValueError(f"no power law was fitted: {self.fit_.reason}")
        delta = np.asarray(X, dtype=float)
        return np.minimum(1.0, delta**self.nu_ * self.C_**self.n)
