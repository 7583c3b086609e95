"""Elastic network models: Kirchhoff/Hessian construction and factorization.

Two flavors are built from a structure and a distance cutoff:

* scalar per-site model ("gnm"): K is the graph Laplacian of the contact
  network, one degree of freedom per site;
* vector per-site model ("anm"): K is the 3N x 3N Hessian assembled from
  rank-one super-elements -spring * (d d^T) / |d|^2 per contact.

Both are turned into the mass-weighted stiffness A = M^{-1/2} K M^{-1/2}
and its incidence-style factor B with B B^T = A, which downstream modules
embed into a Hamiltonian.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse
from scipy.spatial.distance import pdist, squareform

from .errors import NumericalError
from .structure import ProteinStructure

DEFAULT_GNM_CUTOFF = 7.0
DEFAULT_ANM_CUTOFF = 13.0
ZERO_MODE_RTOL = 1e-8


@dataclass(frozen=True)
class NetworkModel:
    """A quadratic network model K together with its mass-weighted factors.

    kind   : "gnm" (scalar site DOF) or "anm" (3 DOF per site)
    K      : (n, n) stiffness matrix
    masses : (n,) mass per degree of freedom
    A      : mass-weighted stiffness M^{-1/2} K M^{-1/2}
    B      : (n, n_edges) factor with B @ B.T == A
    edges  : contact list [(i, j, weight), ...] with i < j (site indices)
    """

    kind: str
    K: np.ndarray = field(repr=False)
    masses: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    edges: list[tuple[int, int, float]] = field(repr=False)
    cutoff: float = 0.0
    spring: float = 1.0

    @property
    def n_dof(self) -> int:
        return self.K.shape[0]

    @property
    def n_edges(self) -> int:
        return self.B.shape[1]


def _contact_edges(structure: ProteinStructure, cutoff: float, spring: float,
                   allow_coincident: bool):
    dists = squareform(pdist(structure.positions))
    n = structure.n_atoms
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if dists[i, j] <= cutoff:
                if dists[i, j] == 0.0:
                    if not allow_coincident:
                        raise NumericalError(
                            f"atoms {i} and {j} coincide; contact direction undefined")
                    warnings.warn(f"atoms {i} and {j} coincide; treated as connected",
                                  stacklevel=3)
                edges.append((i, j, spring))
    return edges, dists


def build_gnm(structure: ProteinStructure, cutoff: float = DEFAULT_GNM_CUTOFF,
              spring: float = 1.0) -> NetworkModel:
    """Scalar contact-network model (graph Laplacian times spring).

    Off-diagonal K[i, j] = -spring for pairs within `cutoff`; diagonal
    entries make each row sum to zero. The Laplacian is assembled over
    integers and scaled once, so row sums vanish exactly for unit springs.
    """
    edges, _ = _contact_edges(structure, cutoff, spring, allow_coincident=True)
    n = structure.n_atoms
    lap = np.zeros((n, n), dtype=np.int64)
    for i, j, _ in edges:
        lap[i, j] -= 1
        lap[j, i] -= 1
        lap[i, i] += 1
        lap[j, j] += 1
    K = spring * lap.astype(float)
    masses = structure.masses.copy()
    A = mass_weight(K, masses)
    B = incidence_factor(edges, masses, n)
    return NetworkModel(kind="gnm", K=K, masses=masses, A=A, B=B,
                        edges=edges, cutoff=cutoff, spring=spring)


def build_anm(structure: ProteinStructure, cutoff: float = DEFAULT_ANM_CUTOFF,
              spring: float = 1.0) -> NetworkModel:
    """Anisotropic model: 3N x 3N Hessian of rank-one contact super-elements.

    Each contact (i, j) contributes -spring * (d d^T)/|d|^2 to the (i, j)
    off-diagonal 3x3 block, d = x_i - x_j; diagonal blocks accumulate the
    negated off-diagonal sums. Coincident atoms are an error here because
    the contact direction is undefined.
    """
    edges, _ = _contact_edges(structure, cutoff, spring, allow_coincident=False)
    n = structure.n_atoms
    K = np.zeros((3 * n, 3 * n))
    for i, j, w in edges:
        d = structure.positions[i] - structure.positions[j]
        block = -w * np.outer(d, d) / (d @ d)
        si, sj = slice(3 * i, 3 * i + 3), slice(3 * j, 3 * j + 3)
        K[si, sj] += block
        K[sj, si] += block
        K[si, si] -= block
        K[sj, sj] -= block
    masses = np.repeat(structure.masses, 3)
    A = mass_weight(K, masses)
    B = incidence_factor(edges, masses, n, positions=structure.positions)
    return NetworkModel(kind="anm", K=K, masses=masses, A=A, B=B,
                        edges=edges, cutoff=cutoff, spring=spring)


def mass_weight(K: np.ndarray, masses: np.ndarray) -> np.ndarray:
    """A = M^{-1/2} K M^{-1/2} for diagonal mass matrix, elementwise form."""
    inv_sqrt = 1.0 / np.sqrt(np.asarray(masses, dtype=float))
    return K * np.outer(inv_sqrt, inv_sqrt)


def incidence_factor(edges, masses, n_sites: int,
                     positions: np.ndarray | None = None) -> np.ndarray:
    """Edge-incidence factor B of the mass-weighted stiffness, B B^T = A.

    Scalar models: column per edge (i, j, w) holding +sqrt(w/m_i) at row i
    and -sqrt(w/m_j) at row j. Vector models (positions given): the same
    two-entry pattern with each entry replaced by the 3-vector
    sqrt(w/m) * unit(x_i - x_j) in the site's coordinate rows.
    """
    masses = np.asarray(masses, dtype=float)
    if positions is None:
        B = np.zeros((n_sites, len(edges)))
        for col, (i, j, w) in enumerate(edges):
            B[i, col] = np.sqrt(w / masses[i])
            B[j, col] = -np.sqrt(w / masses[j])
        return B
    site_mass = masses[::3]
    B = np.zeros((3 * n_sites, len(edges)))
    for col, (i, j, w) in enumerate(edges):
        d = positions[i] - positions[j]
        unit = d / np.linalg.norm(d)
        B[3 * i:3 * i + 3, col] = np.sqrt(w / site_mass[i]) * unit
        B[3 * j:3 * j + 3, col] = -np.sqrt(w / site_mass[j]) * unit
    return B


def condition_diagnostics(model: NetworkModel) -> dict:
    """Spectral diagnostics of A: extreme eigenvalues, zero modes, kappa.

    kappa is the ratio of the largest to the smallest nonzero eigenvalue
    (zero modes excluded at relative threshold 1e-8 of the largest).
    """
    evals = np.linalg.eigvalsh(model.A)
    lam_max = float(evals[-1])
    if lam_max <= 0:
        return {"lambda_max": lam_max, "lambda_min_nonzero": 0.0,
                "kappa": np.inf, "n_zero_modes": model.n_dof}
    nonzero = evals[evals > ZERO_MODE_RTOL * lam_max]
    lam_min = float(nonzero[0]) if nonzero.size else 0.0
    return {
        "lambda_max": lam_max,
        "lambda_min_nonzero": lam_min,
        "kappa": lam_max / lam_min if lam_min > 0 else np.inf,
        "n_zero_modes": int(model.n_dof - nonzero.size),
    }


def model_from_matrices(K: np.ndarray, masses: np.ndarray,
                        kind: str = "custom") -> NetworkModel:
    """Wrap explicit symmetric PSD K and masses as a NetworkModel.

    The factor B is recovered from the eigendecomposition of A (columns
    scaled by sqrt of the nonzero eigenvalues), so B B^T = A still holds.
    Intended for hand-built test systems and control problems.
    """
    K = np.asarray(K, dtype=float)
    masses = np.asarray(masses, dtype=float)
    A = mass_weight(K, masses)
    evals, vecs = np.linalg.eigh(A)
    if evals.size and evals[0] < -1e-10 * max(evals[-1], 1.0):
        raise NumericalError(f"K is not positive semidefinite (min eig {evals[0]:g})")
    keep = evals > ZERO_MODE_RTOL * max(evals[-1], 0.0)
    B = vecs[:, keep] * np.sqrt(evals[keep])
    return NetworkModel(kind=kind, K=K, masses=masses, A=A, B=B,
                        edges=[], cutoff=0.0, spring=1.0)


def export_matrix_market(matrix: np.ndarray, path, comment: str = "") -> None:
    """Write a matrix to Matrix Market format (sparse coordinate layout)."""
    scipy.io.mmwrite(str(path), scipy.sparse.coo_matrix(matrix), comment=comment)


def import_matrix_market(path) -> np.ndarray:
    mat = scipy.io.mmread(str(path))
    return np.asarray(mat.todense() if scipy.sparse.issparse(mat) else mat, dtype=float)
