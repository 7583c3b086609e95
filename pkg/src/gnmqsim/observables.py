"""Read-out stage: energies, low modes, spectral density, displacement stats.

The density of states is reconstructed with the kernel polynomial method:
Chebyshev moments mu_k = Tr(T_k(X))/N of the rescaled matrix X = H/alpha,
computed either exactly (matrix three-term recurrence) or stochastically
(Hutchinson estimator over counter-generated Rademacher probes), then
resummed with Jackson damping. alpha comes from a power-iteration bound so
the rescaled spectrum stays inside [-1, 1], which also pins |mu_k| <= 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .network import NetworkModel
from .stateprep import EncodedState, rademacher

ZERO_MODE_RTOL = 1e-8
MODE_RESIDUAL_RTOL = 1e-9
_BOUND_SEED = 0x5BEC


def kinetic_potential(state, energy: float | None = None,
                      n_dof: int | None = None) -> dict:
    """Split the encoded energy: E*|velocity block|^2 and E*|i B^T y block|^2.

    Accepts an EncodedState, or a raw vector together with energy and the
    block split index.
    """
    if isinstance(state, EncodedState):
        psi, energy, n_dof = state.psi, state.energy, state.n_dof
    else:
        if energy is None or n_dof is None:
            raise ValueError("raw vectors need energy and n_dof")
        psi = np.asarray(state, dtype=complex)
    kinetic = energy * float(np.linalg.norm(psi[:n_dof]) ** 2)
    potential = energy * float(np.linalg.norm(psi[n_dof:]) ** 2)
    return {"kinetic": kinetic, "potential": potential}


def energy_from_displacement(model: NetworkModel, u, v) -> float:
    """Total mechanical energy (ydot.ydot + y.A.y)/2 in mass-weighted form."""
    y = np.sqrt(model.masses) * np.asarray(u, dtype=float)
    ydot = np.sqrt(model.masses) * np.asarray(v, dtype=float)
    return float(0.5 * (ydot @ ydot + y @ (model.A @ y)))


@dataclass(frozen=True)
class ModeSet:
    """Smallest nonzero eigenpairs of the mass-weighted stiffness."""

    eigenvalues: np.ndarray
    modes: np.ndarray  # columns are unit eigenvectors
    n_zero_modes: int
    matrix_norm: float

    def overlap(self, vec) -> float:
        """|cosine| of vec (mass-weighted coordinates) with the lowest mode."""
        vec = np.asarray(vec, dtype=float)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise ValueError("cannot take the overlap of a zero vector")
        return float(abs(self.modes[:, 0] @ vec) / norm)


def low_modes(model: NetworkModel, k: int) -> ModeSet:
    """k smallest nonzero eigenpairs of A, zero modes excluded by threshold."""
    if not 0 < k < model.n_dof:
        raise ValueError("need 0 < k < n_dof")
    lam, vecs = np.linalg.eigh(model.A)
    a_norm = float(lam[-1]) if lam[-1] > 0 else 0.0
    nonzero = lam > ZERO_MODE_RTOL * max(a_norm, 1e-300)
    n_zero = int(np.sum(~nonzero))
    idx = np.flatnonzero(nonzero)[:k]
    if len(idx) < k:
        raise ValueError(f"only {len(idx)} nonzero modes available")
    eigenvalues, modes = lam[idx], vecs[:, idx]
    residual = np.linalg.norm(model.A @ modes - modes * eigenvalues, axis=0)
    if np.any(residual > MODE_RESIDUAL_RTOL * max(a_norm, 1e-300)):
        raise NumericalError("eigenpair residual above tolerance")
    return ModeSet(eigenvalues=eigenvalues, modes=modes, n_zero_modes=n_zero,
                   matrix_norm=a_norm)


def spectral_bound(matrix: np.ndarray, iters: int = 1000,
                   rtol: float = 1e-7) -> float:
    """1.01 times a power-iteration estimate of the spectral norm.

    Iterates with matrix^2 so +/- eigenvalue pairs of equal magnitude (the
    embedding's spectrum) cannot stall the iteration; ||matrix @ v||
    converges to the norm from below, and the 1 percent headroom keeps the
    returned bound above it once stabilized to rtol.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    v = rademacher(_BOUND_SEED, 0, n) / math.sqrt(n)
    est = 0.0
    for _ in range(iters):
        w = matrix @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        w = matrix @ w
        v = w / np.linalg.norm(w)
        last, est = est, norm
        if abs(est - last) <= rtol * max(est, 1e-300):
            break
    return 1.01 * est


@dataclass(frozen=True)
class MomentSet:
    """Chebyshev moments of a rescaled symmetric matrix."""

    alpha: float
    moments: np.ndarray
    method: str  # "exact" or "stochastic"
    stderr: np.ndarray | None = None
    probes: int = 0

    def __post_init__(self):
        if abs(self.moments[0] - 1.0) > 1e-9:
            raise NumericalError("mu_0 must equal 1")
        if np.max(np.abs(self.moments)) > 1.0 + 1e-9:
            raise NumericalError("moments escaped [-1, 1]: alpha too small")

    @property
    def order(self) -> int:
        return len(self.moments) - 1


def chebyshev_moments_exact(matrix: np.ndarray, alpha: float,
                            order: int) -> MomentSet:
    """mu_k = Tr(T_k(matrix/alpha))/N by the matrix three-term recurrence."""
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    x = matrix / alpha
    moments = np.empty(order + 1)
    t_prev = np.eye(n)
    t_cur = x.copy()
    moments[0] = 1.0
    if order >= 1:
        moments[1] = np.trace(t_cur) / n
    for k in range(2, order + 1):
        t_prev, t_cur = t_cur, 2.0 * (x @ t_cur) - t_prev
        moments[k] = np.trace(t_cur) / n
    return MomentSet(alpha=float(alpha), moments=moments, method="exact")


def chebyshev_moments_stochastic(matrix: np.ndarray, alpha: float, order: int,
                                 probes: int, seed: int) -> MomentSet:
    """Hutchinson moment estimates over Rademacher probes, with stderr.

    Probe p draws its entries from the counter window [p*N, (p+1)*N), so
    estimates are reproducible and independent of probe batching.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if probes < 1:
        raise ValueError("need at least one probe")
    x = matrix / alpha
    # probe p's entries come from counters [p*n, (p+1)*n): one batched draw
    z = rademacher(seed, 0, probes * n).reshape(probes, n).T
    est = np.empty((order + 1, probes))
    t_prev = z
    t_cur = x @ z
    est[0] = np.einsum("ip,ip->p", z, t_prev) / n  # exactly 1 per probe
    if order >= 1:
        est[1] = np.einsum("ip,ip->p", z, t_cur) / n
    for k in range(2, order + 1):
        t_prev, t_cur = t_cur, 2.0 * (x @ t_cur) - t_prev
        est[k] = np.einsum("ip,ip->p", z, t_cur) / n
    moments = est.mean(axis=1)
    if probes > 1:
        stderr = est.std(axis=1, ddof=1) / math.sqrt(probes)
    else:
        stderr = np.zeros(order + 1)
    return MomentSet(alpha=float(alpha), moments=moments, method="stochastic",
                     stderr=stderr, probes=probes)


def jackson_coefficients(order: int) -> np.ndarray:
    """Jackson damping factors g_0..g_K (g_0 = 1, positive kernel)."""
    kk = np.arange(order + 1)
    big = order + 1
    return ((big - kk) * np.cos(np.pi * kk / big)
            + np.sin(np.pi * kk / big) / np.tan(np.pi / big)) / big


def dirichlet_coefficients(order: int) -> np.ndarray:
    """Undamped (truncation-only) factors: all ones."""
    return np.ones(order + 1)


@dataclass(frozen=True)
class DosCurve:
    """KPM spectral density on a physical-axis grid."""

    grid: np.ndarray
    values: np.ndarray
    kernel: str
    alpha: float

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.grid))


def reconstruct_dos(moments: MomentSet, grid: np.ndarray | None = None,
                    kernel: str = "jackson",
                    n_points: int = 2001) -> DosCurve:
    """Resummed density on the physical axis (1/alpha Jacobian included).

    The default grid is uniform on (-alpha, alpha) with the endpoints
    pulled in, avoiding the 1/sqrt(1 - x^2) edge poles.
    """
    if kernel == "jackson":
        g = jackson_coefficients(moments.order)
    elif kernel == "dirichlet":
        g = dirichlet_coefficients(moments.order)
    else:
        raise ValueError("kernel must be 'jackson' or 'dirichlet'")
    alpha = moments.alpha
    if grid is None:
        grid = np.linspace(-alpha, alpha, n_points + 2)[1:-1]
    else:
        grid = np.asarray(grid, dtype=float)
        if np.any(np.abs(grid) >= alpha):
            raise ValueError("grid must lie strictly inside (-alpha, alpha)")
    x = grid / alpha
    coeffs = 2.0 * g * moments.moments
    coeffs[0] *= 0.5
    series = np.polynomial.chebyshev.chebval(x, coeffs)
    values = series / (np.pi * np.sqrt(1.0 - x * x)) / alpha
    if kernel == "jackson":
        values = np.clip(values, 0.0, None)  # floor float dust, kernel is PSD
    return DosCurve(grid=grid, values=values, kernel=kernel, alpha=alpha)


def dos_bin_masses(moments: MomentSet, edges: np.ndarray,
                   kernel: str = "jackson") -> np.ndarray:
    """Exact integrals of the resummed density over consecutive edges.

    Under x = cos(theta) each series term integrates in closed form
    (T_k picks up sin(k theta)/k), so the masses are exact for the
    truncated series at any order: no quadrature grid to undersample the
    kernel peaks. Edges must be ascending and within [-alpha, alpha].
    """
    edges = np.asarray(edges, dtype=float)
    if np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly ascending")
    if np.any(np.abs(edges) > moments.alpha):
        raise ValueError("edges must lie within [-alpha, alpha]")
    if kernel == "jackson":
        g = jackson_coefficients(moments.order)
    elif kernel == "dirichlet":
        g = dirichlet_coefficients(moments.order)
    else:
        raise ValueError("kernel must be 'jackson' or 'dirichlet'")
    c = 2.0 * g * moments.moments
    c[0] *= 0.5
    theta = np.arccos(np.clip(edges / moments.alpha, -1.0, 1.0))
    k = np.arange(1, moments.order + 1)
    anti = -(c[0] * theta + np.sin(np.outer(theta, k)) @ (c[1:] / k)) / np.pi
    return np.diff(anti)


def dos_histogram_l1(eigenvalues: np.ndarray, moments: MomentSet,
                     bins: int = 40) -> dict:
    """L1 distance between the KPM density and an eigenvalue histogram.

    The histogram's outermost edges coincide with the extreme eigenvalues,
    whose kernel peaks straddle them; the comparison therefore partitions
    the whole spectral domain by the 39 interior edges, extending the two
    end bins to +-alpha so no mass is truncated. Bin masses come from the
    closed-form integrals; both binned densities are normalized before the
    distance is taken, so it is scale-free in [0, 2].
    """
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    counts, edges = np.histogram(eigenvalues, bins=bins)
    widths = np.diff(edges)
    hist_density = counts / counts.sum() / widths
    part = np.concatenate([[-moments.alpha], edges[1:-1], [moments.alpha]])
    masses = dos_bin_masses(moments, part)
    kpm_density = masses / masses.sum() / widths
    l1 = float(np.sum(np.abs(hist_density - kpm_density) * widths))
    return {"l1": l1, "edges": edges, "hist_density": hist_density,
            "kpm_density": kpm_density}


def displacement_stats(model: NetworkModel, kT: float) -> dict:
    """Equilibrium correlations kT*pinv(K) and per-site RMSD.

    The pseudo-inverse excludes zero modes (rigid motions carry no
    restoring force and have no equilibrium variance); masses do not enter
    equilibrium statistics.
    """
    if kT < 0:
        raise ValueError("kT must be nonnegative")
    correlation = kT * np.linalg.pinv(model.K, hermitian=True,
                                      rcond=ZERO_MODE_RTOL)
    per_dof = np.sqrt(np.clip(np.diag(correlation), 0.0, None))
    if model.kind == "anm":
        rmsd = np.sqrt(np.clip(np.diag(correlation), 0.0, None)
                       .reshape(-1, 3).sum(axis=1))
    else:
        rmsd = per_dof
    return {"correlation": correlation, "rmsd": rmsd, "rmsd_per_dof": per_dof}
