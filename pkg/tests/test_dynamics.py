import numpy as np
import pytest

from gnmqsim import dynamics as dyn
from gnmqsim.errors import EncodingError, NumericalError
from gnmqsim.network import build_gnm, model_from_matrices
from gnmqsim.stateprep import encode_initial_conditions
from gnmqsim.structure import synthetic_chain


@pytest.fixture(scope="module")
def chain2():
    return build_gnm(synthetic_chain(2))


@pytest.fixture(scope="module")
def emb2(chain2):
    return dyn.embed(chain2)


def test_embedding_spectrum_is_plus_minus_pairs(chain5_gnm):
    emb = dyn.embed(chain5_gnm)
    w = emb.eig[0]
    lam = np.linalg.eigvalsh(chain5_gnm.A)
    nz = lam[lam > 1e-10 * lam[-1]]
    paired = np.sort(np.concatenate([np.sqrt(nz), -np.sqrt(nz),
                                     np.zeros(emb.dim - 2 * len(nz))]))
    assert np.allclose(np.sort(w), paired, atol=1e-10)
    # H^2 is block diagonal with the two mass-weighted stiffness factors
    H2 = emb.H @ emb.H
    n = chain5_gnm.n_dof
    assert np.allclose(H2[:n, :n], chain5_gnm.B @ chain5_gnm.B.T, atol=1e-12)
    assert np.allclose(H2[n:, n:], chain5_gnm.B.T @ chain5_gnm.B, atol=1e-12)
    assert np.allclose(H2[:n, n:], 0, atol=1e-15)


def test_two_atom_mode_oscillates_at_sqrt_two(chain2, emb2):
    u0 = np.array([1.0, -1.0]) / np.sqrt(2)
    st = encode_initial_conditions(chain2, u0, np.zeros(2))
    for t in (0.0, 0.3, 1.7, 9.4):
        psi_t = dyn.evolve_harmonic(emb2, st.psi, t)
        assert abs(np.linalg.norm(psi_t) - 1) < 1e-12
        u, v = dyn.decode_state(chain2, psi_t, st.energy)
        assert np.allclose(u, u0 * np.cos(np.sqrt(2) * t), atol=1e-10)
        assert np.allclose(v, -np.sqrt(2) * u0 * np.sin(np.sqrt(2) * t),
                           atol=1e-10)


def test_batched_times_match_scalar_calls(chain2, emb2):
    st = encode_initial_conditions(chain2, [0.7, -0.7], [0.1, 0.0])
    ts = np.linspace(0, 5, 7)
    batch = dyn.evolve_harmonic(emb2, st.psi, ts)
    assert batch.shape == (7, emb2.dim)
    for i, t in enumerate(ts):
        single = dyn.evolve_harmonic(emb2, st.psi, float(t))
        assert np.allclose(batch[i], single, atol=1e-13)


def test_energy_conserved_to_ten_digits_over_long_window(chain5_gnm):
    emb = dyn.embed(chain5_gnm)
    rng = np.random.default_rng(3)
    st = encode_initial_conditions(chain5_gnm, rng.normal(size=5),
                                   rng.normal(size=5))
    sqm = np.sqrt(chain5_gnm.masses)
    for t in np.linspace(0.0, 100.0, 23):
        u, v = dyn.decode_state(chain5_gnm,
                                dyn.evolve_harmonic(emb, st.psi, float(t)),
                                st.energy)
        y, yd = sqm * u, sqm * v
        E = 0.5 * (yd @ yd + y @ chain5_gnm.A @ y)
        assert abs(E - st.energy) / st.energy <= 1e-10


def test_decode_round_trip_drops_only_rigid_motion(chain5_gnm):
    lam, modes = np.linalg.eigh(chain5_gnm.A)
    null = modes[:, lam <= 1e-10 * lam[-1]]
    sqm = np.sqrt(chain5_gnm.masses)
    rng = np.random.default_rng(5)
    for _ in range(10):
        u0, v0 = rng.normal(size=5), rng.normal(size=5)
        y0 = sqm * u0
        u_proj = (y0 - null @ (null.T @ y0)) / sqm
        st = encode_initial_conditions(chain5_gnm, u_proj, v0)
        u, v = dyn.decode_state(chain5_gnm, st.psi, st.energy)
        assert np.abs(u - u_proj).max() <= 1e-10
        assert np.abs(v - v0).max() <= 1e-10
    # unprojected input decodes to exactly its rigid-free projection
    u_raw, v_raw = rng.normal(size=5), rng.normal(size=5)
    st = encode_initial_conditions(chain5_gnm, u_raw, v_raw)
    u, v = dyn.decode_state(chain5_gnm, st.psi, st.energy)
    y_raw = sqm * u_raw
    assert np.allclose(u, (y_raw - null @ (null.T @ y_raw)) / sqm, atol=1e-10)
    assert np.allclose(v, v_raw, atol=1e-12)


def test_decode_rejects_vectors_outside_the_encoding(chain5_gnm):
    st = encode_initial_conditions(chain5_gnm, [1, 0, 0, 0, -1],
                                   [0, 0, 0, 0, 0])
    bad = st.psi.copy()
    bad[0] += 0.3j  # imaginary leak into the velocity block
    with pytest.raises(EncodingError):
        dyn.decode_state(chain5_gnm, bad, st.energy)
    bad = st.psi.copy()
    bad[chain5_gnm.n_dof] += 0.3  # real leak into the position block
    with pytest.raises(EncodingError):
        dyn.decode_state(chain5_gnm, bad, st.energy)


def test_forceless_history_matches_harmonic_evolution(chain5_gnm):
    emb = dyn.embed(chain5_gnm)
    rng = np.random.default_rng(8)
    u0, v0 = rng.normal(size=5), rng.normal(size=5)
    st = encode_initial_conditions(chain5_gnm, u0, v0)
    hist = dyn.evolve_inhomogeneous(chain5_gnm, u0, v0, None, T=8.0,
                                    n_steps=64)
    assert hist.n_snapshots == 65
    for k, t in enumerate(hist.times):
        psi_t = dyn.evolve_harmonic(emb, st.psi, float(t))
        assert np.abs(hist.snapshots[k] - psi_t).max() <= 1e-10
    assert abs(hist.composite_norm - 1) < 1e-12


def test_constant_force_solved_exactly_per_step():
    k_spring, F = 2.3, 0.7
    m1 = model_from_matrices(np.array([[k_spring]]), np.array([1.0]))
    w0 = np.sqrt(k_spring)
    for n_steps in (3000, 6000):
        hist = dyn.evolve_inhomogeneous(m1, [0.0], [0.0],
                                        lambda t: np.array([F]),
                                        T=6.0, n_steps=n_steps)
        exact = (F / k_spring) * (1 - np.cos(w0 * hist.times))
        # piecewise-constant sampling of a constant force is lossless
        assert np.abs(hist.displacements[:, 0] - exact).max() < 1e-9


def test_langevin_gamma_zero_is_unitary_conjugation(chain2, emb2):
    rng = np.random.default_rng(4)
    st = encode_initial_conditions(chain2, rng.normal(size=2),
                                   rng.normal(size=2))
    x0 = st.psi * np.sqrt(2 * st.energy)
    rho0 = np.outer(x0, x0.conj())
    params = dyn.LangevinParams(gamma=0.0, kT=0.0)
    rho_t = dyn.evolve_langevin_covariance(emb2, params, rho0, 2.5)
    assert abs(np.trace(rho_t) - np.trace(rho0)) < 1e-10
    prop = dyn.evolve_harmonic(emb2, x0, 2.5)
    assert np.abs(rho_t - np.outer(prop, prop.conj())).max() < 1e-10


def test_langevin_zero_hamiltonian_integral():
    # H = 0: rho(t) = (1 - e^{-2 gamma t}) / (2 gamma) * S S^T
    m0 = model_from_matrices(np.zeros((3, 3)), np.ones(3))
    emb0 = dyn.embed(m0)
    params = dyn.LangevinParams(gamma=0.8, kT=0.5)
    t = 1.7
    rho_t = dyn.evolve_langevin_covariance(emb0, params,
                                           np.zeros((3, 3)), t)
    S = params.noise_matrix(emb0)
    exact = (1 - np.exp(-2 * params.gamma * t)) / (2 * params.gamma) * (S @ S.T)
    assert np.abs(rho_t - exact).max() < 1e-12


def test_langevin_routes_agree_for_all_mode_combinations(chain2, emb2):
    rng = np.random.default_rng(12)
    st = encode_initial_conditions(chain2, rng.normal(size=2),
                                   rng.normal(size=2))
    x0 = st.psi * np.sqrt(2 * st.energy)
    rho0 = np.outer(x0, x0.conj())
    for damping in ("scalar", "velocity"):
        for noise in ("velocity", "isotropic"):
            p = dyn.LangevinParams(gamma=0.5, kT=0.3, damping=damping,
                                   noise=noise)
            # method="cross" raises if the two routes split
            rho = dyn.evolve_langevin_covariance(emb2, p, rho0, 1.3)
            assert np.abs(rho - rho.conj().T).max() < 1e-10


def test_covariance_input_validation(emb2):
    p = dyn.LangevinParams(gamma=0.1, kT=0.1)
    ok = np.eye(emb2.dim)
    with pytest.raises(ValueError):
        dyn.evolve_langevin_covariance(emb2, p, np.eye(2), 1.0)
    nonherm = ok + 0j
    nonherm[0, 1] = 1.0
    with pytest.raises(ValueError):
        dyn.evolve_langevin_covariance(emb2, p, nonherm, 1.0)
    with pytest.raises(ValueError):
        dyn.evolve_langevin_covariance(emb2, p, ok, -1.0)
    with pytest.raises(ValueError):
        dyn.evolve_langevin_covariance(emb2, p, ok, 1.0, method="magic")


def test_langevin_params_validation(emb2):
    with pytest.raises(ValueError):
        dyn.LangevinParams(gamma=-0.1, kT=0.0)
    with pytest.raises(ValueError):
        dyn.LangevinParams(gamma=0.1, kT=-1.0)
    with pytest.raises(ValueError):
        dyn.LangevinParams(gamma=0.1, kT=0.1, damping="none")
    with pytest.raises(ValueError):
        dyn.LangevinParams(gamma=0.1, kT=0.1, noise="thermal")
    params = dyn.LangevinParams(gamma=0.5, kT=0.3)
    assert params.sigma == pytest.approx(np.sqrt(2 * 0.3 * 0.5))


def _z_fraction(mc, rho):
    floor = 1e-10 * np.linalg.norm(rho)
    zr = (mc["second_moment"].real - rho.real) / np.maximum(
        mc["stderr_real"], floor)
    zi = (mc["second_moment"].imag - rho.imag) / np.maximum(
        mc["stderr_imag"], floor)
    z = np.concatenate([zr.ravel(), zi.ravel()])
    return np.mean(np.abs(z) <= 4)


def test_master_equation_matches_encoded_monte_carlo(chain2, emb2):
    rng = np.random.default_rng(4)
    st = encode_initial_conditions(chain2, rng.normal(size=2),
                                   rng.normal(size=2))
    x0 = st.psi * np.sqrt(2 * st.energy)
    rho0 = np.outer(x0, x0.conj())
    for damping in ("scalar", "velocity"):
        p = dyn.LangevinParams(gamma=0.5, kT=0.3, damping=damping)
        mc = dyn.monte_carlo_encoded(emb2, p, x0, t=1.0, n_paths=4000,
                                     seed=11)
        rho = dyn.evolve_langevin_covariance(emb2, p, rho0, 1.0)
        assert _z_fraction(mc, rho) >= 0.95, damping


def test_monte_carlo_seed_and_prefix_stability(chain2, emb2):
    st = encode_initial_conditions(chain2, [0.4, -0.4], [0.0, 0.2])
    x0 = st.psi * np.sqrt(2 * st.energy)
    p = dyn.LangevinParams(gamma=0.5, kT=0.3)
    a = dyn.monte_carlo_encoded(emb2, p, x0, t=0.8, n_paths=500, seed=11)
    b = dyn.monte_carlo_encoded(emb2, p, x0, t=0.8, n_paths=500, seed=11)
    assert np.array_equal(a["finals"], b["finals"])
    small = dyn.monte_carlo_encoded(emb2, p, x0, t=0.8, n_paths=60, seed=11)
    assert np.array_equal(a["finals"][:60], small["finals"])
    other = dyn.monte_carlo_encoded(emb2, p, x0, t=0.8, n_paths=60, seed=12)
    assert not np.array_equal(small["finals"], other["finals"])


def test_noiseless_damped_path_matches_analytic():
    m1 = model_from_matrices(np.array([[1.0]]), np.ones(1))
    g = 0.4
    p = dyn.LangevinParams(gamma=g, kT=0.0)
    res = dyn.monte_carlo_langevin(m1, p, [1.0], [0.0], t=5.0, n_paths=2,
                                   seed=5)
    wd = np.sqrt(1.0 - g * g / 4)
    exact = np.exp(-g * 5.0 / 2) * (np.cos(wd * 5.0)
                                    + (g / 2 / wd) * np.sin(wd * 5.0))
    # Euler-Maruyama is first order in h
    assert abs(res["displacements"][0, 0] - exact) < 5 * res["h"]


def test_velocity_variance_reaches_equipartition():
    m1 = model_from_matrices(np.array([[1.0]]), np.ones(1))
    p = dyn.LangevinParams(gamma=1.0, kT=0.25)
    res = dyn.monte_carlo_langevin(m1, p, [0.3], [0.0], t=30.0,
                                   n_paths=6000, seed=17)
    var_v = res["velocities"][:, 0].var(ddof=1)
    se = var_v * np.sqrt(2.0 / (6000 - 1))
    assert abs(var_v - p.kT) <= 3 * se


def test_step_size_cap_is_enforced(chain2, emb2):
    p = dyn.LangevinParams(gamma=0.5, kT=0.3)
    st = encode_initial_conditions(chain2, [0.4, -0.4], [0.0, 0.0])
    x0 = st.psi * np.sqrt(2 * st.energy)
    with pytest.raises(ValueError):
        dyn.monte_carlo_encoded(emb2, p, x0, t=1.0, n_paths=4, seed=1, h=0.5)
    with pytest.raises(ValueError):
        dyn.monte_carlo_encoded(emb2, p, x0, t=1.0, n_paths=4, seed=1, h=-1.0)
    m1 = model_from_matrices(np.array([[1.0]]), np.ones(1))
    with pytest.raises(ValueError):
        dyn.monte_carlo_langevin(m1, p, [0.0], [1.0], t=1.0, n_paths=4,
                                 seed=1, h=1.0)
