import numpy as np
import pytest

from gnmqsim.errors import NumericalError
from gnmqsim.network import (build_anm, build_gnm, condition_diagnostics,
                             export_matrix_market, import_matrix_market,
                             incidence_factor, mass_weight,
                             model_from_matrices)
from gnmqsim.structure import ProteinStructure, synthetic_chain

RTOL = 1e-12


def test_gnm_chain_is_path_laplacian():
    # 3.8 A spacing, 7.0 A cutoff: only adjacent residues interact
    model = build_gnm(synthetic_chain(4))
    expected = np.array([[1, -1, 0, 0],
                         [-1, 2, -1, 0],
                         [0, -1, 2, -1],
                         [0, 0, -1, 1]], dtype=float)
    assert np.array_equal(model.K, expected)
    assert model.n_edges == 3


def test_gnm_row_sums_vanish(crambin_gnm):
    assert np.allclose(crambin_gnm.K.sum(axis=1), 0.0, atol=1e-12)
    assert np.array_equal(crambin_gnm.K, crambin_gnm.K.T)
    # integer contact counts on the diagonal
    assert np.array_equal(crambin_gnm.K, np.round(crambin_gnm.K))
    assert crambin_gnm.K[0, 0] == 6.0
    assert crambin_gnm.n_edges == 153


def test_spring_scales_linearly():
    base = build_gnm(synthetic_chain(4), spring=1.0)
    double = build_gnm(synthetic_chain(4), spring=2.0)
    assert np.allclose(double.K, 2.0 * base.K)


def test_wider_cutoff_adds_contacts():
    near = build_gnm(synthetic_chain(6), cutoff=7.0)
    far = build_gnm(synthetic_chain(6), cutoff=8.0)   # second neighbors at 7.6
    assert far.n_edges > near.n_edges
    assert far.K[0, 2] == -1.0
    assert near.K[0, 2] == 0.0


def test_anm_two_atom_block():
    pair = synthetic_chain(2, spacing=3.0)
    model = build_anm(pair)
    # unit vector along x: H_ij = -spring * outer(e, e)
    e = np.array([1.0, 0.0, 0.0])
    block = -np.outer(e, e)
    assert np.allclose(model.K[0:3, 3:6], block, atol=RTOL)
    assert np.allclose(model.K[0:3, 0:3], np.outer(e, e), atol=RTOL)


def test_anm_zero_mode_counts():
    ev_line = np.linalg.eigvalsh(build_anm(synthetic_chain(3)).A)
    # collinear chain: 2 stretch modes carry the only restoring forces
    assert int((ev_line <= 1e-8 * ev_line[-1]).sum()) == 7
    pos = synthetic_chain(3).positions.copy()
    pos[2] = [1.9, 3.3, 0.0]
    bent = ProteinStructure(positions=pos, masses=np.ones(3),
                            labels=["A1", "A2", "A3"])
    ev_bent = np.linalg.eigvalsh(build_anm(bent).A)
    # non-collinear: exactly the six rigid-body motions
    assert int((ev_bent <= 1e-8 * ev_bent[-1]).sum()) == 6


def test_mass_weighting():
    rng = np.random.default_rng(3)
    K = rng.normal(size=(5, 5))
    K = K @ K.T
    m = rng.uniform(0.5, 4.0, size=5)
    A = mass_weight(K, m)
    s = 1.0 / np.sqrt(m)
    assert np.allclose(A, s[:, None] * K * s[None, :], atol=1e-13)


@pytest.mark.parametrize("builder", [build_gnm, build_anm])
def test_incidence_factorization(builder, crambin):
    model = builder(crambin)
    assert np.allclose(model.B @ model.B.T, model.A, atol=1e-10)


def test_factor_column_count_matches_edges(crambin_gnm):
    assert crambin_gnm.B.shape == (46, crambin_gnm.n_edges)


def test_model_from_matrices_rejects_indefinite():
    K = np.diag([1.0, -2.0])
    with pytest.raises(NumericalError):
        model_from_matrices(K, np.ones(2))


def test_condition_diagnostics(crambin_gnm):
    diag = condition_diagnostics(crambin_gnm)
    assert diag["n_zero_modes"] == 1
    assert diag["lambda_max"] > diag["lambda_min_nonzero"] > 0
    assert diag["kappa"] == pytest.approx(
        diag["lambda_max"] / diag["lambda_min_nonzero"])


def test_matrix_market_round_trip(tmp_path):
    model = build_gnm(synthetic_chain(4))
    path = tmp_path / "k.mtx"
    export_matrix_market(model.K, path, comment="chain")
    back = import_matrix_market(path)
    assert np.allclose(back, model.K, atol=1e-15)
