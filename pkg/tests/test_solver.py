import numpy as np
import pytest
import scipy.sparse as sp

from jjcircuit.hamiltonian import compile_circuit
from jjcircuit.netlist import parse_netlist
from jjcircuit.solver import SolverError, converge_truncation, eigensolve_lowest, grow_truncations

from conftest import transmon_netlist


def _random_hermitian(n, seed=3):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


def test_lanczos_matches_dense_on_random_hermitian():
    h = _random_hermitian(200)
    spec = eigensolve_lowest(sp.csr_matrix(h), 10, dense_limit=0)
    assert spec.meta["method"] == "lanczos"
    np.testing.assert_allclose(spec.values, np.linalg.eigvalsh(h)[:10], atol=1e-10)
    assert spec.residuals.max() < 1e-8
    np.testing.assert_allclose(spec.vectors.conj().T @ spec.vectors, np.eye(10), atol=1e-10)


def test_dense_path_and_relative():
    h = np.diag([3.0, 1.0, 2.0, 5.0])
    spec = eigensolve_lowest(h, 3)
    assert spec.meta["method"] == "dense"
    np.testing.assert_allclose(spec.relative(), [0, 1, 2])


def test_seed_reproducible():
    h = sp.csr_matrix(_random_hermitian(150, seed=5))
    a = eigensolve_lowest(h, 4, seed=11, dense_limit=0)
    b = eigensolve_lowest(h, 4, seed=11, dense_limit=0)
    np.testing.assert_array_equal(a.values, b.values)


def test_degenerate_block_orthonormal():
    n = 600
    d = np.concatenate([[0.0, 0.0, 0.0], np.linspace(1, 10, n - 3)])
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((n, n)))
    h = sp.csr_matrix((q * d) @ q.T)
    spec = eigensolve_lowest(h, 4)
    np.testing.assert_allclose(spec.values[:3], 0, atol=1e-9)
    np.testing.assert_allclose(spec.vectors.T @ spec.vectors, np.eye(4), atol=1e-9)


def test_invalid_k():
    with pytest.raises(ValueError):
        eigensolve_lowest(sp.identity(600, format="csr"), 600)


def test_nonconvergence_reports_partial():
    h = sp.csr_matrix(_random_hermitian(800, seed=9))
    with pytest.raises(SolverError):
        eigensolve_lowest(h, 6, maxiter=1, dense_limit=0)


def test_growth_schedule():
    assert grow_truncations(("oscillator", "josephson", "island"), (4, 5, 2)) == (6, 7, 4)


def test_converge_truncation_transmon():
    cc = compile_circuit(parse_netlist(transmon_netlist(0.3, 20, 0.1)))

    def build(tr):
        return eigensolve_lowest(cc.hamiltonian(list(tr)), 3)

    res = converge_truncation(build, cc.transform.kinds, (2,), [(0, 1), (0, 2)], tol_ghz=1e-6)
    assert res.converged
    assert res.truncations[0] > 2
    ref = build((30,)).values
    np.testing.assert_allclose(res.spectrum.relative()[1:], (ref - ref[0])[1:], atol=2e-6)
