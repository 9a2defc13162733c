import json
import math

import numpy as np
import pytest

from jjcircuit import units
from jjcircuit.hamiltonian import assemble, compile_circuit, dump_terms, expectation
from jjcircuit.netlist import parse_netlist
from jjcircuit.operators import Op
from jjcircuit.solver import eigensolve_lowest

from conftest import JPSQ_TRUNCATIONS, transmon_netlist


def _levels(cc, truncations, k=5):
    h = cc.hamiltonian(truncations)
    return eigensolve_lowest(h, k).values


@pytest.mark.parametrize("nu", [3, 8, 20])
def test_lc_spectrum_exact(lc, nu):
    cc = compile_circuit(lc)
    f = cc.transform.oscillator_params(0)[0]
    e = _levels(cc, [nu], k=nu)
    np.testing.assert_allclose(e, f * (np.arange(nu) + 0.5), rtol=1e-10)


def test_lc_with_bias_flux_unchanged():
    plain = compile_circuit(parse_netlist("cap C 1 0 50\nind L 1 0 400\n"))
    biased = compile_circuit(parse_netlist("cap C 1 0 50\nind L 1 0 400 flux=0.37\nqoff 1 0.2\n"))
    np.testing.assert_allclose(_levels(plain, [10]), _levels(biased, [10]), rtol=1e-12)


@pytest.mark.parametrize("ratio", [5, 50])
def test_transmon_self_convergence(ratio):
    cc = compile_circuit(parse_netlist(transmon_netlist(0.3, ratio, 0.2)))
    a, b = _levels(cc, [30]), _levels(cc, [60])
    np.testing.assert_allclose(a, b, rtol=1e-8)


def test_transmon_charge_dispersion_limit():
    # E_01 approaches sqrt(8 E_J E_C) - E_C deep in the transmon regime
    ec, ratio = 0.25, 100
    cc = compile_circuit(parse_netlist(transmon_netlist(ec, ratio)))
    e = _levels(cc, [25], k=2)
    assert e[1] - e[0] == pytest.approx(math.sqrt(8 * ratio * ec * ec) - ec, rel=0.01)


def test_rf_squid_term_structure(rf_squid):
    cc = compile_circuit(rf_squid)
    labels = [t.label for t in cc.terms(cc.basis([6]))]
    assert labels == ["C:O0", "L:O0", "J:J", "J:J*"]
    j, jc = cc.terms(cc.basis([6]))[2:]
    assert abs(j.coeff) == pytest.approx(15.0)
    assert jc.coeff == pytest.approx(np.conj(j.coeff))
    # junction phase equals 2 pi times the external flux
    assert cc.junctions[0].phase == pytest.approx(math.remainder(2 * math.pi * 0.3, 2 * math.pi))


def test_jpsq_term_coefficients(jpsq_config):
    cc = compile_circuit(jpsq_config.circuit, transform=jpsq_config.transform)
    terms = {t.label: t for t in cc.terms(cc.basis(JPSQ_TRUNCATIONS))}
    cj = 2.0
    assert terms["C:delta"].coeff.real == pytest.approx(0.5 * units.CHARGE_ENERGY / cj, rel=1e-9)
    assert terms["C:l,delta"].coeff.real == pytest.approx(units.CHARGE_ENERGY / cj, rel=1e-9)
    assert terms["C:p,J"].coeff.real == pytest.approx(units.CHARGE_ENERGY / (4 * cj), rel=1e-9)
    assert terms["L:l,delta"].coeff.real == pytest.approx(-units.FLUX_ENERGY / 300, rel=1e-9)
    for jid in ("JTL", "JBL", "JTR", "JBR"):
        assert abs(terms[f"J:{jid}"].coeff) == pytest.approx(10.0)
    # each junction: one Josephson step, half-flux displacements of delta and one local mode
    jd = {x.branch: x for x in cc.junctions}
    assert all(x.jos == (1,) for x in jd.values())
    assert jd["JTL"].osc == (0.0, 0.0, -0.5, 0.0, -0.5)
    assert jd["JBR"].osc == (0.0, 0.0, 0.5, -0.5, 0.0)
    # half a flux quantum through the loop splits as -pi/2 on the left and +pi/2 on the right
    assert jd["JTR"].phase - jd["JTL"].phase == pytest.approx(math.pi)


def test_jpsq_dimension(jpsq_config):
    cc = compile_circuit(jpsq_config.circuit, transform=jpsq_config.transform)
    assert cc.basis(JPSQ_TRUNCATIONS).dimension == 39600


def test_dump_terms_json(rf_squid):
    cc = compile_circuit(rf_squid)
    data = json.loads(dump_terms(cc.terms(), cc.transform.names))
    assert data[2]["factors"][0][:2] == ["O0", "displacement"]
    assert len(data[2]["coeff"]) == 2


def test_assemble_hermitian_and_cap(flux_qubit):
    cc = compile_circuit(flux_qubit)
    h = cc.hamiltonian([4, 3, 3])
    assert h.dimension == 5 * 7 * 7
    assert abs(h.matrix - h.matrix.getH()).max() < 1e-12
    with pytest.raises(ValueError, match="exceeds cap"):
        assemble(cc.terms(), cc.basis([4, 3, 3]), cap=100)


def test_expectation_matches_dense(flux_qubit):
    cc = compile_circuit(flux_qubit)
    basis = cc.basis([4, 2, 2])
    rng = np.random.default_rng(1)
    psi = rng.standard_normal(basis.dimension) + 1j * rng.standard_normal(basis.dimension)
    psi /= np.linalg.norm(psi)
    op = (1, Op("charge"))
    dense = np.kron(np.kron(np.eye(5), basis.matrix(1, Op("charge"))), np.eye(5))
    assert expectation(op, psi, basis) == pytest.approx(np.vdot(psi, dense @ psi), abs=1e-13)
