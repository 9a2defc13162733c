import numpy as np
import pytest

from jjcircuit import units
from jjcircuit.modes import (ISLAND, JOSEPHSON, OSCILLATOR, TransformError, bias_offsets,
                             build_mode_transform, build_node_matrices, inductive_clusters,
                             parse_rational)
from jjcircuit.netlist import parse_netlist

from conftest import DATA, FLUX_QUBIT_S, flux_qubit_user_transform

MUTUAL = "ind L1 1 2 500\nind L2 2 0 300\nmut M L1 L2 100\ncap C1 1 0 5\ncap C2 2 0 5\n"


def _jpsq(cfg):
    return build_mode_transform(cfg.circuit, user=cfg.transform)


def test_mutual_inductance_node_matrix_oracle():
    nm = build_node_matrices(parse_netlist(MUTUAL))
    expected = np.array([[0.002142857142857143, -0.002857142857142857],
                         [-0.002857142857142857, 0.007142857142857143]])
    np.testing.assert_allclose(nm.linv_nodes, expected, rtol=1e-13)
    # energy cross-check against the branch picture: branch fluxes b = (phi1 - phi2, phi2)
    phi = np.array([0.3, -0.1])
    b = np.array([phi[0] - phi[1], phi[1]])
    lb = np.array([[500.0, 100.0], [100.0, 300.0]])
    assert phi @ nm.linv_nodes @ phi == pytest.approx(b @ np.linalg.solve(lb, b), rel=1e-13)


def test_lc_oscillator_parameters(lc):
    mt = build_mode_transform(lc)
    assert mt.kinds == (OSCILLATOR,)
    f, z_ohm, z = mt.oscillator_params(0)
    expected_f = 1 / (2 * np.pi * np.sqrt(400e-12 * 50e-15)) / 1e9
    assert f == pytest.approx(expected_f, rel=1e-10)
    assert z_ohm == pytest.approx(np.sqrt(400e-12 / 50e-15), rel=1e-12)
    assert z == pytest.approx(np.pi * z_ohm / units.R_Q, rel=1e-12)


def test_automatic_flux_qubit_transform(flux_qubit):
    mt = build_mode_transform(flux_qubit)
    assert mt.counts == (1, 0, 2)
    np.testing.assert_allclose(mt.R @ mt.S, np.eye(3), atol=1e-12)
    jos = mt.indices(JOSEPHSON)
    np.testing.assert_allclose(mt.linv[np.ix_(jos, jos)], 0)


def test_user_transform_validated(flux_qubit):
    mt = build_mode_transform(flux_qubit, user=flux_qubit_user_transform())
    np.testing.assert_allclose(mt.S, FLUX_QUBIT_S, atol=1e-12)
    assert mt.names == ("O", "Ja", "Jb")


@pytest.mark.parametrize("rows, kinds, fragment", [
    ([[1, 0, 0], [0, 1, 0], [1, 1, 0]], ["oscillator", "josephson", "josephson"], "singular"),
    ([[0, 0, 1], [1, 0, 0], [0, 1, 0]], ["oscillator", "oscillator", "josephson"], "oscillator modes"),
    # Josephson columns doubled: lattice index 2, not unimodular
    ([[0, 0, 1], ["1/2", 0, 0], [0, "1/2", 0]], ["oscillator", "josephson", "josephson"], "unimodular"),
])
def test_user_transform_rejected(flux_qubit, rows, kinds, fragment):
    with pytest.raises(TransformError, match=fragment):
        build_mode_transform(flux_qubit, user={"rows": rows, "kinds": kinds})


def test_parse_rational():
    assert parse_rational("-1/4") == -0.25
    assert parse_rational(3) == 3.0
    assert parse_rational("0.5") == 0.5
    with pytest.raises(ValueError):
        parse_rational("1/0")


def test_jpsq_mode_structure(jpsq_config):
    mt = _jpsq(jpsq_config)
    assert mt.names == ("l", "p", "delta", "R", "L", "J", "I")
    assert mt.counts == (5, 1, 1)
    assert mt.kinds[mt.index("I")] == ISLAND


def test_jpsq_inverse_capacitance_entries(jpsq_config):
    # with junction capacitance cj the loop and J entries follow from the mode definitions
    mt = _jpsq(jpsq_config)
    cj = 2.0
    i = {n: mt.index(n) for n in mt.names}
    assert mt.cinv[i["delta"], i["delta"]] == pytest.approx(1 / cj, rel=1e-9)
    assert mt.cinv[i["l"], i["delta"]] == pytest.approx(1 / cj, rel=1e-9)
    assert mt.cinv[i["p"], i["J"]] == pytest.approx(1 / (4 * cj), rel=1e-9)
    assert mt.cinv[i["J"], i["J"]] == pytest.approx(1 / (4 * cj), rel=1e-9)
    assert mt.linv[i["l"], i["delta"]] == pytest.approx(-1 / 300, rel=1e-9)


def test_jpsq_cross_couplings_between_partitions(jpsq_config):
    mt = _jpsq(jpsq_config)
    beta = [mt.index(n) for n in ("J", "delta", "R", "L")]
    gamma = [mt.index(n) for n in ("I", "l", "p")]
    cross_c = {(mt.names[a], mt.names[b]) for a in beta for b in gamma if abs(mt.cinv[a, b]) > 1e-12}
    cross_l = {(mt.names[a], mt.names[b]) for a in beta for b in gamma if abs(mt.linv[a, b]) > 1e-12}
    assert cross_c == {("delta", "l"), ("J", "p")}
    assert cross_l == {("delta", "l")}


def test_inductive_clusters():
    c = parse_netlist((DATA / "jpsq.net").read_text())
    clusters = inductive_clusters(c)
    assert frozenset({"1", "3", "4", "5", "6", "7"}) in clusters
    assert frozenset({"2"}) in clusters


def test_floating_node_regularized():
    nm = build_node_matrices(parse_netlist("ind L 1 0 100\njj J 1 2 10\ncap C 1 0 10\n"))
    assert nm.regularized == ("2",)
    assert np.linalg.matrix_rank(nm.cap) == 2


def test_flux_bias_offsets_rf_squid(rf_squid):
    mt = build_mode_transform(rf_squid)
    dq, dphi = bias_offsets(rf_squid, mt)
    # the single node sits at the external flux; the mode row scales it
    assert dphi[0] * mt.S[0, 0] == pytest.approx(0.3, rel=1e-12)
    np.testing.assert_allclose(dq, 0)


def test_charge_offsets_transform_with_s_transpose():
    c = parse_netlist("jj J1 1 0 10 cj=3\njj J2 2 0 10 cj=3\ncap K 1 2 1\nqoff 1 0.2\nqoff 2 -0.1\n")
    mt = build_mode_transform(c)
    dq, _ = bias_offsets(c, mt)
    np.testing.assert_allclose(dq, mt.S.T @ np.array([0.2, -0.1]), atol=1e-15)


def test_island_charge_offset():
    c = parse_netlist("cap C1 1 0 5\njj J 1 2 10 cj=1\ncap C2 2 0 5\nqoff 1 0.25\n")
    mt = build_mode_transform(c)
    assert mt.counts == (0, 1, 1)
    dq, _ = bias_offsets(c, mt)
    assert dq[mt.indices(ISLAND)[0]] == pytest.approx(0.25)
