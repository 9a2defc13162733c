import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jjcircuit.netlist import NetlistError, emit_netlist, parse_netlist

from conftest import FLUX_QUBIT, RF_SQUID


def test_parse_basic(rf_squid):
    c = rf_squid
    assert c.nodes == ("1",)
    assert [b.kind for b in c.branches] == ["junction", "inductor", "capacitor"]
    j = c.branch("J")
    assert j.ej == 30 and j.capacitance == 4
    assert c.branch("L").flux == 0.3


def test_comments_blank_lines_and_case():
    c = parse_netlist("# header\n\nCAP C1 1 0 5  # trailing\nInd L1 1 0 100\n")
    assert [b.id for b in c.branches] == ["C1", "L1"]


def test_charge_offsets_and_node_order():
    c = parse_netlist("cap a 10 0 1\ncap b 2 10 1\nqoff 10 0.3\n")
    assert c.nodes == ("2", "10")
    assert c.offsets() == {"10": 0.3}


@pytest.mark.parametrize("text, fragment", [
    ("cap C 1 0", "expects 4"),
    ("cap C 1 0 -1", "negative capacitance"),
    ("ind L 1 0 0", "nonpositive inductance"),
    ("jj J 1 0 -3", "nonpositive Josephson"),
    ("cap C 1 1 3", "to itself"),
    ("cap C 1 0 3\ncap C 1 0 4", "duplicate id"),
    ("cap C 1 0 abc", "line 1"),
    ("res R 1 0 50", "unknown statement"),
    ("jj J 1 0 3 flux=0.5", "unknown option"),
    ("cap C 1 0 1\nqoff 7 0.1", "unknown node"),
    ("ind A 1 0 10\ncap B 1 0 1\nmut M A B 2", "two inductors"),
    ("ind A 1 0 10\nind B 1 2 10\nmut M A B 20", "passivity"),
    ("ind A 1 0 10\nmut M A Z 2", "unknown branch"),
])
def test_rejects_invalid(text, fragment):
    with pytest.raises(NetlistError) as err:
        parse_netlist(text)
    assert fragment in str(err.value)


def test_collects_all_diagnostics_with_lines():
    with pytest.raises(NetlistError) as err:
        parse_netlist("cap C 1 0 -1\nind L 1 0 -2\n")
    diags = err.value.diagnostics
    assert [d.line for d in diags] == [1, 2]
    assert all(d.col for d in diags)


def test_singular_inductance_matrix_rejected():
    with pytest.raises(NetlistError, match="not positive definite"):
        parse_netlist("ind A 1 0 10\nind B 1 2 10\nmut M A B 10\n")


def test_with_flux_only_on_inductors(rf_squid):
    assert rf_squid.with_flux("L", 0.1).branch("L").flux == 0.1
    with pytest.raises((KeyError, ValueError)):
        rf_squid.with_flux("J", 0.1)


@pytest.mark.parametrize("text", [RF_SQUID, FLUX_QUBIT,
                                  "ind A 1 0 500\nind B 2 0 300 flux=0.2\nmut M A B 100\ncap C 1 2 3\nqoff 1 0.25\n"])
def test_emit_roundtrip(text):
    c = parse_netlist(text)
    assert parse_netlist(emit_netlist(c)) == c


@st.composite
def circuits(draw):
    n_nodes = draw(st.integers(1, 4))
    nodes = [str(i) for i in range(n_nodes + 1)]
    lines = []
    for k in range(draw(st.integers(1, 6))):
        kind = draw(st.sampled_from(["cap", "ind", "jj"]))
        a, b = draw(st.lists(st.sampled_from(nodes), min_size=2, max_size=2, unique=True))
        value = draw(st.floats(0.1, 1e3, allow_nan=False))
        extra = ""
        if kind == "ind" and draw(st.booleans()):
            extra = f" flux={draw(st.floats(-2, 2))!r}"
        if kind == "jj" and draw(st.booleans()):
            extra = f" cj={draw(st.floats(0, 10))!r}"
        lines.append(f"{kind} B{k} {a} {b} {value!r}{extra}")
    used = sorted({tok for ln in lines for tok in ln.split()[2:4]} - {"0"})
    if used and draw(st.booleans()):
        lines.append(f"qoff {used[0]} {draw(st.floats(-1, 1))!r}")
    return "\n".join(lines)


@settings(max_examples=150, deadline=None)
@given(circuits())
def test_roundtrip_property(text):
    try:
        c = parse_netlist(text)
    except NetlistError:
        return
    again = parse_netlist(emit_netlist(c))
    assert again == c
    np.testing.assert_array_equal(again.inductance_matrix(), c.inductance_matrix())
