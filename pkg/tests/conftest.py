from importlib.resources import files

import pytest

from tabguide.fol import parse_tptp_cnf
from tabguide.tableau import SearchLimits, prove_all

FIG1_TREE = ["c2", "c6", "c5", "c3", "c4"]


def bundled(name: str) -> str:
    return files("tabguide.data").joinpath(name).read_text()


def fig1_matrix():
    return parse_tptp_cnf(bundled("fig1.p"), "fig1")


def fig1_proof():
    """The reference tableau: root P(a) expanded by c2, then R(a,b) by c6."""
    m = fig1_matrix()
    proofs, _ = prove_all(m, SearchLimits(max_depth=3), max_proofs=10)
    (p,) = [p for p in proofs if p.expansions() == FIG1_TREE]
    return m, p


@pytest.fixture
def fig1():
    return fig1_proof()
