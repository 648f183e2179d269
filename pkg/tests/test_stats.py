import numpy as np
import pytest

from qgl.errors import WrongFamily
from qgl.graphs import load_graph, loop_chain
from qgl.stats import (
    binomial_test,
    draw_lengths,
    gaussian_limit_scan,
    run_experiment,
    signature_recurrence,
    symmetry_test,
)


def test_draw_lengths_deterministic():
    a = draw_lengths(5, 123)
    b = draw_lengths(5, 123)
    assert np.array_equal(a, b)
    assert np.all((1.0 <= a) & (a <= 2.0))
    assert not np.array_equal(a, draw_lengths(5, 124))


def test_run_is_deterministic(dumbbell):
    d1 = run_experiment(dumbbell, 150, seed=7)
    d2 = run_experiment(dumbbell, 150, seed=7)
    assert d1.sigma_hist == d2.sigma_hist
    assert d1.N_raw == d2.N_raw
    assert [r.k for r in d1.records] == [r.k for r in d2.records]


def test_tree_surplus_is_point_mass(star3):
    d = run_experiment(star3, 120, seed=1)
    assert set(d.sigma_hist) == {0}
    assert d.loop_count == 0
    # omega of this 3-star takes the two allowed values only
    assert set(d.omega_hist) <= {-2, -1}


def test_dumbbell_run_tallies(dumbbell):
    d = run_experiment(dumbbell, 400, seed=7, check_identities=True)
    assert d.K == 400
    assert d.identity_failures == 0
    assert sum(d.sigma_hist.values()) == 400
    # built-in dumbbell lengths are incommensurate: no degeneracies at all
    assert d.excluded == {}
    assert d.loop_count > 0
    assert set(d.sigma_hist) == {0, 1, 2}


def test_lasso_loop_density(lasso):
    # unit loop and tail: loop-supported density l_loop / 2L = 1/4
    d = run_experiment(lasso, 600)
    dens = d.loop_density()
    assert dens == pytest.approx(0.25, abs=3.0 / np.sqrt(d.N_raw) + 0.005)
    # the loop states' degenerate partners are tallied, not alarmed
    assert d.excluded.get("degenerate_at_loop", 0) > 0
    assert d.excluded.get("non_simple", 0) == 0


def test_symmetry_test_dumbbell(dumbbell):
    d = run_experiment(dumbbell, 800, seed=7)
    rep = symmetry_test(d)
    assert rep["ok"]
    assert rep["sigma_mean_expected"] == 1.0
    assert rep["omega_mean_expected"] == 1.0
    assert rep["max_joint_residual"] < 0.1


def test_binomial_test_dumbbell(dumbbell):
    d = run_experiment(dumbbell, 800, seed=7)
    rep = binomial_test(d)
    assert rep["variable"] == "sigma" and rep["trials"] == 2
    assert rep["ok"]
    assert rep["predicted"] == pytest.approx([0.25, 0.5, 0.25])


def test_binomial_test_tree31(tree31):
    d = run_experiment(tree31, 600, seed=3)
    rep = binomial_test(d)
    assert rep["variable"] == "omega+4" and rep["trials"] == 3
    assert sum(rep["observed"]) == d.K


def test_binomial_test_rejects_other_families(k4):
    d = run_experiment(k4, 50, seed=2)
    with pytest.raises(WrongFamily):
        binomial_test(d)


def test_magnetic_accumulation(dumbbell):
    d = run_experiment(dumbbell, 100, seed=7, magnetic=True,
                       check_identities=True)
    assert d.identity_failures == 0
    assert set(d.iota_hist) == {0, 1}
    for hist in d.iota_hist.values():
        assert set(hist) <= {0, 1}
    # each record carries one local index per cycle block
    assert all(len(r.iota) == 2 for r in d.records)


def test_star_observables_accumulated(k4):
    d = run_experiment(k4, 150, seed=4)
    assert set(d.vertex_hist) == set(k4.topology.interior)
    for v, hist in d.vertex_hist.items():
        assert set(hist) <= set(range(1, k4.degrees[v]))
        assert len(d.rho_values[v]) == sum(hist.values())


def test_signature_recurrence(dumbbell):
    # the dumbbell signature space is small, so every early signature
    # reappears in the remainder of a moderate stream
    d = run_experiment(dumbbell, 500, seed=7)
    rep = signature_recurrence(d, head_fraction=0.1)
    assert rep["ok"], rep["missing_later"]


def test_gaussian_scan_smoke():
    rows = gaussian_limit_scan(cycle_counts=(2,), K=300, seed=0)
    assert len(rows) == 1
    assert rows[0]["betti"] == 2
    assert rows[0]["sigma_var"] == pytest.approx(0.5, abs=0.2)


def test_explicit_lengths_override_seed(dumbbell):
    lengths = [1.11, 1.52, 1.93]
    d = run_experiment(dumbbell, 60, lengths=lengths)
    assert d.graph.lengths == tuple(lengths)


def test_chain_families_classified():
    for c in (2, 4, 8):
        g = loop_chain(c)
        assert "tree-of-cycles" in g.topology.families
        assert g.topology.betti == c
