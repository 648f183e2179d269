import numpy as np
import pytest

from qgl.counts import counts
from qgl.errors import DegenerateHessian
from qgl.graphs import load_graph
from qgl.magnetic import (
    flux_edges,
    hessian_alpha,
    local_indices,
    magnetic_secular,
    morse_index,
    spanning_tree,
)
from qgl.secular import evaluate, inversion, reduce_torus
from qgl.spectrum import classify, eigenfunction_at, locate_spectrum

GRAPHS = ("lasso", "dumbbell", "mandarin3", "k4", "flower3", "chain4", "tree31_7")


def _generic_levels(graph, want):
    out = []
    for lv in locate_spectrum(graph, count=4 * want):
        if lv.multiplicity != 1 or lv.loop_dims:
            continue
        ep = eigenfunction_at(graph, lv.k, n=lv.n)
        flags = classify(graph, ep)
        if flags.generic and not flags.borderline:
            out.append(ep)
        if len(out) == want:
            break
    return out


# ---------------------------------------------------------------------------
# spanning trees and flux edges


def test_spanning_tree_canonical(k4):
    tree = spanning_tree(k4)
    assert len(tree) == k4.V - 1
    assert tree == (0, 1, 2)
    assert flux_edges(k4, tree) == (3, 4, 5)


def test_spanning_tree_skips_loops(dumbbell):
    tree = spanning_tree(dumbbell)
    assert tree == (2,)
    assert flux_edges(dumbbell) == (0, 1)


def test_flux_count_is_betti():
    for name in GRAPHS:
        g = load_graph(name)
        assert len(flux_edges(g)) == g.topology.betti


# ---------------------------------------------------------------------------
# magnetic secular function


def test_zero_flux_reduces_to_plain_secular(dumbbell):
    rng = np.random.default_rng(0)
    for _ in range(10):
        kappa = rng.uniform(0, 2 * np.pi, 3)
        plain = evaluate(dumbbell, kappa).F
        mag = magnetic_secular(dumbbell, kappa, np.zeros(2))
        assert mag == pytest.approx(plain, abs=1e-10 * max(1.0, abs(plain)))


def test_flux_is_two_pi_periodic(k4):
    kappa = np.array([0.3, 1.1, 2.0, 0.7, 1.9, 2.5])
    a = np.array([0.4, 1.2, 2.2])
    f1 = magnetic_secular(k4, kappa, a)
    f2 = magnetic_secular(k4, kappa, a + 2 * np.pi)
    assert f1 == pytest.approx(f2, abs=1e-9 * max(1.0, abs(f1)))


def test_wrong_flux_count_rejected(dumbbell):
    with pytest.raises(ValueError):
        magnetic_secular(dumbbell, np.zeros(3), np.zeros(1))


# ---------------------------------------------------------------------------
# Morse index helper


def test_morse_index_diagonal():
    assert morse_index(np.diag([-1.0, 2.0, -3.0])) == 2
    assert morse_index(np.diag([1.0, 2.0])) == 0
    assert morse_index(np.zeros((0, 0))) == 0


def test_morse_index_rejects_near_singular():
    with pytest.raises(DegenerateHessian):
        morse_index(np.diag([1.0, 1e-12]))


# ---------------------------------------------------------------------------
# the index theorem, numerically


@pytest.mark.parametrize("name", GRAPHS)
def test_magnetic_index_equals_nodal_surplus(name):
    g = load_graph(name)
    for ep in _generic_levels(g, 10):
        rec = counts(g, ep)
        frame = hessian_alpha(g, ep.kappa)
        assert frame.sigma_magnetic == rec.sigma, (name, ep.n)
        iota = local_indices(frame)
        assert sum(iota) == frame.sigma_magnetic
        assert all(0 <= i_j <= b for i_j, b in
                   zip(iota, [len(grp) for grp in frame.block_fluxes]))


def test_local_indices_one_per_cycle_block(dumbbell):
    ep = _generic_levels(dumbbell, 3)[-1]
    frame = hessian_alpha(dumbbell, ep.kappa)
    assert len(frame.block_fluxes) == 2
    assert all(len(grp) == 1 for grp in frame.block_fluxes)
    assert all(i_j in (0, 1) for i_j in local_indices(frame))


def test_hessian_off_block_is_small(dumbbell):
    ep = _generic_levels(dumbbell, 1)[0]
    frame = hessian_alpha(dumbbell, ep.kappa)
    assert frame.off_block_residual < 1e-6


def test_tree_has_no_fluxes(tree31):
    ep = _generic_levels(tree31, 1)[0]
    frame = hessian_alpha(tree31, ep.kappa)
    assert frame.fluxes == ()
    assert frame.sigma_magnetic == 0
    assert local_indices(frame) == []


def test_index_invariant_under_tree_choice(k4):
    for ep in _generic_levels(k4, 4):
        a = hessian_alpha(k4, ep.kappa)
        b = hessian_alpha(k4, ep.kappa, tree=spanning_tree(k4, maximize=True))
        assert a.sigma_magnetic == b.sigma_magnetic


def test_stability_matrix_flips_under_inversion(dumbbell):
    # the inverted point lies on the zero set as well, with p of opposite
    # sign and the same Hessian, so the stability matrix changes sign
    for ep in _generic_levels(dumbbell, 3):
        frame = hessian_alpha(dumbbell, ep.kappa)
        kappa_inv = reduce_torus(inversion(ep.kappa))
        frame_inv = hessian_alpha(dumbbell, kappa_inv)
        assert np.allclose(frame.stability_matrix(),
                           -frame_inv.stability_matrix(),
                           atol=1e-4 * max(1.0, np.abs(frame.stability_matrix()).max()))
        assert frame.sigma_magnetic + frame_inv.sigma_magnetic == len(frame.fluxes)
