import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_reduced_spectrum
from xxzstrip.entanglement import (
    ReducedState,
    entropy_renyi,
    entropy_vn,
    family_norms,
    prop42_check,
    reduce,
    subspace_ee_sup_estimate,
    trace_power,
)
from xxzstrip.lattice import Configuration, build_strip, enumerate_sector
from xxzstrip.spectral import build_hamiltonian, droplet_projector, eigensolve


def basis_vector(sector, X):
    psi = np.zeros(len(sector))
    psi[sector.position(Configuration.of(X))] = 1.0
    return psi


def diag_state(p):
    return ReducedState("test", {0: np.diag(np.asarray(p, dtype=float))}, {0: list(range(len(p)))})


@pytest.fixture(scope="module")
def small_droplets():
    g = build_strip(2, 1)
    sp = eigensolve(build_hamiltonian(g, 4.0, None, 2))
    return droplet_projector(sp, 0.5)


def test_product_state_has_zero_entropy():
    sec = enumerate_sector(build_strip(2, 1), 2)
    rho = reduce(basis_vector(sec, [(1, 1), (3, 1)]), sec)
    assert entropy_vn(rho) == 0.0
    assert rho.trace == 1.0
    ev = rho.eigenvalues()
    assert sorted(ev[ev > 0]) == [1.0]
    for a in (0.3, 0.5, 0.7):
        assert entropy_renyi(rho, a) == 0.0


def test_bell_pair_has_log2():
    sec = enumerate_sector(build_strip(2, 1), 2)
    psi = (basis_vector(sec, [(1, 1), (3, 1)]) + basis_vector(sec, [(2, 1), (4, 1)])) / math.sqrt(2)
    for side in ("complement", "left"):
        rho = reduce(psi, sec, side)
        assert entropy_vn(rho) == pytest.approx(math.log(2), abs=1e-12)
        assert entropy_renyi(rho, 0.5) == pytest.approx(math.log(2), abs=1e-12)


def test_entropy_of_flat_spectra():
    assert entropy_vn(diag_state([1.0])) == 0.0
    assert entropy_vn(diag_state([0.5, 0.5])) == pytest.approx(math.log(2), abs=1e-15)
    assert entropy_vn(diag_state([0.25] * 4)) == pytest.approx(math.log(4), abs=1e-15)
    assert entropy_vn(diag_state([1.0, 1e-16])) == 0.0
    assert trace_power(diag_state([0.5, 0.5]), 0.5) == pytest.approx(math.sqrt(2))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=12).filter(lambda x: sum(x) > 1e-3),
       st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]))
def test_vn_below_renyi(weights, alpha):
    p = np.asarray(weights) / sum(weights)
    rho = diag_state(p)
    assert entropy_vn(rho) <= entropy_renyi(rho, alpha) + 1e-12
    assert entropy_vn(rho) <= math.log(np.count_nonzero(p > 1e-14)) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([(2, 1, 2), (3, 1, 3), (2, 2, 4), (2, 2, 3)]))
def test_random_state_invariants(seed, shape):
    ell, M, N = shape
    g = build_strip(ell, M)
    sec = enumerate_sector(g, N)
    psi = np.random.default_rng(seed).standard_normal(len(sec))
    psi /= np.linalg.norm(psi)
    right = reduce(psi, sec, "complement")
    left = reduce(psi, sec, "left")
    for rho in (right, left):
        assert abs(rho.trace - 1) <= 1e-10
        assert rho.min_eigenvalue() >= -1e-10
    assert entropy_vn(right) == pytest.approx(entropy_vn(left), abs=1e-9)
    ref = dense_reduced_spectrum(psi, sec.configs, g.left_block)
    ref = ref[ref > 1e-14]
    assert entropy_vn(left) == pytest.approx(float(-np.sum(ref * np.log(ref))), abs=1e-10)
    for a in (0.3, 0.5, 0.7):
        assert entropy_vn(right) <= entropy_renyi(right, a) + 1e-12


def test_reduce_validation():
    sec = enumerate_sector(build_strip(1, 1), 1)
    with pytest.raises(ValueError):
        reduce(np.array([1.0, 1.0]), sec)
    with pytest.raises(ValueError):
        reduce(np.array([1.0]), sec)
    with pytest.raises(ValueError):
        reduce(np.array([1.0, 0.0]), sec, side="middle")
    with pytest.raises(ValueError):
        entropy_renyi(diag_state([1.0]), 1.0)


def test_droplet_eigenvectors_two_sided(small_droplets):
    Q = small_droplets
    for i in range(Q.rank):
        psi = Q.columns[:, i]
        assert entropy_vn(reduce(psi, Q.sector)) == pytest.approx(
            entropy_vn(reduce(psi, Q.sector, "left")), abs=1e-9
        )


def test_family_norms_sum_to_one(small_droplets):
    psi = small_droplets.columns[:, 0]
    norms = family_norms(psi, small_droplets.sector)
    total = sum(n * n for d in norms.values() for n in d.values())
    assert total == pytest.approx(1.0, abs=1e-12)
    right = small_droplets.sector.geometry.right_block
    assert all(X.siteset <= right and len(X) == j for j, d in norms.items() for X in d)


def test_trace_estimate_on_droplet_eigenvectors(small_droplets):
    Q = small_droplets
    assert Q.rank >= 1
    for i in range(Q.rank):
        for alpha in (0.3, 0.5, 0.7):
            res = prop42_check(Q.columns[:, i], Q, alpha)
            assert res.passed
            assert res.lhs == pytest.approx(trace_power(reduce(Q.columns[:, i], Q.sector), alpha))


def test_trace_estimate_rejects_vectors_outside_subspace(small_droplets):
    psi = np.zeros(len(small_droplets.sector))
    psi[0] = 1.0
    if not small_droplets.contains(psi):
        with pytest.raises(ValueError):
            prop42_check(psi, small_droplets, 0.5)


def test_trace_estimate_product_state_in_full_space():
    sp = eigensolve(build_hamiltonian(build_strip(2, 1), 4.0, None, 2))
    Q = droplet_projector(sp, 0.5, interval=(-1.0, 100.0))
    psi = basis_vector(Q.sector, [(1, 1), (2, 1)])
    res = prop42_check(psi, Q, 0.5)
    assert res.lhs == pytest.approx(1.0) and res.rhs == 6.0 and res.passed


def test_sup_estimate(small_droplets):
    Q = small_droplets
    eig_best = max(entropy_vn(reduce(Q.columns[:, i], Q.sector)) for i in range(Q.rank))
    est, arg = subspace_ee_sup_estimate(Q, 10, seed=3)
    assert est >= eig_best - 1e-15
    assert (est, arg) == subspace_ee_sup_estimate(Q, 10, seed=3)
    est0, arg0 = subspace_ee_sup_estimate(Q, 0, seed=None)
    assert est0 == pytest.approx(eig_best) and arg0.startswith("eigenvector:")


def test_sup_estimate_rank_one():
    sp = eigensolve(build_hamiltonian(build_strip(2, 1), 4.0, None, 2))
    Q = droplet_projector(sp, 0.5, interval=(sp.eigenvalues[0] - 1e-9, sp.eigenvalues[0] + 1e-9))
    assert Q.rank == 1
    est, _ = subspace_ee_sup_estimate(Q, 5, seed=0)
    assert est == pytest.approx(entropy_vn(reduce(Q.columns[:, 0], Q.sector)), abs=1e-12)


def test_sup_estimate_rank_zero():
    sp = eigensolve(build_hamiltonian(build_strip(2, 1), 4.0, None, 2))
    with pytest.raises(ValueError):
        subspace_ee_sup_estimate(droplet_projector(sp, 2.5), 5, seed=0)
