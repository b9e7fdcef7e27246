from dataclasses import replace

import numpy as np

from forwarding.certify import (
    check_dissipativity,
    check_gain_bound,
    check_observer,
    check_strictification,
    lyapunov_gram,
    random_states,
    verify_certificate,
)
from forwarding.design import evaluate_V


def test_fresh_certificate_verifies(small_system, small_solution, small_cert):
    reports = verify_certificate(small_cert, small_system, small_solution)
    assert [r.name for r in reports] == [
        "gain_bound", "observer_inequality", "certificate_dissipativity", "strict_decay"]
    assert all(r.passed for r in reports)


def test_gram_reproduces_V(small_system, small_solution, small_cert):
    G = lyapunov_gram(small_system, small_solution, small_cert.p)
    w = random_states(small_system, 20, seed=4)
    n = small_system.n
    v = evaluate_V(w[:, :n], w[:, n:], small_cert.p, small_solution, small_system.Q)
    assert np.allclose(np.einsum("ki,ij,kj->k", w, G, w), v, rtol=1e-12)


def test_random_states_deterministic(small_system):
    assert np.array_equal(random_states(small_system, 10, 7), random_states(small_system, 10, 7))


def test_gain_above_k_star_rejected(small_system, small_solution, small_cert):
    bad = replace(small_cert, k=1.5 * small_cert.k_star)
    rep = check_gain_bound(bad, small_system, small_solution)
    assert not rep.passed
    assert "a <= 0" in rep.witness["error"]


def test_tampered_constant_rejected(small_system, small_solution, small_cert):
    rep = check_gain_bound(replace(small_cert, b=2 * small_cert.b), small_system, small_solution)
    assert not rep.passed and not rep.witness["constants_match"]


def test_indefinite_pi_rejected(small_system, small_cert):
    bad = replace(small_cert, Pi=np.diag([1.0, -1.0]))
    assert not check_observer(bad, small_system).passed


def test_inflated_a_breaks_dissipativity(small_system, small_solution, small_cert):
    bad = replace(small_cert, a=50 * small_cert.a)
    rep = check_dissipativity(bad, small_system, small_solution, n_samples=200)
    assert not rep.passed and rep.witness["violations"] > 0


def test_oversized_c_rejected(small_system, small_solution, small_cert):
    bad = replace(small_cert, c=10 * small_cert.c)
    assert not check_strictification(bad, small_system, small_solution, n_samples=50).passed
