import itertools
import json
import math

import mpmath
import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from dictphase import certify
from dictphase.errors import BudgetExceeded, DomainError, PreconditionError
from dictphase.frames import analyze, l1_norm, make_identity_frame, make_random_tight_frame
from dictphase.measure import gaussian_ensemble
from dictphase.solver import distance_mod_sign, oracle_sign_enumeration


def scaled_gaussian(m, n, seed):
    return gaussian_ensemble(m, n, seed).matrix / math.sqrt(m)


def drip_generalized_eig(A, D, k):
    """Independent route: generalized eigenproblem (D_S^T A^T A D_S, D_S^T D_S) per support."""
    lo, hi = np.inf, -np.inf
    for S in itertools.combinations(range(D.shape[1]), k):
        DS = D[:, S]
        G = DS.T @ DS
        if np.linalg.matrix_rank(G) < k:
            continue
        ev = scipy.linalg.eigh((A @ DS).T @ (A @ DS), G, eigvals_only=True)
        lo, hi = min(lo, ev[0]), max(hi, ev[-1])
    return max(1 - lo, hi - 1)


# -- DRIP -------------------------------------------------------------------------

def test_drip_examples():
    Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((5, 5)))
    for k in (1, 2, 5):
        assert certify.drip_exact(Q, make_identity_frame(5), k).delta == pytest.approx(0, abs=1e-12)
    assert certify.drip_exact(2 * np.eye(3), make_identity_frame(3), 2).delta == pytest.approx(3.0)


def test_drip_classical_rip_brute_force():
    rng = np.random.default_rng(1)
    for trial in range(12):
        n = int(rng.integers(2, 9))
        k = int(rng.integers(1, min(3, n) + 1))
        A = rng.standard_normal((int(rng.integers(n, 2 * n)), n)) / 3
        ref = 0.0
        for S in itertools.combinations(range(n), k):
            ev = np.linalg.eigvalsh(A[:, S].T @ A[:, S])
            ref = max(ref, 1 - ev[0], ev[-1] - 1)
        assert certify.drip_exact(A, make_identity_frame(n), k).delta == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_drip_redundant_frame_generalized_eig(seed):
    F = make_random_tight_frame(4, 7, seed)
    A = scaled_gaussian(12, 4, seed)
    for k in (1, 2, 3):
        assert certify.drip_exact(A, F, k).delta == pytest.approx(
            drip_generalized_eig(A, F.matrix, k), abs=1e-10)


def test_drip_montecarlo_lower_bound():
    A = np.random.default_rng(2).standard_normal((6, 4))
    F = make_random_tight_frame(4, 6, 2)
    ex = certify.drip_exact(A, F, 1)
    mc = certify.drip_montecarlo(A, F, 1, 10_000, 7)
    assert mc.delta <= ex.delta + 1e-12
    assert ex.delta - mc.delta <= 1e-9
    assert mc.method.startswith("montecarlo")


def test_drip_monotone_in_k():
    F = make_random_tight_frame(4, 6, 3)
    A = scaled_gaussian(10, 4, 3)
    d = [certify.drip_exact(A, F, k).delta for k in range(1, 5)]
    assert all(a <= b + 1e-12 for a, b in zip(d, d[1:]))


def test_drip_budget():
    with pytest.raises(BudgetExceeded):
        certify.drip_exact(np.eye(4), make_random_tight_frame(4, 30, 0), 4, budget=100)


# -- S-DRIP -----------------------------------------------------------------------

def sdrip_naive(A, D, k):
    """All subsets |I| >= m/2, every support, via generalized eigenvalues."""
    m = A.shape[0]
    lo = np.inf
    hi = -np.inf
    for size in range(math.ceil(m / 2), m + 1):
        for I in itertools.combinations(range(m), size):
            AI = A[list(I)]
            for S in itertools.combinations(range(D.shape[1]), k):
                DS = D[:, S]
                B = scipy.linalg.orth(DS)
                ev = np.linalg.eigvalsh((AI @ B).T @ (AI @ B))
                lo = min(lo, ev[0])
                hi = max(hi, ev[-1])
    return lo, hi


def test_sdrip_identity_fails():
    r = certify.sdrip_exact(np.eye(4), make_identity_frame(4), 1)
    assert r.theta_minus == pytest.approx(0.0, abs=1e-12)
    assert r.satisfied is False and r.witness_subset is not None


def test_sdrip_duplicated_orthogonal():
    G, _ = np.linalg.qr(np.random.default_rng(4).standard_normal((3, 3)))
    A = np.vstack([G, G])
    r = certify.sdrip_exact(A, make_identity_frame(3), 1)
    # the full stack doubles energy; one copy of G alone is an isometry
    assert r.theta_plus == pytest.approx(2.0, abs=1e-12)
    one_copy = np.linalg.eigvalsh(G.T @ G)
    assert one_copy == pytest.approx(np.ones(3))
    assert r.theta_minus <= 1.0
    assert r.satisfied is False


def test_sdrip_gaussian_positive():
    A = scaled_gaussian(10, 4, 0)
    r = certify.sdrip_exact(A, make_random_tight_frame(4, 6, 0), 1)
    assert r.theta_minus > 0
    assert r.subsets_checked == 252


@pytest.mark.parametrize("seed", range(3))
def test_sdrip_matches_naive_small(seed):
    A = scaled_gaussian(6, 3, seed)
    F = make_random_tight_frame(3, 5, seed)
    r = certify.sdrip_exact(A, F, 2)
    lo, hi = sdrip_naive(A, F.matrix, 2)
    assert r.theta_minus == pytest.approx(lo, abs=1e-10)
    assert r.theta_plus == pytest.approx(hi, abs=1e-10)


def test_sdrip_envelope_widens_in_k():
    A = scaled_gaussian(8, 4, 1)
    F = make_random_tight_frame(4, 6, 1)
    reps = [certify.sdrip_exact(A, F, k) for k in (1, 2, 3)]
    for a, b in zip(reps, reps[1:]):
        assert b.theta_minus <= a.theta_minus + 1e-12
        assert b.theta_plus >= a.theta_plus - 1e-12


def test_subset_energy_monotone():
    rng = np.random.default_rng(9)
    A = rng.standard_normal((8, 4))
    for _ in range(100):
        J = rng.permutation(8)[: rng.integers(1, 9)]
        I = J[: rng.integers(0, J.size + 1)]
        x = rng.standard_normal(4)
        assert np.linalg.norm(A[I] @ x) <= np.linalg.norm(A[J] @ x) + 1e-12


def test_sdrip_montecarlo_contract():
    A = scaled_gaussian(8, 3, 2)
    F = make_random_tight_frame(3, 5, 2)
    r1 = certify.sdrip_montecarlo(A, F, 1, 200, 5)
    r2 = certify.sdrip_montecarlo(A, F, 1, 200, 5)
    assert r1.to_json() == r2.to_json()
    ex = certify.sdrip_exact(A, F, 1)
    assert ex.theta_minus - 1e-12 <= r1.theta_minus
    assert r1.theta_plus <= ex.theta_plus + 1e-12
    empty = certify.sdrip_montecarlo(A, F, 1, 0, 5)
    assert empty.satisfied is None and math.isnan(empty.theta_minus)


def test_reports_serialize():
    A = scaled_gaussian(6, 3, 0)
    F = make_random_tight_frame(3, 4, 0)
    for rep in (certify.drip_exact(A, F, 1), certify.sdrip_exact(A, F, 1)):
        d = json.loads(rep.to_json())
        assert d["method"] and "generator_version" in d


# -- constants --------------------------------------------------------------------

def constants_mp(delta, t):
    mpmath.mp.dps = 50
    d, t = mpmath.mpf(delta), mpmath.mpf(t)
    cap = mpmath.sqrt((t - 1) / t)
    c1 = mpmath.sqrt(2 * (1 + d)) / (1 - mpmath.sqrt(t / (t - 1)) * d)
    c2 = (mpmath.sqrt(2) * d + mpmath.sqrt(t * (cap - d) * d)) / (t * (cap - d)) + 1
    return float(c1), float(c2)


def test_constants_examples():
    c = certify.stability_constants(0.0, 2.0)
    assert abs(c.c1 - math.sqrt(2)) <= 1e-15 and abs(c.c2 - 1.0) <= 1e-15
    c = certify.stability_constants(0.2, 2.0)
    # frozen from the 50-digit evaluation
    assert c.c1 == pytest.approx(2.160186287485978, rel=1e-14)
    assert c.c2 == pytest.approx(1.72294768117675, rel=1e-14)
    assert (round(c.c1, 4), round(c.c2, 4)) == (2.1602, 1.7229)


@given(st.floats(1.01, 50), st.floats(0, 0.999))
def test_constants_match_mpmath(t, frac):
    delta = frac * certify.delta_ceiling(t)
    c = certify.stability_constants(delta, t)
    r1, r2 = constants_mp(delta, t)
    assert c.c1 == pytest.approx(r1, rel=1e-9)
    assert c.c2 == pytest.approx(r2, rel=1e-9)
    assert c.c2 >= 1 and math.isfinite(c.c1)


@pytest.mark.parametrize("t", [1.5, 2.0, 4.0])
def test_constants_increase_in_delta(t):
    grid = np.linspace(0, certify.delta_ceiling(t), 102)[1:-1]
    cs = [certify.stability_constants(d, t) for d in grid]
    assert all(b.c1 > a.c1 and b.c2 > a.c2 for a, b in zip(cs, cs[1:]))
    assert cs[-1].c1 > 50 * cs[0].c1


def test_constants_domain():
    with pytest.raises(DomainError):
        certify.stability_constants(0.8, 2.0)
    with pytest.raises(DomainError):
        certify.stability_constants(0.1, 1.0)
    with pytest.raises(DomainError):
        certify.stability_constants(-0.1, 2.0)


def test_admissible_t_examples():
    assert certify.admissible_t(1.0, 1.0) == 1.0
    assert certify.admissible_t(0.5, 1.5) == pytest.approx(4 / 3, abs=1e-15)
    for th in (0.1, 0.4, 0.9):
        assert certify.admissible_t(th, 2 - th) == pytest.approx(1 / (2 * th - th * th))
    with pytest.raises(DomainError):
        certify.admissible_t(0.0, 1.0)


def test_error_bound_examples():
    c = certify.stability_constants(0.2, 2.0)
    assert certify.error_bound(c, 0.0, 0.0, 3) == 0.0
    assert certify.error_bound(c, 0.1, 0.05, 4) == pytest.approx(0.3021660128074353, rel=1e-14)
    assert certify.error_bound(c, 0.1, 0.05, 4) == pytest.approx(0.30217, abs=1e-5)
    b1, b2 = certify.error_bound(c, 1.0, 0.2, 2), certify.error_bound(c, 2.0, 0.2, 2)
    assert b2 - b1 == pytest.approx(c.c1)


# -- real NSP ---------------------------------------------------------------------

def test_nsp_to_failure_examples():
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    u = np.zeros(2)
    v = np.array([1.0, 0.0])
    with pytest.raises(PreconditionError):
        certify.nsp_real_counterexample_to_failure(A, np.array([1.0, 1.0]), v)
    x0, xt = certify.nsp_real_counterexample_to_failure(np.array([[0.0, 1.0]]), u, v)
    assert np.array_equal(xt, -x0)


def test_nsp_to_failure_random_null_bases():
    rng = np.random.default_rng(3)
    for _ in range(50):
        m, n = int(rng.integers(2, 7)), int(rng.integers(2, 6))
        A = rng.standard_normal((m, n))
        mask = rng.random(m) < 0.5
        NT = scipy.linalg.null_space(A[mask]) if mask.any() else np.eye(n)
        NC = scipy.linalg.null_space(A[~mask]) if (~mask).any() else np.eye(n)
        if NT.shape[1] == 0 or NC.shape[1] == 0:
            continue
        u = NT @ rng.standard_normal(NT.shape[1])
        v = NC @ rng.standard_normal(NC.shape[1])
        x0, xt = certify.nsp_real_counterexample_to_failure(A, u, v)
        assert np.max(np.abs(np.abs(A @ x0) - np.abs(A @ xt))) <= 1e-9


def test_nsp_scalar_case_holds():
    r = certify.nsp_real_check(np.array([[2.0]]), make_identity_frame(1), 1)
    assert r.status == "holds-on-tested-family"


def test_nsp_single_row_counterexample():
    A = np.array([[1.0, 2.0]])
    F = make_identity_frame(2)
    r = certify.nsp_real_check(A, F, 1)
    assert r.status == "counterexample"
    w = r.witness
    x0, xt = w["x0"], w["x_tilde"]
    assert np.max(np.abs(np.abs(A @ x0) - np.abs(A @ xt))) <= 1e-9
    assert l1_norm(analyze(F, xt)) <= l1_norm(analyze(F, x0)) + 1e-9
    assert distance_mod_sign(x0, xt) > 1e-6
    assert w["oracle_confirmed"]


def test_nsp_witnesses_reverify():
    rng = np.random.default_rng(0)
    seen = 0
    for seed in range(15):
        m, n = int(rng.integers(1, 5)), int(rng.integers(2, 4))
        A = rng.standard_normal((m, n))
        F = make_random_tight_frame(n, n + 1, seed)
        r = certify.nsp_real_check(A, F, 1, seed=seed)
        if r.status != "counterexample":
            continue
        seen += 1
        x0, xt = certify.nsp_real_counterexample_to_failure(A, r.witness["u"], r.witness["v"])
        assert np.max(np.abs(np.abs(A @ x0) - np.abs(A @ xt))) <= 1e-9
        assert l1_norm(analyze(F, xt)) <= l1_norm(analyze(F, x0)) + 1e-9
    assert seen > 0


def test_nsp_exact_holds_matches_oracle():
    A = gaussian_ensemble(5, 3, 1).matrix
    F = make_random_tight_frame(3, 4, 1)
    r = certify.nsp_real_check(A, F, 1)
    assert r.status == "holds-on-tested-family" and r.exact
    rng = np.random.default_rng(2)
    for _ in range(30):
        z = np.zeros(4)
        z[rng.integers(4)] = rng.standard_normal()
        x0 = F.matrix @ z
        o = oracle_sign_enumeration(A, np.abs(A @ x0), F)
        assert distance_mod_sign(o.estimate, x0) <= 1e-6 * max(1, np.linalg.norm(x0))


# -- complex NSP ------------------------------------------------------------------

def _single_row_tuple(rng):
    a = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    A = a[None, :]
    eta1 = np.array([-a[1], a[0]])          # spans N(a)
    return A, eta1


def test_complex_tuple_zero_eta_is_witness():
    rng = np.random.default_rng(0)
    A, eta1 = _single_row_tuple(rng)
    F = make_identity_frame(2)
    ok = certify.nsp_complex_check_tuple(F, [[0], []], [eta1, np.zeros(2)], [1, -1], A)
    assert ok is False


def test_complex_tuple_phase_invariance():
    rng = np.random.default_rng(1)
    A, eta1 = _single_row_tuple(rng)
    F = make_identity_frame(2)
    eta2 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    base = certify.nsp_complex_check_tuple(F, [[0], []], [eta1, eta2], [1, -1], A)
    w = np.exp(0.7j)
    rot = certify.nsp_complex_check_tuple(F, [[0], []], [w * eta1, w * eta2], [1, -1], A)
    assert base == rot


def test_complex_tuple_failure_pair():
    rng = np.random.default_rng(2)
    A, eta1 = _single_row_tuple(rng)
    F = make_identity_frame(2)
    eta2 = -0.5 * eta1 + 0.01 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    eta, c = [eta1, eta2], [1.0, -1.0]
    assert certify.nsp_complex_check_tuple(F, [[0], []], eta, c, A) is False
    x0, xt = certify.nsp_complex_tuple_to_failure(eta, c, 0, 1)
    assert np.max(np.abs(np.abs(A @ x0) - np.abs(A @ xt))) <= 1e-9


def test_complex_tuple_preconditions():
    A, eta1 = _single_row_tuple(np.random.default_rng(3))
    F = make_identity_frame(2)
    with pytest.raises(PreconditionError) as e:
        certify.nsp_complex_check_tuple(F, [[0]], [eta1, eta1], [1, -1], A)
    assert e.value.clause == "lengths"
    with pytest.raises(PreconditionError) as e:
        certify.nsp_complex_check_tuple(F, [[0], []], [eta1, eta1], [1, 0.5], A)
    assert e.value.clause == "unimodular"
    with pytest.raises(PreconditionError) as e:
        certify.nsp_complex_check_tuple(F, [[0], []], [np.ones(2), eta1], [1, -1], A)
    assert e.value.clause == "null-space"
