import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from povm_forge.bounds import (CertificatePreconditionError, antipodal_count_bound, certified_lower_bound,
                               certificate_generic, certificate_quadratic, certificate_quadratic_linear,
                               certificate_quartic, certificate_quartic_linear, certify,
                               equations, general_count_bound, n_min, optimal_slack,
                               quartic_product, unknowns, weight_cap)
from povm_forge.catalog import catalog_get
from povm_forge.geometry import random_directions, random_rotation
from povm_forge.povm import Povm
from povm_forge.solver import SolverConfig, solve
from povm_forge.verification import verify

CLOSED = {2: certificate_quadratic, 3: certificate_quadratic_linear,
          4: certificate_quartic, 5: certificate_quartic_linear}
CLOSED_SHAPE = {2: (1, False), 3: (1, True), 4: (2, False), 5: (2, True)}


def brute_general(N):
    n = 1
    while 3 * n - 3 < (N + 1) ** 2:
        n += 1
    return n


def brute_antipodal(N):
    h = N // 2
    eqs = sum(2 * q + 1 for q in range(0, 2 * h + 1, 2))
    n = 2
    while 3 * (n // 2) - 3 < eqs:
        n += 2
    return n


class TestCounting:
    def test_table_values(self):
        assert [n_min(N).n_min for N in range(2, 8)] == [4, 6, 10, 12, 18, 22]

    def test_antipodal_n2(self):
        cb = n_min(2)
        assert cb.antipodal_bound == 6 and cb.n_min == 4

    @pytest.mark.parametrize("N", range(1, 41))
    def test_brute_force_inequalities(self, N):
        assert general_count_bound(N) == brute_general(N)
        assert antipodal_count_bound(N) == brute_antipodal(N)
        assert n_min(N).n_min == min(brute_general(N), brute_antipodal(N))

    @pytest.mark.parametrize("N", range(1, 30))
    def test_degree_of_freedom_counts(self, N):
        cb = n_min(N)
        assert unknowns(cb.general_bound) >= equations(N)
        assert unknowns(cb.general_bound - 1) < equations(N)
        assert unknowns(cb.antipodal_bound, True) >= equations(N, True)
        assert unknowns(cb.antipodal_bound - 2, True) < equations(N, True)

    def test_equation_count_matches_tensor_components(self):
        # independent symmetric components of rank q minus the trace-linked ones: 2q+1 per rank
        from povm_forge.verification import tensor_residual_blocks
        p = catalog_get(5).povm
        assert equations(5) == 36
        assert sum(b.size for b in tensor_residual_blocks(p)) >= equations(5)

    def test_invalid(self):
        with pytest.raises(ValueError):
            n_min(0)

    def test_document(self):
        assert n_min(7).to_dict() == {"copies": 7, "general_bound": 23, "antipodal_bound": 22, "n_min": 22}


def sympy_slack(N, c, degree, linear):
    """Minimise the certificate form symbolically from the moment values."""
    def mom(q):
        m = (sp.Rational(N + 1, q + 1) if q % 2 == 0 else 0) - c
        if linear:
            m += (sp.Rational(N + 1, q + 2) if (q + 1) % 2 == 0 else 0) - c
        return m
    a = sp.symbols(f"a0:{degree}")
    coeffs = list(a) + [1]
    expr = sum(coeffs[i] * coeffs[j] * mom(i + j) for i in range(degree + 1) for j in range(degree + 1))
    sol = sp.solve([sp.diff(expr, v) for v in a], a, dict=True)[0]
    return sp.nsimplify(sp.simplify(expr.subs(sol))), [sol[v] for v in a]


class TestClosedForms:
    @pytest.mark.parametrize("N", [2, 3, 4, 5])
    @pytest.mark.parametrize("c", [Fraction(1, 10), Fraction(1, 3), Fraction(2, 5), Fraction(1, 2)])
    def test_against_sympy(self, N, c):
        degree, linear = CLOSED_SHAPE[N]
        exact, coeffs = sympy_slack(N, sp.Rational(c.numerator, c.denominator), degree, linear)
        cert_slack, cert_coeffs, degen = optimal_slack(N, float(c), degree, linear)
        assert not degen
        assert abs(cert_slack - float(exact)) < 1e-13
        np.testing.assert_allclose(cert_coeffs, [float(x) for x in coeffs], atol=1e-13)

    @pytest.mark.parametrize("N,expr", [
        (2, lambda c: (3 - 4 * c) / (3 - c)),
        (3, lambda c: sp.Rational(8, 9) * (2 - 3 * c) / (2 - c)),
        (4, lambda c: 4 * (5 - 9 * c) / (9 * (5 - 4 * c))),
        (5, lambda c: 8 * (1 - 2 * c) / (25 * (1 - c))),
    ])
    def test_symbolic_slack_formula(self, N, expr):
        c = sp.symbols("c")
        degree, linear = CLOSED_SHAPE[N]
        exact, _ = sympy_slack(N, c, degree, linear)
        assert sp.simplify(exact - expr(c)) == 0

    @pytest.mark.parametrize("N,cap", [(2, 3 / 4), (3, 2 / 3), (4, 5 / 9), (5, 1 / 2)])
    def test_caps(self, N, cap):
        degree, linear = CLOSED_SHAPE[N]
        assert abs(weight_cap(N, degree, linear) - cap) < 1e-12

    def test_n4_product_inequality_equivalent(self):
        for c in np.linspace(0.01, 1.2, 200):
            s, _, _ = optimal_slack(4, c, 2, False)
            if abs(c - 5 / 4) > 1e-3:
                assert (s >= 0) == (quartic_product(c) >= 0 and c < 5 / 4)


class TestCatalogCertificates:
    @pytest.mark.parametrize("N,cap,bound", [(2, 3 / 4, 4), (3, 2 / 3, 6), (5, 1 / 2, 12)])
    def test_saturation(self, N, cap, bound):
        cert = CLOSED[N](catalog_get(N).povm)
        assert np.abs(cert.slacks).max() < 1e-10
        assert np.abs(cert.direct_slacks).max() < 1e-10
        assert cert.weight_cap == pytest.approx(cap, abs=1e-15)
        assert cert.implied_n_bound == bound == catalog_get(N).povm.size
        assert abs(cert.sum_identity) < 1e-10

    def test_tetrahedron_b(self, tetrahedron):
        np.testing.assert_allclose(certificate_quadratic(tetrahedron).coefficients[:, 0], 1 / 3, atol=1e-15)

    def test_n4_strict(self):
        p = catalog_get(4).povm
        cert = certificate_quartic(p)
        assert cert.valid
        assert cert.slacks.max() > 1e-3
        assert sorted(set(np.round(p.weights, 12))) == [round(5 / 12, 12), round(25 / 48, 12)]
        assert all(quartic_product(c) > 0 for c in p.weights)
        assert cert.implied_n_bound == 10
        assert any("(5/9)(n - 9)" in note for note in cert.notes)
        assert cert.sum_identity == pytest.approx(5 / 9 * (10 - 9), abs=1e-12)

    def test_n4_equality_case_fails_verify(self, rng):
        assert quartic_product(5 / 9) == 0.0
        for _ in range(5):
            dirs = [d.cartesian for d in random_directions(rng, 9)]
            assert not verify(Povm.from_arrays(4, [5 / 9] * 9, dirs)).passed

    def test_direct_matches_form(self, entry):
        cert = certify(entry.povm)
        np.testing.assert_allclose(cert.direct_slacks, cert.slacks, atol=1e-10)

    @pytest.mark.parametrize("N", [2, 3, 4, 5])
    def test_generic_agrees(self, N):
        p = catalog_get(N).povm
        closed = CLOSED[N](p)
        degree, linear = CLOSED_SHAPE[N]
        gen = certificate_generic(p, degree, linear)
        np.testing.assert_allclose(gen.slacks, closed.slacks, atol=1e-10)
        np.testing.assert_allclose(gen.coefficients, closed.coefficients, atol=1e-10)
        assert abs(gen.weight_cap - closed.weight_cap) < 1e-10

    def test_generic_reproduces_quadratic(self, tetrahedron):
        gen = certificate_generic(tetrahedron, 1, False)
        np.testing.assert_allclose(gen.slacks, certificate_quadratic(tetrahedron).slacks, atol=1e-14)

    def test_n6_cubic(self):
        cert = certificate_generic(catalog_get(6).povm, 3, False)
        assert cert.ansatz == "cubic_generic"
        assert cert.slacks.min() >= -1e-9
        assert not cert.degenerate.any()
        assert abs(cert.weight_cap - 7 / 16) < 1e-12
        assert cert.implied_n_bound == 16

    def test_n7_cubic_linear(self):
        cert = certificate_generic(catalog_get(7).povm, 3, True)
        assert cert.slacks.min() >= -1e-9
        assert abs(cert.weight_cap - 2 / 5) < 1e-12
        assert cert.implied_n_bound == 20

    def test_n6_n7_closed_forms(self):
        for c in [0.1, 0.3, 0.4]:
            assert optimal_slack(6, c, 3, False)[0] == pytest.approx(4 * (7 - 16 * c) / (25 * (7 - 9 * c)), abs=1e-12)
            assert optimal_slack(7, c, 3, True)[0] == pytest.approx(
                128 * (2 - 5 * c) / (1225 * (2 - 3 * c)), abs=1e-12)

    def test_certified_lower_bounds(self):
        assert [certified_lower_bound(N) for N in range(1, 8)] == [3, 4, 6, 10, 12, 16, 20]

    def test_rotation_does_not_change_slacks(self, entry, rng):
        a = certify(entry.povm)
        b = certify(entry.povm.rotated(random_rotation(rng)))
        np.testing.assert_allclose(a.slacks, b.slacks, atol=1e-12)

    def test_document(self, octahedron):
        doc = certificate_quadratic_linear(octahedron).to_dict()
        assert doc["ansatz"] == "quadratic_with_linear_factor"
        assert doc["implied_n_bound"] == 6
        assert len(doc["outcomes"]) == 6 and "b" in doc["outcomes"][0]
        doc4 = certificate_quartic(catalog_get(4).povm).to_dict()
        assert "d" in doc4["outcomes"][0]


class TestPreconditions:
    def test_q2_violated(self, tetrahedron):
        v = tetrahedron.vectors.copy()
        v[:, 2] *= 0.9
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        with pytest.raises(CertificatePreconditionError) as exc:
            certificate_quadratic(Povm.from_arrays(2, tetrahedron.weights, v))
        assert 2 in exc.value.failed_orders
        assert "q=" in str(exc.value)

    def test_q1_violated(self, octahedron):
        w = octahedron.weights.copy()
        w[0], w[1] = 0.6, 0.4
        with pytest.raises(CertificatePreconditionError) as exc:
            certificate_quadratic_linear(Povm.from_arrays(3, w, octahedron.vectors))
        assert 1 in exc.value.failed_orders

    def test_q4_violated(self, rng):
        p = catalog_get(4).povm
        v = p.vectors + 1e-3 * rng.standard_normal(p.vectors.shape)
        with pytest.raises(CertificatePreconditionError) as exc:
            certificate_quartic(Povm.from_arrays(4, p.weights, v / np.linalg.norm(v, axis=1, keepdims=True)))
        assert exc.value.failed_orders

    def test_wrong_copies(self, tetrahedron, octahedron):
        with pytest.raises(CertificatePreconditionError):
            certificate_quartic_linear(tetrahedron)
        with pytest.raises(CertificatePreconditionError):
            certificate_quadratic(octahedron)

    def test_degree_too_high(self, tetrahedron):
        with pytest.raises(CertificatePreconditionError):
            certificate_generic(tetrahedron, 2, False)

    def test_unknown_ansatz(self, tetrahedron):
        with pytest.raises(ValueError):
            certify(tetrahedron, "bogus")


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([2, 3, 4, 5, 6, 7]), st.integers(0, 2 ** 32 - 1))
def test_manifest_non_negativity_under_rotation(copies, seed):
    p = catalog_get(copies).povm.rotated(random_rotation(np.random.default_rng(seed)))
    cert = certify(p, "auto") if copies <= 5 else certify(p, "cubic_generic", linear_factor=copies == 7)
    assert cert.slacks.min() >= -1e-10 or copies >= 6 and cert.slacks.min() >= -1e-9
    assert cert.direct_slacks.min() >= -1e-10


@pytest.fixture(scope="module")
def solved():
    out = {}
    for N, n in [(2, 5), (3, 7), (5, 13)]:
        res = solve(SolverConfig(N, n, seed=0, restarts=32))
        assert res.converged, (N, n, res.status)
        out[N] = res.povm
    return out


class TestSolverBuilt:
    def test_n2_n5(self, solved):
        cert = certificate_quadratic(solved[2])
        assert cert.slacks.min() >= -1e-10
        assert abs(cert.sum_identity - 3) < 1e-9

    def test_n3_n7(self, solved):
        cert = certificate_quadratic_linear(solved[3])
        assert cert.slacks.min() >= -1e-10
        assert abs(cert.sum_identity - 2) < 1e-9

    def test_n5_n13(self, solved):
        cert = certificate_quartic_linear(solved[5])
        assert cert.slacks.min() >= -1e-10
        assert abs(cert.sum_identity - 1) < 1e-9
