import numpy as np
import pytest

from enhq import (
    DomainError,
    HydrogenParams,
    NumericalFailure,
    build_fock_rep,
    build_spin_rep,
    canonical_family,
    classical_limit,
    classical_value,
    enhance,
    fiducial_p2_closed,
    hydrogen_enhanced,
    parse_polynomial,
    poly_expectation,
    shift_identity_check,
    spin_family,
)
from enhq.correspondence import EnhancedHamiltonian, OperatorPolynomial


class TestParser:
    def test_oscillator_expression(self):
        poly = parse_polynomial("0.5*P^2 + 0.5*Q^2", "canonical")
        assert dict(poly.terms) == {("P", "P"): 0.5, ("Q", "Q"): 0.5}

    def test_word_order_preserved(self):
        poly = parse_polynomial("P*Q*P", "canonical")
        assert poly.terms == ((("P", "Q", "P"), 1.0),)

    def test_coefficients_merge(self):
        poly = parse_polynomial("Q + 2*Q", "canonical")
        assert dict(poly.terms) == {("Q",): 3.0}

    def test_signs_and_scientific_notation(self):
        poly = parse_polynomial("-1.5e-1*Q^2 + Q*Q", "canonical")
        assert dict(poly.terms) == {("Q", "Q"): pytest.approx(0.85)}

    def test_negative_power_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            parse_polynomial("D*Q^-1", "affine")

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError, match="Hermitian"):
            parse_polynomial("P*Q", "canonical")

    def test_symmetrized_pair_accepted(self):
        poly = parse_polynomial("P*Q + Q*P", "canonical")
        assert len(poly.terms) == 2

    def test_letter_outside_alphabet(self):
        with pytest.raises(ValueError, match="variable set"):
            parse_polynomial("S1", "canonical")
        with pytest.raises(ValueError, match="variable set"):
            parse_polynomial("P", "spin")

    def test_degree_cap(self):
        with pytest.raises(ValueError, match="degree"):
            parse_polynomial("Q^7", "canonical")
        parse_polynomial("Q^8", "canonical", max_degree=8)

    def test_garbage_rejected(self):
        for bad in ("", "Q +", "* Q", "Q Q", "0.5 / Q"):
            with pytest.raises(ValueError):
                parse_polynomial(bad, "canonical")

    def test_classical_value(self):
        poly = parse_polynomial("0.5*P^2 + 0.5*Q^2", "canonical")
        assert classical_value(poly, 1.0, 2.0) == pytest.approx(2.5)
        affine = parse_polynomial("D^2", "affine")
        assert classical_value(affine, 2.0, 3.0) == pytest.approx(36.0)


class TestEnhanceCanonical:
    def test_oscillator_gains_half_hbar(self, canonical200):
        poly = parse_polynomial("0.5*P^2 + 0.5*Q^2", "canonical")
        ham = enhance(poly, canonical200)
        for p, q in [(1.0, 1.0), (0.0, 0.0), (-0.7, 0.4)]:
            assert ham(p, q) == pytest.approx(0.5 * (p * p + q * q) + 0.5, abs=1e-12)

    def test_oscillator_hbar_scaling(self):
        family = canonical_family(build_fock_rep(16, hbar=0.25))
        ham = enhance(parse_polynomial("0.5*P^2 + 0.5*Q^2", "canonical"), family)
        assert ham(1.0, 1.0) == pytest.approx(1.0 + 0.125, abs=1e-12)

    def test_cached_route_matches_direct_expectation(self, canonical200):
        poly = parse_polynomial("P*Q*Q*P + Q^3 + 0.25*P^4", "canonical")
        ham = enhance(poly, canonical200)
        for p, q in [(0.5, 1.0), (-1.0, 0.3)]:
            direct = poly_expectation(poly, canonical200, p, q)
            assert abs(direct.imag) < 1e-10
            assert ham(p, q) == pytest.approx(direct.real, abs=1e-8)

    def test_polynomial_coefficients_exposed(self, canonical200):
        ham = enhance(parse_polynomial("0.5*P^2 + 0.5*Q^2", "canonical"), canonical200)
        assert ham.polynomial[(2, 0)] == pytest.approx(0.5)
        assert ham.polynomial[(0, 2)] == pytest.approx(0.5)
        assert ham.polynomial[(0, 0)] == pytest.approx(0.5)

    def test_gradient_matches_finite_differences(self, canonical200):
        ham = enhance(parse_polynomial("P*Q*Q*P + Q^4", "canonical"), canonical200)
        for p, q in [(0.8, -0.6), (1.2, 0.5)]:
            gp, gq = ham.gradient(p, q)
            h = 1e-5
            fd_p = (ham(p + h, q) - ham(p - h, q)) / (2 * h)
            fd_q = (ham(p, q + h) - ham(p, q - h)) / (2 * h)
            assert gp == pytest.approx(fd_p, rel=1e-6, abs=1e-8)
            assert gq == pytest.approx(fd_q, rel=1e-6, abs=1e-8)

    def test_linearity(self, canonical200):
        a = parse_polynomial("P^2", "canonical")
        b = parse_polynomial("Q^2", "canonical")
        combo = parse_polynomial("2*P^2 + 3*Q^2", "canonical")
        ha, hb, hc = (enhance(x, canonical200) for x in (a, b, combo))
        for p, q in [(0.3, 0.9), (-1.1, 0.2)]:
            assert hc(p, q) == pytest.approx(2 * ha(p, q) + 3 * hb(p, q), rel=1e-13)

    def test_reality_of_hermitian_expectations(self, canonical200):
        rng = np.random.default_rng(3)
        poly = parse_polynomial("P*Q*P + 0.5*Q*P*Q", "canonical")
        for p, q in rng.uniform(-1.5, 1.5, size=(6, 2)):
            val = poly_expectation(poly, canonical200, p, q)
            assert abs(val.imag) < 1e-10

    def test_moment_route_needs_room_above_the_degree(self):
        small = canonical_family(build_fock_rep(3))
        with pytest.raises(ValueError, match="dim"):
            enhance(parse_polynomial("Q^4", "canonical"), small)
        enhance(parse_polynomial("Q^4", "canonical"), canonical_family(build_fock_rep(5)))


class TestEnhanceAffine:
    def test_position_is_linear_in_q(self, affine_beta2):
        ham = enhance(parse_polynomial("Q", "affine"), affine_beta2)
        for q in (0.5, 1.0, 2.5):
            assert ham(0.3, q) == pytest.approx(q, rel=1e-10)

    def test_dilation_word(self, affine_beta2):
        # <p,q| D |p,q> = <beta| D + p q Q |beta> = p q
        ham = enhance(parse_polynomial("D", "affine"), affine_beta2)
        assert ham(0.7, 1.3) == pytest.approx(0.7 * 1.3, abs=1e-9)

    def test_q_squared_carries_width_correction(self, affine_beta2):
        ham = enhance(parse_polynomial("Q^2", "affine"), affine_beta2)
        q = 1.4
        assert ham(0.0, q) == pytest.approx(q * q * (1 + 1.0 / 4.0), rel=1e-9)

    def test_momentum_word_direct_route(self, affine_beta2):
        ham = enhance(parse_polynomial("P^2", "affine"), affine_beta2)
        c2 = fiducial_p2_closed(2.0, 1.0)
        for p, q in [(0.0, 1.0), (0.6, 1.8)]:
            assert ham(p, q) == pytest.approx(p * p + c2 / (q * q), rel=1e-4)

    def test_momentum_word_requires_wide_fiducial(self, halfline4000):
        from enhq import affine_family

        narrow = affine_family(halfline4000, 1.5)
        with pytest.raises(DomainError, match="momentum letters"):
            enhance(parse_polynomial("P^4", "affine"), narrow)

    def test_domain_flag_set(self, affine_beta2):
        ham = enhance(parse_polynomial("Q", "affine"), affine_beta2)
        assert ham.q_positive


class TestEnhanceSpin:
    def test_s3_restricts_to_linear_momentum(self):
        rep = build_spin_rep(2.0)
        family = spin_family(rep)
        ham = enhance(parse_polynomial("S3", "spin"), family)
        sq = np.sqrt(2.0)
        for p, q in [(0.0, 0.0), (0.5, 0.3), (-1.0, -0.4)]:
            assert ham(p, q) == pytest.approx(sq * p, abs=1e-12)

    def test_casimir_is_constant(self):
        rep = build_spin_rep(1.5)
        family = spin_family(rep)
        ham = enhance(parse_polynomial("S1^2 + S2^2 + S3^2", "spin"), family)
        assert ham(0.2, 0.5) == pytest.approx(1.5 * 2.5, abs=1e-12)

    def test_incompatible_pairing_rejected(self, canonical200):
        with pytest.raises(ValueError, match="incompatible"):
            enhance(parse_polynomial("S3", "spin"), canonical200)


class TestShiftIdentity:
    def test_momentum_squared(self, canonical200):
        rng = np.random.default_rng(7)
        samples = rng.uniform(-2, 2, size=(20, 2))
        report = shift_identity_check(parse_polynomial("P^2", "canonical"), canonical200, samples)
        assert report.max_deviation < 1e-8

    def test_linear_word_is_exact(self, canonical200):
        report = shift_identity_check(
            parse_polynomial("Q", "canonical"), canonical200, [(0.5, -1.5), (2.0, 2.0)]
        )
        assert report.max_deviation < 1e-12

    def test_mixed_word(self, canonical200):
        report = shift_identity_check(parse_polynomial("P*Q*P", "canonical"), canonical200, [(1.0, 1.0)])
        assert report.max_deviation < 1e-8

    def test_requires_canonical_family(self, affine_beta2):
        with pytest.raises(ValueError):
            shift_identity_check(parse_polynomial("Q", "affine"), affine_beta2, [(0.0, 1.0)])


def _canonical_builder(expression, dim=10):
    poly = parse_polynomial(expression, "canonical")

    def build(hbar):
        return enhance(poly, canonical_family(build_fock_rep(dim, hbar)))

    return build


class TestClassicalLimit:
    def test_oscillator(self):
        fit = classical_limit(
            _canonical_builder("0.5*P^2 + 0.5*Q^2"), 1.0, 1.0, [1.0, 0.5, 0.25, 0.125]
        )
        assert fit.limit == pytest.approx(1.0, abs=1e-10)
        assert fit.leading_power == 1

    def test_hbar_independent_word(self):
        fit = classical_limit(_canonical_builder("Q"), 0.3, 2.0, [1.0, 0.5, 0.25])
        assert fit.limit == pytest.approx(2.0, abs=1e-12)
        assert fit.leading_power == 0

    def test_enhanced_hydrogen_recovers_classical_form(self):
        # fixed fiducial width; the measured coefficients approach e^2 and 0
        p0, q0 = 0.5, 1.5

        def builder(h):
            return hydrogen_enhanced(HydrogenParams(m=1.0, e2=1.0, beta=2.0, hbar=h))

        fit = classical_limit(builder, p0, q0, [0.5, 0.25, 0.125, 0.0625, 0.03125])
        assert fit.limit == pytest.approx(p0**2 / 2 - 1.0 / q0, abs=5e-6)
        assert fit.leading_power == 1

    def test_sequence_validation(self):
        builder = _canonical_builder("Q")
        with pytest.raises(ValueError):
            classical_limit(builder, 0, 0, [1.0, 0.5])
        with pytest.raises(ValueError):
            classical_limit(builder, 0, 0, [0.25, 0.5, 1.0])
        with pytest.raises(ValueError):
            classical_limit(builder, 0, 0, [1.0, -0.5, 0.25])

    def test_nonconvergent_values_raise(self):
        def noisy_builder(hbar):
            return EnhancedHamiltonian(
                lambda p, q: np.sin(1e6 / hbar), hbar=hbar, provenance="closed_form"
            )

        with pytest.raises(NumericalFailure) as err:
            classical_limit(
                noisy_builder, 0.0, 0.0, [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4], degree=2
            )
        assert "residuals" in err.value.diagnostics

    @pytest.mark.parametrize(
        "expression", ["P^2", "Q^2", "0.5*P^2 + 0.5*Q^2", "P*Q*Q*P", "Q^4"]
    )
    def test_degree_four_words_have_linear_corrections(self, expression):
        p, q = 0.7, -1.2
        fit = classical_limit(_canonical_builder(expression), p, q, [1.0, 0.5, 0.25, 0.125, 0.0625])
        poly = parse_polynomial(expression, "canonical")
        assert fit.limit == pytest.approx(classical_value(poly, p, q), abs=1e-8)
        assert fit.leading_power >= 1
        assert fit.residual < 1e-6


class TestOperatorPolynomialInvariants:
    def test_from_terms_hermiticity_check(self):
        with pytest.raises(ValueError, match="Hermitian"):
            OperatorPolynomial([(1.0, ("P", "Q", "Q"))], "canonical")
        OperatorPolynomial([(1.0, ("Q", "P", "Q"))], "canonical")

    def test_degree_property(self):
        poly = parse_polynomial("Q^3 + Q", "canonical")
        assert poly.degree == 3
