import numpy as np
import pytest

from enhq import (
    DomainError,
    HydrogenParams,
    build_spin_rep,
    default_hydrogen_rep,
    enhance,
    expectation,
    fiducial_p2_closed,
    fiducial_q_moment_closed,
    hamiltonian_flow,
    hydrogen_classical,
    hydrogen_enhanced,
    min_radius,
    parse_polynomial,
    spin_family,
    spin_precession,
)


class TestParams:
    def test_defaults_valid(self):
        p = HydrogenParams()
        assert p.beta > p.hbar

    @pytest.mark.parametrize("kwargs", [{"m": -1.0}, {"e2": 0.0}, {"hbar": -0.1}])
    def test_rejects_nonpositive(self, kwargs):
        with pytest.raises(ValueError):
            HydrogenParams(**kwargs)

    def test_rejects_narrow_fiducial(self):
        with pytest.raises(DomainError):
            HydrogenParams(beta=1.0, hbar=1.0)


class TestClassicalHydrogen:
    def test_value_at_reference_point(self):
        ham = hydrogen_classical(HydrogenParams())
        assert ham(0.0, 1.0) == pytest.approx(-1.0)

    def test_gradient_is_derivative_of_evaluate(self):
        # dH/dq of -e2/q is +e2/q^2; the flow equation then gives pdot = -1
        ham = hydrogen_classical(HydrogenParams())
        gp, gq = ham.gradient(0.0, 1.0)
        assert (gp, gq) == (0.0, pytest.approx(1.0))
        h = 1e-6
        fd = (ham(0.0, 1.0 + h) - ham(0.0, 1.0 - h)) / (2 * h)
        assert gq == pytest.approx(fd, rel=1e-6)

    def test_finite_time_collapse(self):
        ham = hydrogen_classical(HydrogenParams())
        traj = hamiltonian_flow(ham, (0.0, 1.0), 5.0, tol=1e-10)
        assert "singularity_hit" in traj.event_kinds()


class TestEnhancedHydrogen:
    def test_c2_matches_closed_form(self):
        ham = hydrogen_enhanced(HydrogenParams(beta=2.0))
        assert ham.c2 == pytest.approx(fiducial_p2_closed(2.0, 1.0), rel=1e-5)

    def test_c2_scaling_with_hbar(self):
        # beta = 2 hbar keeps the shape fixed, so C2 = 2 hbar^2 exactly
        for hbar in (1.0, 0.5, 0.25):
            ham = hydrogen_enhanced(HydrogenParams(beta=2 * hbar, hbar=hbar))
            assert ham.c2 / hbar**2 == pytest.approx(2.0, rel=1e-5)

    def test_c1_is_measured_inverse_moment(self):
        params = HydrogenParams(beta=2.0)
        ham = hydrogen_enhanced(params)
        expected = params.e2 * fiducial_q_moment_closed(2.0, 1.0, -1)
        assert ham.c1 == pytest.approx(expected, rel=1e-10)
        # C1 = e2 (1 + O(hbar)): the correction shrinks with hbar at fixed beta
        gaps = [
            abs(hydrogen_enhanced(HydrogenParams(beta=2.0, hbar=h)).c1 - 1.0)
            for h in (0.5, 0.25, 0.125)
        ]
        assert all(a > b for a, b in zip(gaps, gaps[1:]))

    def test_core_ratio_near_natural_length(self):
        # C2/(2m) over (hbar^2 / m e2) C1 is an order-one number; it equals
        # 3/4 for beta = 2 hbar
        params = HydrogenParams(beta=2.0)
        ham = hydrogen_enhanced(params)
        ratio = (ham.c2 / (2 * params.m)) / (
            params.hbar**2 / (params.m * params.e2) * ham.c1
        )
        assert 0.5 < ratio < 1.5
        assert ratio == pytest.approx(0.75, abs=1e-4)

    def test_small_hbar_recovers_classical(self):
        params0 = HydrogenParams(beta=2.0)
        classical = hydrogen_classical(params0)
        p0, q0 = 0.4, 1.3
        gaps = []
        for hbar in (0.5, 0.25, 0.125):
            ham = hydrogen_enhanced(HydrogenParams(beta=2.0, hbar=hbar))
            gaps.append(abs(ham(p0, q0) - classical(p0, q0)))
        assert all(a > b for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 0.05

    def test_route_consistency_of_coulomb_term(self):
        # the -C1/q term equals the direct grid expectation of e2/Q on the
        # dilated states (1/Q is diagonal there)
        from enhq import affine_cs, affine_family

        params = HydrogenParams(beta=2.0)
        rep = default_hydrogen_rep(params)
        family = affine_family(rep, params.beta)
        ham = hydrogen_enhanced(params, rep)
        for p, q in [(0.0, 1.0), (0.5, 2.2), (-0.7, 0.6)]:
            psi = affine_cs(p, q, family)
            dens = np.abs(psi.amplitudes) ** 2
            direct = params.e2 * float(dens @ (1.0 / rep.grid))
            assert direct == pytest.approx(ham.c1 / q, rel=1e-8)

    def test_gradient_consistency(self):
        ham = hydrogen_enhanced(HydrogenParams(beta=2.0))
        for p, q in [(0.3, 0.9), (-0.5, 2.0)]:
            gp, gq = ham.gradient(p, q)
            h = 1e-6
            assert gp == pytest.approx((ham(p + h, q) - ham(p - h, q)) / (2 * h), rel=1e-6)
            assert gq == pytest.approx((ham(p, q + h) - ham(p, q - h)) / (2 * h), rel=1e-6)

    def test_rep_hbar_mismatch_rejected(self):
        rep = default_hydrogen_rep(HydrogenParams(beta=2.0, hbar=1.0))
        with pytest.raises(ValueError):
            hydrogen_enhanced(HydrogenParams(beta=2.0, hbar=0.5), rep)


class TestMinRadius:
    def test_potential_minimum_is_circular_point(self):
        ham = hydrogen_enhanced(HydrogenParams(beta=2.0))
        m = ham.params.m
        e_min = -ham.c1**2 * m / (2 * ham.c2)
        q_circ = ham.c2 / (m * ham.c1)
        assert min_radius(ham, e_min) == pytest.approx(q_circ, rel=1e-8)

    def test_residual_bound(self):
        ham = hydrogen_enhanced(HydrogenParams(beta=2.0))
        for energy in (-0.3, -0.1, 0.2):
            q = min_radius(ham, energy)
            assert abs(ham(0.0, q) - energy) < 1e-10

    def test_vanishing_core_restores_collapse(self):
        # beta = 2 hbar makes C2 = 2 hbar^2, so the turning radius shrinks
        # to zero with hbar
        radii = []
        for hbar in (1.0, 0.25, 0.0625):
            ham = hydrogen_enhanced(HydrogenParams(beta=2 * hbar, hbar=hbar))
            radii.append(min_radius(ham, -0.4))
        assert all(a > b for a, b in zip(radii, radii[1:]))
        assert radii[-1] < 0.02

    def test_energy_below_minimum_rejected(self):
        ham = hydrogen_enhanced(HydrogenParams(beta=2.0))
        with pytest.raises(ValueError):
            min_radius(ham, -10.0)

    def test_requires_enhanced_hydrogen(self):
        ham = hydrogen_classical(HydrogenParams())
        with pytest.raises(ValueError):
            min_radius(ham, -0.5)

    def test_flow_minimum_matches(self):
        ham = hydrogen_enhanced(HydrogenParams(beta=2.0))
        q0 = 3.0
        energy = ham.evaluate(0.0, q0)
        traj = hamiltonian_flow(ham, (0.0, q0), 40.0, tol=1e-10, n_samples=4000)
        assert traj.min_q() == pytest.approx(min_radius(ham, energy), abs=1e-6)


class TestSpinPrecession:
    def test_momentum_constant_along_flow(self):
        rep = build_spin_rep(2.0)
        ham = spin_precession(1.3, rep)
        traj = hamiltonian_flow(ham, (0.4, 0.0), 2.0, tol=1e-10)
        assert np.max(np.abs(traj.p - 0.4)) < 1e-12

    def test_azimuth_advances_linearly(self):
        # q = sqrt(s hbar) phi, so phi(t) = phi0 + B t
        rep = build_spin_rep(2.0)
        B = 1.3
        ham = spin_precession(B, rep)
        traj = hamiltonian_flow(ham, (0.4, 0.1), 2.0, tol=1e-10)
        sq = np.sqrt(2.0)
        phi = traj.q / sq
        assert np.max(np.abs(phi - (0.1 / sq + B * traj.t))) < 1e-10

    def test_expectation_route_matches_closed_form(self):
        rep = build_spin_rep(1.5, hbar=0.5)
        B = 0.8
        ham = spin_precession(B, rep)
        family = spin_family(rep)
        matrix_route = enhance(parse_polynomial(f"{B}*S3", "spin"), family)
        rng = np.random.default_rng(5)
        sq = np.sqrt(1.5 * 0.5)
        for _ in range(20):
            p = rng.uniform(-0.9, 0.9) * sq
            q = rng.uniform(-0.9, 0.9) * np.pi * sq
            assert ham(p, q) == pytest.approx(matrix_route(p, q), abs=1e-10)

    def test_value_is_rotated_generator_expectation(self):
        from enhq import spin_cs

        rep = build_spin_rep(2.5)
        ham = spin_precession(2.0, rep)
        theta, phi = 0.8, -0.5
        psi = spin_cs(theta, phi, rep)
        sq = np.sqrt(2.5)
        p = sq * np.cos(theta)
        q = sq * phi
        assert ham(p, q) == pytest.approx(2.0 * expectation(psi, rep.S3).real, abs=1e-12)
