"""Concrete model Hamiltonians: one-dimensional hydrogen and spin precession.

The classical hydrogen Hamiltonian ``p^2/(2m) - e^2/q`` on ``q > 0`` collapses
in finite time.  Its expectation-valued counterpart over affine coherent
states gains a repulsive core,

    ``H(p, q) = p^2/(2m) - C1/q + C2/(2 m q^2)``,

whose coefficients are measured from the fiducial rather than assumed:
``C1 = e^2 <beta| 1/Q |beta>`` (diagonal on the grid, so exact per
quadrature) and ``C2 = <beta| P^2 |beta>``.  With the core present every
negative-energy flow turns at a strictly positive radius.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coherent import affine_family, fiducial_moments
from .correspondence import EnhancedHamiltonian
from .errors import DomainError
from .hilbert import HalfLineRep, SpinRep, build_halfline_rep


@dataclass(frozen=True)
class HydrogenParams:
    """Mass, coupling, fiducial width, and action quantum for the hydrogen models."""

    m: float = 1.0
    e2: float = 1.0
    beta: float = 2.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("m", "e2", "beta", "hbar"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.beta <= self.hbar:
            raise DomainError(
                f"beta must exceed hbar (got beta = {self.beta}, hbar = {self.hbar})"
            )


def default_hydrogen_rep(params: HydrogenParams, n: int = 4000) -> HalfLineRep:
    """Geometric grid sized to the fiducial's support for the given parameters."""
    nu = params.beta / params.hbar
    x_max = max(12.0, 40.0 / nu)
    return build_halfline_rep(1e-5, x_max, n, hbar=params.hbar)


def hydrogen_classical(params: HydrogenParams) -> EnhancedHamiltonian:
    """Closed-form ``p^2/(2m) - e^2/q`` with its gradient, on ``q > 0``."""
    m, e2 = params.m, params.e2

    ham = EnhancedHamiltonian(
        lambda p, q: p * p / (2.0 * m) - e2 / q,
        lambda p, q: (p / m, e2 / (q * q)),
        hbar=params.hbar,
        provenance="closed_form",
        q_positive=True,
    )
    ham.params = params
    return ham


def hydrogen_enhanced(
    params: HydrogenParams,
    rep: HalfLineRep | None = None,
) -> EnhancedHamiltonian:
    """Expectation-valued hydrogen with measured core coefficients.

    ``C1`` and ``C2`` are measured on the half-line grid (pass ``rep`` to
    control the discretization); the returned Hamiltonian carries them as
    ``c1`` and ``c2`` attributes.
    """
    if rep is None:
        rep = default_hydrogen_rep(params)
    if rep.hbar != params.hbar:
        raise ValueError("representation hbar does not match the model parameters")
    family = affine_family(rep, params.beta)
    moments = fiducial_moments(family)
    c1 = params.e2 * moments["q_inv"]
    c2 = moments["p2"]
    m = params.m

    ham = EnhancedHamiltonian(
        lambda p, q: p * p / (2.0 * m) - c1 / q + c2 / (2.0 * m * q * q),
        lambda p, q: (p / m, c1 / (q * q) - c2 / (m * q * q * q)),
        hbar=params.hbar,
        provenance="expectation",
        q_positive=True,
    )
    ham.params = params
    ham.c1 = float(c1)
    ham.c2 = float(c2)
    return ham


def min_radius(H: EnhancedHamiltonian, energy: float) -> float:
    """Smallest positive root of ``E = -C1/q + C2/(2 m q^2)``.

    This is the inner turning radius of the enhanced hydrogen at energy
    ``E``; it satisfies ``|H(0, q_min) - E| < 1e-10``.  Energies below the
    minimum of the effective potential have no turning point and raise
    ``ValueError``.
    """
    c1 = getattr(H, "c1", None)
    c2 = getattr(H, "c2", None)
    params = getattr(H, "params", None)
    if c1 is None or c2 is None or params is None:
        raise ValueError("min_radius requires an enhanced hydrogen Hamiltonian")
    m = params.m
    if c2 <= 0:
        raise ValueError("min_radius requires a positive repulsive coefficient")
    disc = c1 * c1 + 2.0 * c2 * energy / m
    if disc < -1e-14 * c1 * c1:
        raise ValueError(
            f"energy {energy} lies below the effective potential minimum "
            f"{-c1 * c1 * m / (2.0 * c2)}"
        )
    # largest root u of (C2/2m) u^2 - C1 u - E = 0 with u = 1/q
    u = (c1 + np.sqrt(max(disc, 0.0))) * m / c2
    q = 1.0 / u
    # one Newton polish on H(0, q) - E for a clean residual
    for _ in range(3):
        f = H.evaluate(0.0, q) - energy
        df = H.gradient(0.0, q)[1]
        if df == 0.0:
            break
        step = f / df
        q -= step
        if abs(step) < 1e-15 * q:
            break
    if abs(H.evaluate(0.0, q) - energy) > 1e-10 * max(1.0, abs(energy)):
        raise ValueError(f"no reliable turning point at energy {energy}")
    return float(q)


def spin_precession(B: float, rep: SpinRep) -> EnhancedHamiltonian:
    """Uniform precession generator ``B * S3`` restricted to spin labels.

    The label function is ``H(p, q) = B sqrt(s hbar) p``: the azimuth
    advances linearly at rate ``B`` while ``p`` stays constant.
    """
    sq = np.sqrt(rep.s * rep.hbar)
    shbar = rep.s * rep.hbar

    ham = EnhancedHamiltonian(
        lambda p, q: B * sq * p,
        lambda p, q: (B * sq, 0.0),
        hbar=rep.hbar,
        provenance="closed_form",
        label_domain=lambda p, q: shbar - p * p,
    )
    ham.rate = float(B)
    return ham
