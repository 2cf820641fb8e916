"""Coherent-state families, overlaps, and Fubini-Study geometry.

Three families are constructed from self-adjoint generators acting on a
fiducial vector:

* canonical: ``exp(-i q P / hbar) exp(i p Q / hbar) |0>`` on the line, with
  the oscillator ground state as fiducial, labels ``(p, q)`` ranging over the
  whole plane;
* affine: ``exp(i p Q / hbar) exp(-i log(q) D / hbar) |beta>`` on the half
  line, ``q > 0``, with the extremal-weight fiducial solving
  ``[(Q - 1) + (i/beta) D] |beta> = 0``;
* spin: ``exp(-i phi S3 / hbar) exp(-i theta S2 / hbar) |s, s>`` with the
  highest-weight fiducial, optionally relabeled by ``p = sqrt(s hbar) cos(theta)``
  and ``q = sqrt(s hbar) phi``.

The phase-insensitive metric ``2 hbar [ ||d psi||^2 - |<psi|d psi>|^2 ]`` on a
family is computed both numerically (central differences of the state map
with Richardson extrapolation) and in closed form, together with the scalar
curvature of the closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, gammaln

from .errors import CapacityError, DomainError, NumericalFailure
from .hilbert import (
    DEFAULT_TRUNCATION_MARGIN,
    HalfLineRep,
    LineRep,
    SpinRep,
    StateVector,
    apply_unitary,
)

#: Default finite-difference step, in label units, for the numeric metric.
DEFAULT_METRIC_STEP = 1e-4

#: l2 amplitude allowed beyond the truncation margin of a canonical state.
CANONICAL_TAIL_TOL = 1e-12

#: Looser tail threshold for squeezed (extended) states.
EXTENDED_TAIL_TOL = 1e-10


@dataclass(frozen=True)
class MetricTensor2:
    """Symmetric 2x2 metric in ``(p, q)`` label coordinates."""

    g_pp: float
    g_pq: float
    g_qq: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.g_pp, self.g_pq], [self.g_pq, self.g_qq]])

    def is_positive_definite(self) -> bool:
        return self.g_pp > 0 and self.g_pp * self.g_qq - self.g_pq**2 > 0


class CoherentFamily:
    """A parametrized map from labels ``(p, q)`` to unit state vectors.

    Instances are immutable; ``state`` is a pure function of the labels and
    families may be shared across threads and swept in parallel.
    """

    def __init__(self, kind, rep, fiducial, params=None):
        self.kind = kind
        self.rep = rep
        self.fiducial = fiducial
        self.params = dict(params or {})

    def label_in_domain(self, p: float, q: float) -> bool:
        if not (np.isfinite(p) and np.isfinite(q)):
            return False
        if self.kind == "affine":
            return q > 0
        if self.kind == "spin":
            sq = np.sqrt(self.rep.s * self.rep.hbar)
            return abs(p) <= sq and -np.pi * sq < q <= np.pi * sq
        return True

    def state(self, p: float, q: float) -> StateVector:
        if self.kind == "canonical":
            return canonical_cs(p, q, self.rep)
        if self.kind == "affine":
            return affine_cs(p, q, self)
        if self.kind == "spin":
            theta, phi = pq_to_angles(p, q, self.rep)
            return spin_cs(theta, phi, self.rep)
        if self.kind == "extended":
            return extended_cs(p, q, self.params["a"], self.params["b"], self.rep)
        raise ValueError(f"unknown family kind {self.kind!r}")


def canonical_family(rep: LineRep) -> CoherentFamily:
    """Canonical family over the oscillator vacuum of ``rep``.

    The fiducial satisfies ``(Q + i P)|0> = 0`` exactly in the truncated
    basis.
    """
    return CoherentFamily("canonical", rep, rep.vacuum())


def affine_family(rep: HalfLineRep, beta: float) -> CoherentFamily:
    """Affine family over the extremal-weight fiducial with parameter ``beta``."""
    fid = affine_fiducial(beta, rep)
    return CoherentFamily("affine", rep, fid, {"beta": float(beta)})


def spin_family(rep: SpinRep) -> CoherentFamily:
    """Spin family over the highest-weight state, labeled by ``(p, q)``."""
    return CoherentFamily("spin", rep, rep.highest_weight())


def extended_family(rep: LineRep, a: float, b: float) -> CoherentFamily:
    """Squeezed extension of the canonical family with fixed ``(a, b)``."""
    return CoherentFamily("extended", rep, rep.vacuum(), {"a": float(a), "b": float(b)})


def required_fock_dim(
    p: float,
    q: float,
    hbar: float,
    tail_levels: int = DEFAULT_TRUNCATION_MARGIN,
    tail_tol: float = CANONICAL_TAIL_TOL,
) -> int:
    """Estimate the Fock dimension adequate for the coherent state at ``(p, q)``.

    The level occupancy is Poisson with mean ``(p^2 + q^2) / (2 hbar)``; the
    estimate is the smallest size whose tail probability beyond the
    truncation margin stays below ``tail_tol**2``.
    """
    lam = (p * p + q * q) / (2.0 * hbar)
    if lam == 0.0:
        return 2 + tail_levels
    target = 1.0 - tail_tol * tail_tol
    n = max(2, int(lam))
    cap = int(10 * lam + 500)
    while gammaincc(n + 1, lam) < target and n < cap:
        n = max(n + 8, int(1.2 * n) + 1)
    return n + tail_levels + 2


def _check_tail(state: StateVector, p, q, tail_levels, tail_tol):
    tail = float(np.linalg.norm(state.amplitudes[state.dim - tail_levels :]))
    if tail > tail_tol:
        need = required_fock_dim(p, q, state.rep.hbar, tail_levels, tail_tol)
        raise CapacityError(
            f"truncation inadequate at (p, q) = ({p}, {q}): tail amplitude {tail:.3e} "
            f"exceeds {tail_tol:.1e}; estimated adequate dim is {need}",
            required_dim=need,
        )
    return state


def canonical_cs(
    p: float,
    q: float,
    rep: LineRep,
    tail_levels: int = DEFAULT_TRUNCATION_MARGIN,
    tail_tol: float = CANONICAL_TAIL_TOL,
) -> StateVector:
    """Return ``exp(-i q P / hbar) exp(i p Q / hbar) |0>``.

    Raises :class:`CapacityError` with an adequate-dimension estimate when
    the amplitude beyond the truncation margin exceeds ``tail_tol``.
    """
    psi = rep.vacuum()
    psi = apply_unitary(rep.Q, -p, psi)
    psi = apply_unitary(rep.P, q, psi)
    return _check_tail(psi, p, q, tail_levels, tail_tol)


def extended_cs(
    p: float,
    q: float,
    a: float,
    b: float,
    rep: LineRep,
    tail_tol: float = EXTENDED_TAIL_TOL,
) -> StateVector:
    """Squeezed coherent state
    ``exp(-i a (P^2+Q^2)/hbar) exp(-i b (PQ+QP)/hbar) exp(-i q P/hbar) exp(i p Q/hbar) |0>``.

    Squeezing amplifies high-level occupancy, so the tail check uses the
    looser :data:`EXTENDED_TAIL_TOL` and raises :class:`CapacityError` when
    it fails (no sharp dimension estimate is available for squeezed tails).
    """
    psi = rep.vacuum()
    psi = apply_unitary(rep.Q, -p, psi)
    psi = apply_unitary(rep.P, q, psi)
    if b != 0.0:
        # PQ + QP = 2 D
        psi = apply_unitary(rep.D, 2.0 * b, psi)
    if a != 0.0:
        psi = apply_unitary(rep.quadrature_square(), a, psi)
    tail = float(np.linalg.norm(psi.amplitudes[psi.dim - DEFAULT_TRUNCATION_MARGIN :]))
    if tail > tail_tol:
        raise CapacityError(
            f"truncation inadequate for extended state at (p, q, a, b) = "
            f"({p}, {q}, {a}, {b}): tail amplitude {tail:.3e}"
        )
    return psi


def _affine_log_norm(nu: float) -> float:
    # log M^2 for the normalized fiducial density x^(2 nu - 1) e^(-2 nu x).
    return 2.0 * nu * np.log(2.0 * nu) - gammaln(2.0 * nu)


def affine_wavefunction(x, beta: float, hbar: float):
    """Closed-form fiducial wavefunction ``M x^(beta/hbar - 1/2) exp(-(beta/hbar) x)``."""
    nu = beta / hbar
    x = np.asarray(x, dtype=float)
    return np.exp(0.5 * _affine_log_norm(nu) + (nu - 0.5) * np.log(x) - nu * x)


def affine_fiducial(beta: float, rep: HalfLineRep) -> StateVector:
    """Sample the extremal-weight fiducial on the grid of ``rep``.

    Requires ``beta > hbar``: otherwise the momentum second moment diverges
    and a :class:`DomainError` is raised.  The returned state has
    ``<Q> = 1`` and ``<D> = 0`` within grid tolerance.
    """
    if beta <= rep.hbar:
        raise DomainError(
            f"beta must exceed hbar for a normalizable momentum moment "
            f"(got beta = {beta}, hbar = {rep.hbar})"
        )
    return rep.state_from_samples(affine_wavefunction(rep.grid, beta, rep.hbar))


def affine_cs(p: float, q: float, family: CoherentFamily) -> StateVector:
    """Return ``exp(i p Q / hbar) exp(-i log(q) D / hbar) |beta>`` for ``q > 0``.

    Both unitaries act pointwise on half-line wavefunctions (a phase and a
    dilation), so the state is produced by exact resampling of the
    closed-form fiducial rather than by matrix exponentials.
    """
    if q <= 0:
        raise DomainError(f"affine labels require q > 0 (got q = {q})")
    rep = family.rep
    beta = family.params["beta"]
    x = rep.grid
    dilated = affine_wavefunction(x / q, beta, rep.hbar) / np.sqrt(q)
    values = dilated * np.exp(1j * p * x / rep.hbar)
    return rep.state_from_samples(values)


def pq_to_angles(p: float, q: float, rep: SpinRep) -> tuple[float, float]:
    """Convert ``(p, q)`` spin labels to ``(theta, phi)``.

    ``p = sqrt(s hbar) cos(theta)`` and ``q = sqrt(s hbar) phi``; the map is
    invertible on ``p^2 <= s hbar``, ``-pi sqrt(s hbar) < q <= pi sqrt(s hbar)``.
    """
    sq = np.sqrt(rep.s * rep.hbar)
    if abs(p) > sq * (1 + 1e-12):
        raise DomainError(f"|p| must not exceed sqrt(s hbar) = {sq} (got p = {p})")
    if not (-np.pi * sq < q <= np.pi * sq * (1 + 1e-12)):
        raise DomainError(f"q must lie in (-pi sqrt(s hbar), pi sqrt(s hbar)] (got q = {q})")
    theta = float(np.arccos(np.clip(p / sq, -1.0, 1.0)))
    phi = float(q / sq)
    return theta, phi


def angles_to_pq(theta: float, phi: float, rep: SpinRep) -> tuple[float, float]:
    """Inverse of :func:`pq_to_angles`."""
    sq = np.sqrt(rep.s * rep.hbar)
    return float(sq * np.cos(theta)), float(sq * phi)


def spin_cs(theta: float, phi: float, rep: SpinRep) -> StateVector:
    """Return ``exp(-i phi S3 / hbar) exp(-i theta S2 / hbar) |s, s>``."""
    eps = 1e-12
    if not (-eps <= theta <= np.pi + eps):
        raise DomainError(f"theta must lie in [0, pi] (got {theta})")
    if not (-np.pi - eps < phi <= np.pi + eps):
        raise DomainError(f"phi must lie in (-pi, pi] (got {phi})")
    psi = rep.highest_weight()
    psi = apply_unitary(rep.S2, theta, psi)
    psi = apply_unitary(rep.S3, phi, psi)
    return psi


def overlap(s1: StateVector, s2: StateVector) -> complex:
    """Inner product ``<s1|s2>`` of two states in the same representation."""
    if s1.dim != s2.dim or s1.rep.hbar != s2.rep.hbar:
        raise ValueError("states do not live in the same representation")
    return complex(np.vdot(s1.amplitudes, s2.amplitudes))


# ---------------------------------------------------------------------------
# Fiducial moments
# ---------------------------------------------------------------------------

def fiducial_moments(family: CoherentFamily) -> dict:
    """Measure the affine fiducial moments on the grid.

    Returns ``q1``, ``q2``, ``q_inv`` (diagonal, exact per grid quadrature),
    ``d`` and the second moments ``d2`` and ``p2`` computed through the
    finite-difference generators.  ``q1 = 1``, ``d = 0``, and the closed form
    of ``p2`` are the validated statements; ``d2`` is exposed as an
    unvalidated query.
    """
    if family.kind != "affine":
        raise ValueError("fiducial moments are defined for affine families")
    rep = family.rep
    psi = family.fiducial
    x = rep.grid
    dens = np.abs(psi.amplitudes) ** 2
    d_psi = rep.D @ psi.amplitudes
    p_psi = rep.P_formal @ psi.amplitudes
    return {
        "q1": float(dens @ x),
        "q2": float(dens @ (x * x)),
        "q_inv": float(dens @ (1.0 / x)),
        "d": complex(np.vdot(psi.amplitudes, d_psi)),
        "d2": float(np.real(np.vdot(d_psi, d_psi))),
        "p2": float(np.real(np.vdot(p_psi, p_psi))),
    }


def fiducial_q_moment_closed(beta: float, hbar: float, n: int) -> float:
    """Closed form of ``<beta| Q^n |beta>`` for integer ``n >= -1``.

    The fiducial density is a Gamma density with shape and rate both equal
    to ``2 beta / hbar``, so the moments are ratios of Gamma functions.
    """
    nu2 = 2.0 * beta / hbar
    if n == -1:
        if nu2 <= 1:
            raise DomainError("<Q^-1> requires beta > hbar / 2")
        return nu2 / (nu2 - 1.0)
    if n < -1 or int(n) != n:
        raise ValueError("n must be an integer >= -1")
    out = 1.0
    for k in range(int(n)):
        out *= (nu2 + k) / nu2
    return out


def fiducial_p2_closed(beta: float, hbar: float) -> float:
    """Closed form ``beta^2 hbar / (2 (beta - hbar))`` of the momentum second moment."""
    if beta <= hbar:
        raise DomainError("the momentum second moment diverges unless beta > hbar")
    return float(beta * beta * hbar / (2.0 * (beta - hbar)))


# ---------------------------------------------------------------------------
# Fubini-Study metric
# ---------------------------------------------------------------------------

def _metric_from_map(state_map, p, q, h, hbar):
    psi0 = state_map(p, q).amplitudes
    dpp = (state_map(p + h, q).amplitudes - state_map(p - h, q).amplitudes) / (2.0 * h)
    dpq = (state_map(p, q + h).amplitudes - state_map(p, q - h).amplitudes) / (2.0 * h)
    conn_p = np.vdot(psi0, dpp)
    conn_q = np.vdot(psi0, dpq)
    g_pp = np.vdot(dpp, dpp) - np.conj(conn_p) * conn_p
    g_qq = np.vdot(dpq, dpq) - np.conj(conn_q) * conn_q
    g_pq = np.vdot(dpp, dpq) - np.conj(conn_p) * conn_q
    scale = 2.0 * hbar
    return np.array([scale * g_pp.real, scale * g_pq.real, scale * g_qq.real])


def fs_metric_numeric(
    family: CoherentFamily,
    p: float,
    q: float,
    h: float = DEFAULT_METRIC_STEP,
    richardson: bool = True,
    full_output: bool = False,
):
    """Numeric Fubini-Study metric at ``(p, q)`` from the state map.

    Central differences at steps ``h``, ``h/2``, ``h/4`` are combined by
    Richardson extrapolation; the pair of successive differences doubles as
    a convergence diagnostic and the observed order is reported with
    ``full_output=True``.  A diverging difference sequence raises
    :class:`NumericalFailure` with the measured diagnostics.
    """
    for pp, qq in ((p + h, q), (p - h, q), (p, q + h), (p, q - h), (p, q)):
        if not family.label_in_domain(pp, qq):
            raise DomainError(
                f"label ({pp}, {qq}) leaves the domain; ({p}, {q}) is not interior at step {h}"
            )
    hbar = family.rep.hbar
    g1 = _metric_from_map(family.state, p, q, h, hbar)
    g2 = _metric_from_map(family.state, p, q, h / 2.0, hbar)
    g4 = _metric_from_map(family.state, p, q, h / 4.0, hbar)
    d1 = float(np.max(np.abs(g1 - g2)))
    d2 = float(np.max(np.abs(g2 - g4)))
    scale = max(1.0, float(np.max(np.abs(g4))))
    # below this the differences sit at the roundoff floor of the inner
    # products and the order estimate is meaningless
    floor = 1e-10 * scale
    if d2 > floor:
        order = np.log2(d1 / d2) if d1 > 0 else np.inf
    else:
        order = np.inf
    diagnostics = {"h": h, "diff_h_h2": d1, "diff_h2_h4": d2, "observed_order": order}
    extrap = (4.0 * g4 - g2) / 3.0
    if not np.all(np.isfinite(extrap)) or (d2 > floor and d2 > d1):
        raise NumericalFailure(
            "central differences of the state map did not converge under step refinement",
            diagnostics,
        )
    tensor = MetricTensor2(float(extrap[0]), float(extrap[1]), float(extrap[2]))
    if full_output:
        return tensor, diagnostics
    return tensor


def fs_metric_analytic(
    kind: str,
    p: float,
    q: float,
    hbar: float = 1.0,
    beta: float | None = None,
    s: float | None = None,
) -> MetricTensor2:
    """Closed-form metric tensors for the three families.

    canonical: ``dp^2 + dq^2``; affine: ``q^2/beta dp^2 + beta/q^2 dq^2``;
    spin: ``[1 - p^2/(s hbar)]^{-1} dp^2 + [1 - p^2/(s hbar)] dq^2``.
    """
    if kind == "canonical":
        return MetricTensor2(1.0, 0.0, 1.0)
    if kind == "affine":
        if beta is None or beta <= 0:
            raise ValueError("affine metric requires beta > 0")
        if q <= 0:
            raise DomainError(f"affine labels require q > 0 (got q = {q})")
        return MetricTensor2(q * q / beta, 0.0, beta / (q * q))
    if kind == "spin":
        if s is None or s <= 0:
            raise ValueError("spin metric requires s > 0")
        shbar = s * hbar
        f = 1.0 - p * p / shbar
        if f <= 0:
            raise DomainError(f"spin labels require p^2 < s hbar (got p = {p})")
        return MetricTensor2(1.0 / f, 0.0, f)
    raise ValueError(f"no analytic metric for family kind {kind!r}")


def _brioschi_curvature(metric, p, q, h):
    # Gaussian curvature of a 2-D metric from central differences of its
    # components (Brioschi formula); works for non-diagonal tensors too.
    def comps(pp, qq):
        m = metric(pp, qq)
        return np.array([m.g_pp, m.g_pq, m.g_qq])

    c0 = comps(p, q)
    cp = comps(p + h, q)
    cm = comps(p - h, q)
    cq = comps(p, q + h)
    cqm = comps(p, q - h)
    d_p = (cp - cm) / (2 * h)
    d_q = (cq - cqm) / (2 * h)
    dd_pp = (cp - 2 * c0 + cm) / (h * h)
    dd_qq = (cq - 2 * c0 + cqm) / (h * h)
    dd_pq = (
        comps(p + h, q + h) - comps(p + h, q - h) - comps(p - h, q + h) + comps(p - h, q - h)
    ) / (4 * h * h)

    E, F, G = c0
    E_p, F_p, G_p = d_p
    E_q, F_q, G_q = d_q
    E_qq = dd_qq[0]
    G_pp = dd_pp[2]
    F_pq = dd_pq[1]

    m1 = np.array(
        [
            [-0.5 * E_qq + F_pq - 0.5 * G_pp, 0.5 * E_p, F_p - 0.5 * E_q],
            [F_q - 0.5 * G_p, E, F],
            [0.5 * G_q, F, G],
        ]
    )
    m2 = np.array([[0.0, 0.5 * E_q, 0.5 * G_p], [0.5 * E_q, E, F], [0.5 * G_p, F, G]])
    denom = (E * G - F * F) ** 2
    return (np.linalg.det(m1) - np.linalg.det(m2)) / denom


def scalar_curvature(
    kind: str,
    p: float,
    q: float,
    hbar: float = 1.0,
    beta: float | None = None,
    s: float | None = None,
    h: float | None = None,
) -> float:
    """Scalar (Ricci) curvature of the closed-form metric at ``(p, q)``.

    Computed as twice the Gaussian curvature obtained by finite differences
    of :func:`fs_metric_analytic`, with one Richardson step.  The canonical
    sheet is flat, the affine sheet has constant curvature ``-2/beta``, and
    the spin sheet is a sphere of radius ``sqrt(s hbar)`` with curvature
    ``2/(s hbar)``.
    """

    def metric(pp, qq):
        return fs_metric_analytic(kind, pp, qq, hbar=hbar, beta=beta, s=s)

    if h is None:
        h = 1e-3 * max(1.0, abs(p), abs(q))
    # keep the stencil inside the domain
    if kind == "affine" and q - 2 * h <= 0:
        h = q / 4.0
    if kind == "spin":
        edge = np.sqrt(s * hbar) - abs(p)
        if edge <= 0:
            raise DomainError("label is not interior to the spin chart")
        h = min(h, edge / 4.0)
    k1 = _brioschi_curvature(metric, p, q, h)
    k2 = _brioschi_curvature(metric, p, q, h / 2.0)
    gauss = (4.0 * k2 - k1) / 3.0
    return float(2.0 * gauss)
