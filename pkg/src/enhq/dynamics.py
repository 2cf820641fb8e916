"""Hamiltonian flows in label space, canonical relabelings, and action values.

The equations of motion are ``dq/dt = dH/dp``, ``dp/dt = -dH/dq`` for an
:class:`~enhq.correspondence.EnhancedHamiltonian`.  The default integrator is
an adaptive embedded Runge-Kutta 5(4) pair; a fixed-step leapfrog backend is
available as a cross-check for separable Hamiltonians.  Flows on the half
line stop cleanly with a ``singularity_hit`` event when ``q`` falls below a
configurable floor, and local minima of ``q`` are annotated as ``bounce``
events.

Canonical coordinate transformations are user-supplied forward/inverse pairs;
the library verifies them (round trip and unit Jacobian) rather than deriving
generators.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .correspondence import EnhancedHamiltonian
from .errors import InvalidTransformError, NumericalFailure

DEFAULT_Q_FLOOR = 1e-8
_TRANSFORM_ROUNDTRIP_TOL = 1e-10
_TRANSFORM_JACOBIAN_TOL = 1e-8


@dataclass(frozen=True)
class PhasePoint:
    """A labeled phase-space sample."""

    p: float
    q: float
    t: float = 0.0


@dataclass(frozen=True)
class TrajectoryEvent:
    """An annotated instant: ``singularity_hit``, ``bounce``, or ``domain_exit``."""

    time: float
    kind: str
    p: float
    q: float
    energy: float


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered samples of ``(t, p, q, H)`` plus event annotations."""

    t: np.ndarray
    p: np.ndarray
    q: np.ndarray
    energy: np.ndarray
    events: tuple = field(default_factory=tuple)

    def __post_init__(self):
        for name in ("t", "p", "q", "energy"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.t.size >= 2 and not np.all(np.diff(self.t) > 0):
            raise ValueError("sample times must be strictly increasing")
        sizes = {self.t.size, self.p.size, self.q.size, self.energy.size}
        if len(sizes) != 1:
            raise ValueError("sample arrays must share one length")

    def __len__(self):
        return self.t.size

    def points(self):
        for t, p, q in zip(self.t, self.p, self.q):
            yield PhasePoint(float(p), float(q), float(t))

    @property
    def final(self) -> PhasePoint:
        return PhasePoint(float(self.p[-1]), float(self.q[-1]), float(self.t[-1]))

    def event_kinds(self):
        return tuple(e.kind for e in self.events)

    def min_q(self) -> float:
        """Smallest q over samples and event annotations."""
        qmin = float(np.min(self.q))
        for e in self.events:
            qmin = min(qmin, e.q)
        return qmin

    def to_csv(self, stream=None, header_lines=()) -> str:
        """Write ``t,p,q,H,event`` rows, merging event rows in time order."""
        own = stream is None
        if own:
            stream = io.StringIO()
        for line in header_lines:
            stream.write(f"# {line}\n")
        stream.write("t,p,q,H,event\n")
        rows = [(float(t), float(p), float(q), float(e), "") for t, p, q, e in
                zip(self.t, self.p, self.q, self.energy)]
        for ev in self.events:
            rows.append((ev.time, ev.p, ev.q, ev.energy, ev.kind))
        rows.sort(key=lambda r: (r[0], r[4]))
        for t, p, q, e, kind in rows:
            stream.write(f"{t!r},{p!r},{q!r},{e!r},{kind}\n")
        return stream.getvalue() if own else ""

    def to_json(self) -> str:
        payload = {
            "t": self.t.tolist(),
            "p": self.p.tolist(),
            "q": self.q.tolist(),
            "energy": self.energy.tolist(),
            "events": [
                {"time": e.time, "kind": e.kind, "p": e.p, "q": e.q, "energy": e.energy}
                for e in self.events
            ],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        data = json.loads(text)
        events = tuple(
            TrajectoryEvent(e["time"], e["kind"], e["p"], e["q"], e["energy"])
            for e in data["events"]
        )
        return cls(
            np.array(data["t"]), np.array(data["p"]), np.array(data["q"]),
            np.array(data["energy"]), events,
        )


def _as_point(x0) -> PhasePoint:
    if isinstance(x0, PhasePoint):
        return x0
    p, q = x0
    return PhasePoint(float(p), float(q))


def hamiltonian_flow(
    H: EnhancedHamiltonian,
    x0,
    t_final: float,
    tol: float = 1e-10,
    n_samples: int = 1000,
    q_floor: float = DEFAULT_Q_FLOOR,
    method: str = "rk45",
    max_step: float | None = None,
    n_steps: int | None = None,
) -> Trajectory:
    """Integrate Hamilton's equations from ``x0`` over ``[0, t_final]``.

    Samples are taken on a uniform grid of ``n_samples`` points (events keep
    their own exact times and states and are stored separately).  For
    half-line Hamiltonians the run stops with a ``singularity_hit`` event
    when ``q`` crosses ``q_floor``; a declared label domain stops with
    ``domain_exit``.  Step-size underflow near a collapse is converted into
    the singularity event rather than an exception, while non-finite
    gradients raise :class:`NumericalFailure`.
    """
    x0 = _as_point(x0)
    if not np.isfinite(t_final) or t_final <= 0:
        raise ValueError("t_final must be positive and finite")
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    if H.q_positive and x0.q <= q_floor:
        raise ValueError(f"initial q = {x0.q} is not above the floor {q_floor}")
    if H.label_domain is not None and H.label_domain(x0.p, x0.q) <= 0:
        raise ValueError("initial point lies outside the Hamiltonian's label domain")

    if method == "leapfrog":
        return _leapfrog_flow(H, x0, t_final, n_samples, q_floor, n_steps)
    if method not in ("rk45", "dop853"):
        raise ValueError(f"unknown integrator method {method!r}")

    def rhs(t, y):
        gp, gq = H.gradient(y[0], y[1])
        if not (np.isfinite(gp) and np.isfinite(gq)):
            raise NumericalFailure(
                f"gradient is not finite at (p, q) = ({y[0]}, {y[1]})",
                {"t": t, "p": y[0], "q": y[1]},
            )
        return (-gq, gp)

    events = []

    def bounce(t, y):
        return H.gradient(y[0], y[1])[0]

    bounce.terminal = False
    bounce.direction = 1.0
    events.append(("bounce", bounce))

    if H.q_positive:
        def singular(t, y, floor=q_floor):
            return y[1] - floor

        singular.terminal = True
        singular.direction = -1.0
        events.append(("singularity_hit", singular))

    if H.label_domain is not None:
        def exits(t, y, margin=H.label_domain):
            return margin(y[0], y[1])

        exits.terminal = True
        exits.direction = -1.0
        events.append(("domain_exit", exits))

    t_eval = np.linspace(0.0, t_final, n_samples)
    sol = solve_ivp(
        rhs,
        (0.0, t_final),
        (x0.p, x0.q),
        method="RK45" if method == "rk45" else "DOP853",
        rtol=tol,
        atol=tol * 1e-3,
        t_eval=t_eval,
        events=[f for _, f in events],
        max_step=np.inf if max_step is None else max_step,
    )

    recorded = []
    if sol.status >= 0:
        for (kind, _), times, states in zip(events, sol.t_events, sol.y_events):
            for te, ye in zip(times, states):
                recorded.append(
                    TrajectoryEvent(float(te), kind, float(ye[0]), float(ye[1]),
                                    H.evaluate(float(ye[0]), float(ye[1])))
                )
    else:
        # solver gave up (typically step underflow against a collapse)
        if sol.t.size == 0:
            raise NumericalFailure(f"integration failed at t = 0: {sol.message}", {})
        t_last = float(sol.t[-1])
        p_last, q_last = float(sol.y[0, -1]), float(sol.y[1, -1])
        if H.q_positive:
            recorded.append(
                TrajectoryEvent(t_last, "singularity_hit", p_last, q_last,
                                H.evaluate(p_last, q_last))
            )
        else:
            raise NumericalFailure(
                f"integration failed at t = {t_last}: {sol.message}",
                {"t": t_last, "p": p_last, "q": q_last},
            )

    ts = np.asarray(sol.t, dtype=float)
    ps = np.asarray(sol.y[0], dtype=float)
    qs = np.asarray(sol.y[1], dtype=float)
    energies = np.array([H.evaluate(p, q) for p, q in zip(ps, qs)])
    recorded.sort(key=lambda e: e.time)
    return Trajectory(ts, ps, qs, energies, tuple(recorded))


def _leapfrog_flow(H, x0, t_final, n_samples, q_floor, n_steps):
    # Kick-drift-kick with the full gradient; symplectic only when H is
    # separable, which is the advertised contract of this backend.
    if n_steps is None:
        n_steps = max(20 * n_samples, 10000)
    dt = t_final / n_steps
    stride = max(1, n_steps // (n_samples - 1))
    p, q = x0.p, x0.q
    ts, ps, qs = [0.0], [p], [q]
    events = []
    prev_qdot = H.gradient(p, q)[0]
    for k in range(1, n_steps + 1):
        p -= 0.5 * dt * H.gradient(p, q)[1]
        q += dt * H.gradient(p, q)[0]
        p -= 0.5 * dt * H.gradient(p, q)[1]
        t = k * dt
        if H.q_positive and q <= q_floor:
            q_clamped = max(q, q_floor)
            events.append(
                TrajectoryEvent(t, "singularity_hit", p, q_clamped, H.evaluate(p, q_clamped))
            )
            break
        if H.label_domain is not None and H.label_domain(p, q) <= 0:
            events.append(TrajectoryEvent(t, "domain_exit", p, q, H.evaluate(p, q)))
            break
        qdot = H.gradient(p, q)[0]
        if prev_qdot < 0.0 <= qdot:
            events.append(TrajectoryEvent(t, "bounce", p, q, H.evaluate(p, q)))
        prev_qdot = qdot
        if k % stride == 0 or k == n_steps:
            if t > ts[-1]:
                ts.append(t)
                ps.append(p)
                qs.append(q)
    energies = np.array([H.evaluate(pp, qq) for pp, qq in zip(ps, qs)])
    return Trajectory(np.array(ts), np.array(ps), np.array(qs), energies, tuple(events))


# ---------------------------------------------------------------------------
# Canonical transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CanonicalTransform:
    """A forward/inverse relabeling pair with optional generator check.

    ``forward`` maps ``(p, q)`` to ``(p~, q~)``; ``generator``, when given,
    is the function of the new labels whose endpoint difference accounts for
    ``integral(p dq) - integral(p~ dq~)``.  ``jacobian``, when given, returns
    the 2x2 Jacobian of ``forward`` and is used for exact chain-rule
    gradients of transformed Hamiltonians.
    """

    forward: object
    inverse: object
    generator: object = None
    jacobian: object = None
    name: str = ""

    def check_on(self, points, roundtrip_tol=_TRANSFORM_ROUNDTRIP_TOL,
                 jacobian_tol=_TRANSFORM_JACOBIAN_TOL):
        """Verify round trip and unit Jacobian determinant on sample points."""
        for pt in points:
            p, q = pt.p, pt.q
            pt2, qt2 = self.forward(p, q)
            p2, q2 = self.inverse(pt2, qt2)
            err = max(abs(p2 - p), abs(q2 - q))
            scale = max(1.0, abs(p), abs(q))
            if err > roundtrip_tol * scale:
                raise InvalidTransformError(
                    f"inverse mismatch at (p, q) = ({p}, {q}): round-trip error {err:.3e}"
                )
            det = np.linalg.det(self._jacobian_at(p, q))
            if abs(det - 1.0) > jacobian_tol:
                raise InvalidTransformError(
                    f"transform does not preserve dp^dq at ({p}, {q}): det J = {det!r}"
                )

    def _jacobian_at(self, p, q, h=1e-6):
        if self.jacobian is not None:
            return np.asarray(self.jacobian(p, q), dtype=float)
        hp = h * max(1.0, abs(p))
        hq = h * max(1.0, abs(q))
        fp = np.array(self.forward(p + hp, q)) - np.array(self.forward(p - hp, q))
        fq = np.array(self.forward(p, q + hq)) - np.array(self.forward(p, q - hq))
        return np.column_stack([fp / (2 * hp), fq / (2 * hq)])


def rotation_transform() -> CanonicalTransform:
    """Quarter-turn relabeling ``(p~, q~) = (-q, p)`` with generator ``-p~ q~``."""
    return CanonicalTransform(
        forward=lambda p, q: (-q, p),
        inverse=lambda pt, qt: (qt, -pt),
        generator=lambda pt, qt: -pt * qt,
        jacobian=lambda p, q: ((0.0, -1.0), (1.0, 0.0)),
        name="rotation",
    )


def scaling_transform(lam: float) -> CanonicalTransform:
    """Area-preserving scaling ``(p~, q~) = (lam p, q / lam)``; generator zero."""
    if lam == 0:
        raise ValueError("scaling factor must be nonzero")
    return CanonicalTransform(
        forward=lambda p, q: (lam * p, q / lam),
        inverse=lambda pt, qt: (pt / lam, lam * qt),
        generator=lambda pt, qt: 0.0,
        jacobian=lambda p, q: ((lam, 0.0), (0.0, 1.0 / lam)),
        name=f"scaling({lam})",
    )


def apply_transform(tr: CanonicalTransform, obj):
    """Relabel a phase point or a whole trajectory; no state-level change.

    The transform's invariants (round trip, unit Jacobian) are verified on
    the object's support and an :class:`InvalidTransformError` is raised if
    they fail.
    """
    if isinstance(obj, PhasePoint):
        tr.check_on([obj])
        pt, qt = tr.forward(obj.p, obj.q)
        return PhasePoint(float(pt), float(qt), obj.t)
    if isinstance(obj, Trajectory):
        support = list(obj.points())
        probe = support[:: max(1, len(support) // 16)]
        tr.check_on(probe)
        pts = np.array([tr.forward(p, q) for p, q in zip(obj.p, obj.q)])
        events = tuple(
            TrajectoryEvent(e.time, e.kind, *map(float, tr.forward(e.p, e.q)), e.energy)
            for e in obj.events
        )
        return Trajectory(obj.t, pts[:, 0], pts[:, 1], obj.energy, events)
    raise TypeError(f"cannot transform object of type {type(obj).__name__}")


def transform_hamiltonian(H: EnhancedHamiltonian, tr: CanonicalTransform) -> EnhancedHamiltonian:
    """Express ``H`` in the new labels: ``H~(p~, q~) = H(p, q)``.

    The gradient uses the exact chain rule when the transform carries a
    Jacobian, otherwise finite differences of the composite.  Domain flags
    are composed through the inverse map.
    """

    def evaluate(pt, qt):
        return H.evaluate(*tr.inverse(pt, qt))

    gradient = None
    if tr.jacobian is not None:
        def gradient(pt, qt):
            p, q = tr.inverse(pt, qt)
            g = np.array(H.gradient(p, q))
            j_inv = np.linalg.inv(tr._jacobian_at(p, q))
            out = j_inv.T @ g
            return float(out[0]), float(out[1])

    label_domain = None
    if H.q_positive or H.label_domain is not None:
        def label_domain(pt, qt):
            p, q = tr.inverse(pt, qt)
            margin = q if H.q_positive else np.inf
            if H.label_domain is not None:
                margin = min(margin, H.label_domain(p, q))
            return margin

    return EnhancedHamiltonian(
        evaluate,
        gradient,
        hbar=H.hbar,
        provenance=H.provenance,
        label_domain=label_domain,
    )


# ---------------------------------------------------------------------------
# Action functionals
# ---------------------------------------------------------------------------

def line_integral_p_dq(trajectory: Trajectory) -> float:
    """Trapezoid value of ``integral p dq`` along the samples."""
    p, q = trajectory.p, trajectory.q
    return float(np.sum(0.5 * (p[1:] + p[:-1]) * np.diff(q)))


def _time_derivative(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    # Fourth-order interior stencil on a uniform grid, third-order one-sided
    # stencils at the edges.
    n = y.size
    if n < 6:
        return np.gradient(y, t, edge_order=2)
    dt = t[1] - t[0]
    if np.max(np.abs(np.diff(t) - dt)) > 1e-9 * abs(dt):
        return np.gradient(y, t, edge_order=2)
    out = np.empty_like(y)
    out[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * dt)
    for i in (0, 1):
        out[i] = (-11 * y[i] + 18 * y[i + 1] - 9 * y[i + 2] + 2 * y[i + 3]) / (6 * dt)
    for i in (n - 2, n - 1):
        out[i] = (11 * y[i] - 18 * y[i - 1] + 9 * y[i - 2] - 2 * y[i - 3]) / (6 * dt)
    return out


def restricted_action_value(H: EnhancedHamiltonian, trajectory: Trajectory) -> float:
    """Quadrature of ``integral [p qdot - H(p, q)] dt`` over the samples.

    ``qdot`` is obtained by differentiating the sampled ``q(t)``, so the
    value is meaningful for perturbed (off-shell) label histories as well;
    along true orbits the value is first-order stationary against smooth
    perturbations vanishing at the endpoints.
    """
    if len(trajectory) < 16:
        raise ValueError("trajectory is sampled too sparsely for quadrature (need >= 16 samples)")
    qdot = _time_derivative(trajectory.q, trajectory.t)
    integrand = trajectory.p * qdot - trajectory.energy
    return float(np.trapezoid(integrand, trajectory.t))


@dataclass(frozen=True)
class TransformActionReport:
    """Comparison of ``integral p dq`` across a relabeling."""

    integral_original: float
    integral_transformed: float
    generator_difference: float | None
    residual: float


def verify_transform_action(tr: CanonicalTransform, trajectory: Trajectory) -> TransformActionReport:
    """Check ``integral p dq - integral p~ dq~`` against the generator.

    With a generator supplied the difference must equal its endpoint
    difference; without one the two loop integrals are compared directly,
    which is valid on (numerically) closed orbits.
    """
    transformed = apply_transform(tr, trajectory)
    i1 = line_integral_p_dq(trajectory)
    i2 = line_integral_p_dq(transformed)
    if tr.generator is not None:
        g_end = tr.generator(transformed.p[-1], transformed.q[-1])
        g_start = tr.generator(transformed.p[0], transformed.q[0])
        delta = float(g_end - g_start)
        return TransformActionReport(i1, i2, delta, float((i1 - i2) - delta))
    return TransformActionReport(i1, i2, None, float(i1 - i2))
