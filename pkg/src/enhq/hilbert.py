"""Finite-dimensional operator representations for the line, the half line, and spin.

Three concrete representations are provided:

* :class:`LineRep` realizes position ``Q``, momentum ``P``, and the dilation
  generator ``D = (PQ + QP)/2`` in a truncated Fock basis, so that
  ``[Q, P] = i*hbar`` holds exactly away from the truncation edge.
* :class:`HalfLineRep` realizes ``Q`` (diagonal) and ``D`` on a strictly
  positive grid, where ``D`` is the symmetric discretization of
  ``-i*hbar*(x d/dx + 1/2)``.  Momentum on the half line is exposed only as a
  formal finite-difference matrix and is never exponentiated.
* :class:`SpinRep` carries the standard ladder construction of ``S1, S2, S3``
  with ``[S1, S2] = i*hbar*S3`` and the Casimir identity exact.

All objects are immutable after construction (arrays are marked read only)
and every operation here is a pure function, so representations and states
may be shared freely across threads.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh

from .errors import DomainError

#: Relative Frobenius asymmetry accepted before an operator is rejected as
#: non-Hermitian.  Below this threshold operators are symmetrized silently.
HERMITIAN_TOL = 1e-10

#: Number of Fock levels at the truncation edge treated as unreliable.
DEFAULT_TRUNCATION_MARGIN = 20

#: Largest matrix that apply_unitary will densify and diagonalize.
_MAX_DENSE_DIM = 4096


def _as_dense(op):
    return op.toarray() if sp.issparse(op) else np.asarray(op)


def hermitian_defect(op) -> float:
    """Return the relative Frobenius asymmetry ``||A - A^dag|| / ||A||``."""
    a = _as_dense(op)
    den = np.linalg.norm(a)
    if den == 0.0:
        return 0.0
    return float(np.linalg.norm(a - a.conj().T) / den)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class StateVector:
    """Complex unit vector in the basis of an owning representation.

    Amplitudes are normalized at construction; the resulting array is read
    only.  For grid representations the quadrature weights are already folded
    into the amplitudes, so plain Euclidean inner products realize the
    half-line inner product.
    """

    __slots__ = ("amplitudes", "rep")

    def __init__(self, amplitudes, rep):
        a = np.asarray(amplitudes, dtype=complex)
        if a.ndim != 1:
            raise ValueError("amplitudes must be a one-dimensional array")
        if a.shape[0] != rep.dim:
            raise ValueError(
                f"amplitude length {a.shape[0]} does not match representation dim {rep.dim}"
            )
        n = np.linalg.norm(a)
        if not np.isfinite(n) or n == 0.0:
            raise ValueError("cannot normalize a zero or non-finite amplitude vector")
        self.amplitudes = _frozen(a / n)
        self.rep = rep

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]


class LineRep:
    """Truncated Fock-basis representation for one canonical degree of freedom.

    Attributes
    ----------
    dim : int
        Basis size.
    hbar : float
        Value of the action quantum; ``Q`` and ``P`` carry units of
        ``sqrt(hbar)``, ``D`` units of ``hbar``.
    Q, P, D : ndarray
        Dense complex Hermitian matrices, with ``D = (PQ + QP)/2`` exactly
        as constructed.
    """

    kind = "line"

    def __init__(self, dim, hbar, Q, P, D):
        self.dim = int(dim)
        self.hbar = float(hbar)
        self.Q = _frozen(Q)
        self.P = _frozen(P)
        self.D = _frozen(D)
        self._eig_cache = {}
        self._op_cache = {}

    def basis_state(self, n: int) -> StateVector:
        if not 0 <= n < self.dim:
            raise ValueError(f"basis index {n} out of range for dim {self.dim}")
        a = np.zeros(self.dim, dtype=complex)
        a[n] = 1.0
        return StateVector(a, self)

    def vacuum(self) -> StateVector:
        return self.basis_state(0)

    def quadrature_square(self) -> np.ndarray:
        """``P @ P + Q @ Q``, cached; the oscillator generator used by squeezed states."""
        op = self._op_cache.get("quad2")
        if op is None:
            op = _frozen(self.P @ self.P + self.Q @ self.Q)
            self._op_cache["quad2"] = op
        return op

    def _cacheable_ops(self):
        return (self.Q, self.P, self.D) + tuple(self._op_cache.values())


class HalfLineRep:
    """Grid representation of the ``Q > 0`` sector.

    ``Q`` is diagonal with the grid values.  ``D`` is a banded antisymmetric
    finite-difference matrix times ``-i*hbar`` and is therefore Hermitian by
    construction with respect to the weight-folded inner product.  ``P_formal``
    is the formal momentum ``Q^{-1} (D + i*hbar/2)``; it is not self adjoint
    on the half line and is never exponentiated.
    """

    kind = "halfline"

    def __init__(self, grid, weights, hbar, Q, D, P_formal, spacing):
        self.grid = _frozen(np.asarray(grid, dtype=float))
        self.weights = _frozen(np.asarray(weights, dtype=float))
        self.hbar = float(hbar)
        self.Q = Q
        self.D = D
        self.P_formal = P_formal
        self.spacing = spacing
        self._eig_cache = {}

    @property
    def dim(self) -> int:
        return self.grid.shape[0]

    def state_from_samples(self, values) -> StateVector:
        """Fold quadrature weights into wavefunction samples and normalize."""
        v = np.asarray(values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValueError("sample array does not match the grid")
        return StateVector(v * np.sqrt(self.weights), self)

    def _cacheable_ops(self):
        return ()


class SpinRep:
    """Irreducible spin-``s`` representation with ``S3`` diagonal, ``m`` descending."""

    kind = "spin"

    def __init__(self, s, hbar, S1, S2, S3):
        self.s = float(s)
        self.hbar = float(hbar)
        self.S1 = _frozen(S1)
        self.S2 = _frozen(S2)
        self.S3 = _frozen(S3)
        self.dim = S3.shape[0]
        self._eig_cache = {}

    def highest_weight(self) -> StateVector:
        """The extremal state ``|s, s>``, annihilated by ``S1 + i S2``."""
        a = np.zeros(self.dim, dtype=complex)
        a[0] = 1.0
        return StateVector(a, self)

    def _cacheable_ops(self):
        return (self.S1, self.S2, self.S3)


def build_fock_rep(dim: int, hbar: float = 1.0) -> LineRep:
    """Build ``Q``, ``P``, ``D`` in a truncated Fock basis.

    ``Q = sqrt(hbar/2)(A + A^dag)`` and ``P = i sqrt(hbar/2)(A^dag - A)``
    with ``A`` the truncated lowering matrix; ``D = (PQ + QP)/2``.  The
    commutator ``[Q, P] - i*hbar`` vanishes exactly on every basis state
    except the last one.
    """
    if int(dim) != dim or dim < 2:
        raise ValueError("dim must be an integer >= 2")
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    dim = int(dim)
    lower = np.zeros((dim, dim))
    idx = np.arange(1, dim)
    lower[idx - 1, idx] = np.sqrt(idx)
    scale = np.sqrt(hbar / 2.0)
    q = (scale * (lower + lower.T)).astype(complex)
    p = 1j * scale * (lower.T - lower)
    d = 0.5 * (p @ q + q @ p)
    return LineRep(dim, hbar, q, p, d)


def _antisymmetric_derivative(n: int, step: float) -> sp.csr_matrix:
    # Five-point central stencil.  The matrix is exactly antisymmetric, so
    # -i*hbar times it is Hermitian regardless of boundary truncation.
    m = sp.diags(
        [np.full(n - 2, 1.0), np.full(n - 1, -8.0), np.full(n - 1, 8.0), np.full(n - 2, -1.0)],
        [-2, -1, 1, 2],
        format="csr",
    )
    return m / (12.0 * step)


def build_halfline_rep(
    x_min: float,
    x_max: float,
    n: int,
    hbar: float = 1.0,
    spacing: str = "geometric",
) -> HalfLineRep:
    """Build ``Q`` and ``D`` on a strictly positive grid.

    Parameters
    ----------
    x_min, x_max : float
        Grid bounds, ``0 < x_min < x_max``.  ``Q`` is treated as
        dimensionless (reference scale fixed to one).
    n : int
        Number of grid points, at least 16.
    spacing : {"geometric", "linear"}
        Geometric (log-spaced) grids are the default: the dilation generator
        acts multiplicatively there and the fiducial states of interest decay
        exponentially.

    Notes
    -----
    On the geometric grid the amplitudes are half-density samples in
    ``u = log x``, where ``D`` reduces to ``-i*hbar d/du``; on a linear grid
    ``D`` is assembled as the symmetrized product ``(Q P + P Q)/2`` of the
    diagonal position matrix with the finite-difference momentum.
    """
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    if x_min <= 0:
        raise DomainError("the Q > 0 sector requires strictly positive support: x_min must be > 0")
    if x_max <= x_min:
        raise ValueError("x_max must exceed x_min")
    if int(n) != n or n < 16:
        raise ValueError("n must be an integer >= 16")
    n = int(n)

    if spacing == "geometric":
        u = np.linspace(np.log(x_min), np.log(x_max), n)
        du = u[1] - u[0]
        x = np.exp(u)
        w = x * du
        w[0] *= 0.5
        w[-1] *= 0.5
        deriv = _antisymmetric_derivative(n, du)
        d_op = (-1j * hbar) * deriv
        p_formal = sp.diags(1.0 / x).dot(d_op + (0.5j * hbar) * sp.identity(n))
    elif spacing == "linear":
        x = np.linspace(x_min, x_max, n)
        dx = x[1] - x[0]
        w = np.full(n, dx)
        w[0] *= 0.5
        w[-1] *= 0.5
        deriv = _antisymmetric_derivative(n, dx)
        p_formal = (-1j * hbar) * deriv
        q_op = sp.diags(x)
        d_op = 0.5 * (q_op.dot(p_formal) + p_formal.dot(q_op))
    else:
        raise ValueError(f"unknown spacing {spacing!r}")

    q_op = sp.diags(x, format="csr")
    return HalfLineRep(x, w, hbar, q_op, d_op.tocsr(), p_formal.tocsr(), spacing)


def build_spin_rep(s: float, hbar: float = 1.0) -> SpinRep:
    """Build ``S1, S2, S3`` for spin ``s`` via the standard ladder construction.

    ``S3`` is diagonal with eigenvalues ``m*hbar`` ordered with ``m``
    descending, so the first basis vector is the extremal state ``|s, s>``.
    """
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    two_s = 2.0 * s
    if abs(two_s - round(two_s)) > 1e-12 or round(two_s) < 1:
        raise ValueError("2*s must be a positive integer")
    s = round(two_s) / 2.0
    dim = int(round(two_s)) + 1
    m = s - np.arange(dim)
    s3 = np.diag((hbar * m).astype(complex))
    raising = np.zeros((dim, dim), dtype=complex)
    # S+ maps |m> to |m+1>; with m descending that is row i-1, column i.
    for i in range(1, dim):
        mi = m[i]
        raising[i - 1, i] = hbar * np.sqrt(s * (s + 1) - mi * (mi + 1))
    s1 = 0.5 * (raising + raising.conj().T)
    s2 = -0.5j * (raising - raising.conj().T)
    return SpinRep(s, hbar, s1, s2, s3)


def expectation(state: StateVector, op) -> complex:
    """Return ``<psi| op |psi>``.

    The imaginary part is a roundoff-level residual whenever ``op`` is
    Hermitian; callers that know this take the real part themselves.
    """
    a = state.amplitudes
    if op.shape != (a.size, a.size):
        raise ValueError(
            f"operator shape {op.shape} does not match state dimension {a.size}"
        )
    return complex(np.vdot(a, op @ a))


def variance(state: StateVector, op) -> float:
    """Variance ``<op^2> - <op>^2`` for a Hermitian operator."""
    w = op @ state.amplitudes
    mean = np.real(np.vdot(state.amplitudes, w))
    return float(np.real(np.vdot(w, w)) - mean * mean)


def apply_unitary(op, theta: float, state: StateVector) -> StateVector:
    """Apply ``exp(-i * theta * op / hbar)`` to a state.

    The operator must be Hermitian within :data:`HERMITIAN_TOL` (relative
    Frobenius norm); below that threshold it is symmetrized rather than
    rejected.  Eigendecompositions of operators owned by the representation
    are cached, so repeated applications are cheap.
    """
    rep = state.rep
    d = state.dim
    cache = rep._eig_cache
    key = id(op)
    pair = cache.get(key)
    if pair is None:
        if sp.issparse(op) and op.shape[0] > _MAX_DENSE_DIM:
            raise ValueError(
                f"operator of dimension {op.shape[0]} is too large to exponentiate densely"
            )
        dense = _as_dense(op)
        if dense.shape != (d, d):
            raise ValueError(f"operator shape {dense.shape} does not match state dimension {d}")
        defect = hermitian_defect(dense)
        if defect > HERMITIAN_TOL:
            raise ValueError(f"operator is not Hermitian (relative defect {defect:.3e})")
        herm = 0.5 * (dense + dense.conj().T)
        w, v = eigh(herm)
        pair = (w, v)
        if any(op is cand for cand in rep._cacheable_ops()):
            cache[key] = pair
    w, v = pair
    phases = np.exp(-1j * theta * w / rep.hbar)
    out = v @ (phases * (v.conj().T @ state.amplitudes))
    return StateVector(out, rep)


def commutator_defect(rep: LineRep, margin: int = DEFAULT_TRUNCATION_MARGIN) -> float:
    """Frobenius norm of ``[Q, P] - i*hbar`` projected on the first ``dim - margin`` states."""
    if margin < 1 or margin >= rep.dim:
        raise ValueError("margin must satisfy 1 <= margin < dim")
    m = rep.dim - margin
    c = rep.Q @ rep.P - rep.P @ rep.Q - 1j * rep.hbar * np.eye(rep.dim)
    return float(np.linalg.norm(c[:m, :m]))
