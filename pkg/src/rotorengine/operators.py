"""Operator algebra for a qubit coupled to a planar rotor.

Everything lives in the angular-momentum eigenbasis of the rotor,
truncated to a finite window of integer quantum numbers.  The window is
hard: the raising operator exp(i*phi) annihilates the topmost basis
state instead of wrapping around, so commutation relations that hold on
the infinite lattice acquire edge defects confined to the first and
last basis states.  Callers are expected to monitor edge population and
keep their states away from the boundary.

Units: hbar = 1 throughout.  Angular momentum is measured in hbar,
angles in radians.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse


class TruncationError(ValueError):
    """State support exceeds what the truncated rotor basis can hold."""


@dataclass(frozen=True)
class RotorBasis:
    """Window [l_min, l_max] of integer angular-momentum quantum numbers."""

    l_min: int
    l_max: int

    def __post_init__(self):
        if not (self.l_min < 0 < self.l_max):
            raise ValueError(
                f"basis window must straddle l = 0, got [{self.l_min}, {self.l_max}]"
            )
        if self.dim < 3:
            raise ValueError("basis needs at least 3 states")

    @property
    def dim(self) -> int:
        return self.l_max - self.l_min + 1

    @cached_property
    def l_values(self) -> np.ndarray:
        return np.arange(self.l_min, self.l_max + 1)

    def index_of(self, l: int) -> int:
        if not (self.l_min <= l <= self.l_max):
            raise ValueError(f"l = {l} outside window [{self.l_min}, {self.l_max}]")
        return l - self.l_min


@dataclass(frozen=True)
class RotorOperators:
    """Sparse rotor operators on a truncated momentum window.

    raise_phase is exp(i*phi): <l|exp(i*phi)|l'> = delta_{l,l'+1}, with the
    top edge annihilated.  cos_phi and sin_phi are the Hermitian
    combinations; cos^2 + sin^2 = 1 holds except in the first and last
    row/column, and [cos_phi, L] = -i*sin_phi away from the edges.
    """

    basis: RotorBasis
    L: sparse.csr_matrix
    raise_phase: sparse.csr_matrix
    cos_phi: sparse.csr_matrix
    sin_phi: sparse.csr_matrix

    @cached_property
    def kinetic_diag(self) -> np.ndarray:
        """Diagonal of L^2 (kinetic energy is this over 2I)."""
        return self.basis.l_values.astype(float) ** 2


def rotor_operators(basis: RotorBasis) -> RotorOperators:
    d = basis.dim
    lv = basis.l_values.astype(float)
    L = sparse.diags(lv).tocsr()
    # shift |l> -> |l+1>: ones on the first subdiagonal
    up = sparse.diags(np.ones(d - 1), offsets=-1).tocsr()
    cos_phi = ((up + up.conj().T) / 2).tocsr()
    sin_phi = ((up - up.conj().T) / (2j)).tocsr()
    return RotorOperators(basis=basis, L=L, raise_phase=up, cos_phi=cos_phi, sin_phi=sin_phi)


# ---------- qubit factor ----------

SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |g><e|
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)   # |e><g|
PROJ_EXCITED = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
PROJ_GROUND = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)


def kron(a, b):
    """Composite-space operator, qubit factor first: (2, D) ordering."""
    if sparse.issparse(a) or sparse.issparse(b):
        return sparse.kron(a, b, format="csr")
    return np.kron(a, b)


def dissipator_apply(a, rho: np.ndarray) -> np.ndarray:
    """D[A] rho = A rho A^dag - {A^dag A, rho} / 2."""
    if sparse.issparse(a):
        # right-multiplication via conjugate transposes keeps results ndarray
        tmp = a @ rho
        sand = (a @ tmp.conj().T).conj().T
        ada = (a.conj().T @ a).tocsr()
        anti = ada @ rho + (ada @ rho.conj().T).conj().T
        return sand - 0.5 * anti
    tmp = a @ rho
    ada = a.conj().T @ a
    return tmp @ a.conj().T - 0.5 * (ada @ rho + rho @ ada)


# ---------- bath coupling windows ----------
# Hot contact opens once per turn around phi = pi/2; cold contact is
# always on.  Primes are angle derivatives.

def f_hot(phi):
    return (1.0 + np.sin(phi)) / 2.0


def f_cold(phi):
    return np.ones_like(np.asarray(phi, dtype=float)) if np.ndim(phi) else 1.0


def f_hot_prime(phi):
    return np.cos(phi) / 2.0


def f_cold_prime(phi):
    return np.zeros_like(np.asarray(phi, dtype=float)) if np.ndim(phi) else 0.0


def coupling_functions(phi):
    """(f_h, f_c, f_h', f_c') evaluated at a scalar or array angle."""
    return f_hot(phi), f_cold(phi), f_hot_prime(phi), f_cold_prime(phi)


@dataclass(frozen=True)
class CouplingOperators:
    """Operator-valued coupling windows built from truncated rotor operators."""

    f_h: sparse.csr_matrix
    f_c: sparse.csr_matrix
    f_h_prime: sparse.csr_matrix
    f_c_prime: sparse.csr_matrix


def coupling_operators(ops: RotorOperators) -> CouplingOperators:
    d = ops.basis.dim
    eye = sparse.identity(d, format="csr", dtype=complex)
    f_h = ((eye + ops.sin_phi) / 2).tocsr()
    f_h_prime = (ops.cos_phi / 2).tocsr()
    zero = sparse.csr_matrix((d, d), dtype=complex)
    return CouplingOperators(f_h=f_h, f_c=eye, f_h_prime=f_h_prime, f_c_prime=zero)


# ---------- density-matrix hygiene ----------

def check_density_matrix(rho: np.ndarray, *, trace_tol=1e-9, herm_tol=1e-10,
                         psd_tol=1e-10, check_psd=False) -> None:
    """Raise if rho is not a physical state within tolerance."""
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"trace {tr} deviates from 1 beyond {trace_tol}")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValueError("state is not Hermitian within tolerance")
    if check_psd:
        w = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
        if w.min() < -psd_tol:
            raise ValueError(f"negative eigenvalue {w.min():.3e}")


# ---------- modified Bessel ratios and the von Mises packet ----------

def bessel_ratio_profile(x: float, n_max: int) -> np.ndarray:
    """I_n(x) for n = 0..n_max up to a common positive factor.

    Backward (Miller) recurrence: seed far above n_max, recur down with
    I_{k-1} = I_{k+1} + (2k/x) I_k, rescaling to dodge overflow.  Only
    ratios survive, which is all the von Mises construction needs; the
    start order is doubled until the profile stops moving.
    """
    if x < 0:
        raise ValueError("order profile defined for x >= 0")
    if x == 0.0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out

    def sweep(start: int) -> np.ndarray:
        vals = np.zeros(start + 2)
        vals[start] = 1e-280
        for k in range(start, 0, -1):
            nxt = vals[k + 1] + (2.0 * k / x) * vals[k]
            if nxt > 1e260:
                vals *= 1e-260
                nxt = vals[k + 1] + (2.0 * k / x) * vals[k]
            vals[k - 1] = nxt
        head = vals[: n_max + 1].copy()
        return head / head.max()

    start = n_max + 16 + int(np.ceil(2.0 * np.sqrt(max(x, 1.0))))
    prof = sweep(start)
    while True:
        start *= 2
        again = sweep(start)
        if np.allclose(again, prof, rtol=1e-13, atol=0.0):
            return again
        prof = again


def von_mises_state(mu_phi: float, sigma_phi_sq: float, basis: RotorBasis,
                    deficit_tol: float = 1e-6):
    """Localized rotor packet psi(phi) ~ exp(cos(phi - mu)/(2 sigma^2)).

    Returns (amplitudes, norm_deficit): momentum-basis coefficients
    c_l ~ exp(-i l mu) I_l(1/(2 sigma^2)), normalized on the window, and
    the probability weight the truncation discarded.  Raises
    TruncationError when the discarded weight exceeds deficit_tol.
    """
    if sigma_phi_sq <= 0:
        raise ValueError("sigma_phi_sq must be positive")
    x = 1.0 / (2.0 * sigma_phi_sq)
    n_lo, n_hi = abs(basis.l_min), abs(basis.l_max)
    # profile long enough that the discarded tail is resolved
    n_tail = max(n_lo, n_hi) + 8 + int(np.ceil(4.0 * np.sqrt(x) + 0.05 * x))
    prof = bessel_ratio_profile(x, n_tail)
    sq = prof**2
    total = sq[0] + 2.0 * sq[1:].sum()
    lv = basis.l_values
    in_window = sq[np.abs(lv)].sum()
    deficit = 1.0 - in_window / total
    if deficit > deficit_tol:
        raise TruncationError(
            f"von Mises packet loses {deficit:.3e} probability on "
            f"[{basis.l_min}, {basis.l_max}] (tol {deficit_tol:.1e})"
        )
    amps = prof[np.abs(lv)] * np.exp(-1j * lv * mu_phi)
    amps = amps / np.linalg.norm(amps)
    return amps, deficit
