"""Autonomous engine: qubit and planar rotor as one closed control loop.

The rotor angle gates the thermal contacts (hot window (1+sin phi)/2,
cold contact always on) while the qubit pushes back on the rotor
through the interaction torque, so the machine needs no external
clock.  The composite state is propagated under a Lindblad generator
whose jump operators carry the angle dependence; every power, heat and
entropy functional reported here is a trace against that same
generator, never a separately coded formula, except where a closed
form exists and is cross-checked.

Conventions: hbar = 1, kappa sets the unit of time, the qubit gap
omega_0 never enters numerically (rotating frame; it survives only in
the symbolic heat/temperature ratios of the entropy accounting).
Composite ordering is (qubit, rotor) with the ground state first, so a
density matrix is 2D x 2D with D the rotor dimension.  States that are
diagonal in the qubit stay diagonal; the propagation exploits this by
carrying the two D x D rotor blocks (rho_gg, rho_ee).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, sparse
from scipy.sparse.linalg import spsolve

from .operators import (
    PROJ_EXCITED,
    RotorBasis,
    SIGMA_MINUS,
    SIGMA_PLUS,
    check_density_matrix,
    coupling_operators,
    dissipator_apply,
    kron,
    rotor_operators,
)

__all__ = [
    "AutonomousParams",
    "PowerReport",
    "ObservableTimeline",
    "build_generator",
    "evolve",
    "evolve_full_reference",
    "initial_state",
    "thermal_excitation",
    "backaction_heating",
    "intrinsic_power",
    "kinetic_power",
    "net_power",
    "ergotropy",
    "entropy_rates",
    "load_power",
    "power_report",
    "steady_state",
    "steady_state_sweep",
]

EDGE_GUARD = 5          # outermost momentum states monitored at each end
EDGE_POP_TOL = 1e-6     # beyond this the run is truncation-invalid


@dataclass(frozen=True)
class AutonomousParams:
    """Engine setting.  inertia is in hbar/kappa; kT_load in hbar*kappa.

    kT_load = None resolves to 10 hbar^2/I, the standard load
    temperature for this model.
    """

    basis: RotorBasis
    g: float = 10.0
    kappa: float = 1.0
    n_h: float = 1.0
    n_c: float = 0.1
    inertia: float = 10.0
    gamma: float = 0.0
    kT_load: float | None = None

    def __post_init__(self):
        if self.inertia <= 0:
            raise ValueError("inertia must be positive")
        if self.kappa < 0 or min(self.n_h, self.n_c) < 0:
            raise ValueError("bath rates and occupations must be non-negative")
        if self.gamma < 0:
            raise ValueError("load rate must be non-negative")
        if self.kT_load is None:
            object.__setattr__(self, "kT_load", 10.0 / self.inertia)
        if self.gamma > 0 and self.kT_load <= 0:
            raise ValueError("load temperature must be positive when the load is on")


@dataclass(frozen=True)
class PowerReport:
    """Snapshot of every engine figure of merit (units hbar=kappa=1)."""

    W_int_rate: float
    W_kin_rate: float
    W_net_rate: float
    Q_BA_rate: float
    W_erg_rate: float
    W_load_rate: float
    mean_L: float
    std_L: float
    S_sys_rate: float
    S_h_rate: float
    S_c_rate: float
    S_net_rate: float

    def scalars(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class ObservableTimeline:
    """Per-output-time observable record of one propagation.

    Field names double as the CSV column names of the run artifacts.
    snapshots holds a few (t, rho_gg, rho_ee) tuples for validation.
    """

    t_kappa: np.ndarray
    mean_L_hbar: np.ndarray
    std_L_hbar: np.ndarray
    W_int: np.ndarray
    W_kin: np.ndarray
    W_net: np.ndarray
    Q_BA: np.ndarray
    W_erg: np.ndarray
    W_erg_rate: np.ndarray
    S_sys_rate: np.ndarray
    S_h_rate: np.ndarray
    S_c_rate: np.ndarray
    S_net_rate: np.ndarray
    trace_err: np.ndarray
    edge_pop: np.ndarray
    truncation_valid: bool
    snapshots: list = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.t_kappa)


def _rmul(x: np.ndarray, m_t) -> np.ndarray:
    """x @ m given the precomputed transpose of sparse m."""
    return (m_t @ x.T).T


class Liouvillian:
    """Time-independent generator action, block and full-matrix forms.

    The block form is the workhorse; the full 2D x 2D form exists to
    validate that qubit coherences decouple and decay.
    """

    def __init__(self, params: AutonomousParams, include_load: bool = False):
        self.params = params
        self.include_load = bool(include_load)
        basis = params.basis
        self.dim = basis.dim
        ops = rotor_operators(basis)
        cpl = coupling_operators(ops)
        self.l_values = basis.l_values.astype(float)
        self.kinetic = self.l_values**2 / (2.0 * params.inertia)
        self.cos_phi = ops.cos_phi
        self.sin_phi = ops.sin_phi
        self._cos_T = ops.cos_phi.T.tocsr()
        self._sin_T = ops.sin_phi.T.tocsr()
        self.f_h = cpl.f_h
        self._f_h_T = cpl.f_h.T.tocsr()
        self.f_h2 = (cpl.f_h @ cpl.f_h).tocsr()
        self._f_h2_T = self.f_h2.T.tocsr()
        self.f_h_prime2 = (cpl.f_h_prime @ cpl.f_h_prime).tocsr()

        self._load = []
        if self.include_load and params.gamma > 0:
            alpha = 1.0 / (4.0 * params.kT_load * params.inertia)
            L = ops.L
            a1 = (ops.cos_phi - 1j * alpha * (ops.sin_phi @ L)).tocsr()
            a2 = (ops.sin_phi + 1j * alpha * (ops.cos_phi @ L)).tocsr()
            self.load_prefactor = 2.0 * params.kT_load * params.inertia * params.gamma
            for a in (a1, a2):
                ada = (a.conj().T @ a).tocsr()
                self._load.append((a.tocsr(), a.conj().tocsr(), ada, ada.T.tocsr()))
        else:
            self.load_prefactor = 0.0

    # ----- block actions -----

    def bath_blocks(self, gg: np.ndarray, ee: np.ndarray):
        """Dissipative part of both thermal contacts."""
        p = self.params
        k = p.kappa
        fee = _rmul(self.f_h @ ee, self._f_h_T)
        fgg = _rmul(self.f_h @ gg, self._f_h_T)
        ah_gg = self.f_h2 @ gg + _rmul(gg, self._f_h2_T)
        ah_ee = self.f_h2 @ ee + _rmul(ee, self._f_h2_T)
        dgg = (k * (p.n_h + 1) * fee + k * (p.n_c + 1) * ee
               - 0.5 * k * p.n_h * ah_gg - k * p.n_c * gg)
        dee = (k * p.n_h * fgg + k * p.n_c * gg
               - 0.5 * k * (p.n_h + 1) * ah_ee - k * (p.n_c + 1) * ee)
        return dgg, dee

    def bath_blocks_single(self, gg, ee, which: str):
        """One contact's dissipator alone (for heat-flow bookkeeping)."""
        p = self.params
        k = p.kappa
        if which == "hot":
            fee = _rmul(self.f_h @ ee, self._f_h_T)
            fgg = _rmul(self.f_h @ gg, self._f_h_T)
            ah_gg = self.f_h2 @ gg + _rmul(gg, self._f_h2_T)
            ah_ee = self.f_h2 @ ee + _rmul(ee, self._f_h2_T)
            dgg = k * (p.n_h + 1) * fee - 0.5 * k * p.n_h * ah_gg
            dee = k * p.n_h * fgg - 0.5 * k * (p.n_h + 1) * ah_ee
        elif which == "cold":
            dgg = k * (p.n_c + 1) * ee - k * p.n_c * gg
            dee = k * p.n_c * gg - k * (p.n_c + 1) * ee
        else:
            raise ValueError(f"unknown contact {which!r}")
        return dgg, dee

    def load_blocks(self, gg, ee):
        """Momentum-damping load dissipator, acting on the rotor factor."""
        if not self._load:
            z = np.zeros_like(gg)
            return z, z.copy()
        out = []
        for x in (gg, ee):
            acc = np.zeros_like(x)
            for a, a_conj, ada, ada_t in self._load:
                acc += _rmul(a @ x, a_conj)
                acc -= 0.5 * (ada @ x + _rmul(x, ada_t))
            out.append(self.load_prefactor * acc)
        return out[0], out[1]

    def unitary_blocks(self, gg, ee):
        kvec = self.kinetic
        dgg = -1j * (kvec[:, None] * gg - gg * kvec[None, :])
        dee = -1j * (kvec[:, None] * ee - ee * kvec[None, :])
        g = self.params.g
        if g != 0.0:
            dee += -1j * g * (self.cos_phi @ ee - _rmul(ee, self._cos_T))
        return dgg, dee

    def apply_blocks(self, gg, ee):
        dgg, dee = self.unitary_blocks(gg, ee)
        bgg, bee = self.bath_blocks(gg, ee)
        dgg += bgg
        dee += bee
        if self._load:
            lgg, lee = self.load_blocks(gg, ee)
            dgg += lgg
            dee += lee
        return dgg, dee

    def rest_blocks(self, gg, ee):
        """Everything except the free-rotor commutator (interaction frame)."""
        dgg, dee = self.bath_blocks(gg, ee)
        g = self.params.g
        if g != 0.0:
            dee += -1j * g * (self.cos_phi @ ee - _rmul(ee, self._cos_T))
        if self._load:
            lgg, lee = self.load_blocks(gg, ee)
            dgg += lgg
            dee += lee
        return dgg, dee

    # ----- full-matrix reference -----

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Dense composite action; validation path, not the hot loop."""
        p = self.params
        d = self.dim
        h = sparse.diags(np.concatenate([self.kinetic, self.kinetic])).tocsr()
        if p.g != 0.0:
            h = (h + p.g * kron(PROJ_EXCITED, self.cos_phi)).tocsr()
        out = -1j * (h @ rho - (h.T @ rho.T).T)
        jumps = [
            (p.kappa * (p.n_h + 1), kron(sparse.csr_matrix(SIGMA_MINUS), self.f_h)),
            (p.kappa * p.n_h, kron(sparse.csr_matrix(SIGMA_PLUS), self.f_h)),
            (p.kappa * (p.n_c + 1), kron(sparse.csr_matrix(SIGMA_MINUS),
                                         sparse.identity(d, format="csr"))),
            (p.kappa * p.n_c, kron(sparse.csr_matrix(SIGMA_PLUS),
                                   sparse.identity(d, format="csr"))),
        ]
        for rate, op in jumps:
            if rate > 0:
                out = out + rate * dissipator_apply(op, rho)
        for a, _, _, _ in self._load:
            full_a = kron(sparse.identity(2, format="csr"), a)
            out = out + self.load_prefactor * dissipator_apply(full_a, rho)
        return out


@lru_cache(maxsize=8)
def _cached_generator(params: AutonomousParams, include_load: bool) -> Liouvillian:
    return Liouvillian(params, include_load)


def build_generator(params: AutonomousParams, include_load: bool = False) -> Liouvillian:
    return _cached_generator(params, include_load)


# ---------- states ----------

def initial_state(basis: RotorBasis, *, excited: bool = True,
                  rotor_amps: np.ndarray | None = None):
    """(rho_gg, rho_ee) blocks for a product start.

    Default is the standard launch state: excited qubit, rotor at rest
    in l = 0.  rotor_amps overrides with an arbitrary pure rotor state.
    """
    d = basis.dim
    if rotor_amps is None:
        rotor_amps = np.zeros(d, dtype=complex)
        rotor_amps[basis.index_of(0)] = 1.0
    else:
        rotor_amps = np.asarray(rotor_amps, dtype=complex)
        rotor_amps = rotor_amps / np.linalg.norm(rotor_amps)
    pure = np.outer(rotor_amps, rotor_amps.conj())
    zero = np.zeros((d, d), dtype=complex)
    return (zero, pure) if excited else (pure, zero)


def thermal_excitation(n_h: float, n_c: float) -> float:
    """Angle-averaged two-bath excited population (hot window mean 3/8)."""
    return (0.375 * n_h + n_c) / (0.375 * (2 * n_h + 1) + (2 * n_c + 1))


def _as_blocks(rho, dim: int):
    if isinstance(rho, tuple):
        return rho
    rho = np.asarray(rho)
    if rho.shape != (2 * dim, 2 * dim):
        raise ValueError(f"expected composite {2*dim}x{2*dim} state, got {rho.shape}")
    return rho[:dim, :dim], rho[dim:, dim:]


def blocks_to_full(gg: np.ndarray, ee: np.ndarray) -> np.ndarray:
    d = gg.shape[0]
    out = np.zeros((2 * d, 2 * d), dtype=complex)
    out[:d, :d] = gg
    out[d:, d:] = ee
    return out


# ---------- power and heat functionals ----------

def _mean_sin_ee(gen: Liouvillian, ee: np.ndarray) -> float:
    return float(np.sum((gen.sin_phi @ ee).diagonal()).real)


def intrinsic_power(rho, params: AutonomousParams) -> float:
    """Torque-weighted momentum: (g/2I) <{L, sin phi} Pi_e>."""
    gen = build_generator(params)
    _, ee = _as_blocks(rho, gen.dim)
    diag = (gen.sin_phi @ ee).diagonal().real
    return float(params.g / params.inertia * np.dot(gen.l_values, diag))


def backaction_heating(rho, params: AutonomousParams, *,
                       closed_form: bool = False) -> float:
    """Kinetic-energy inflow from the thermal contacts alone.

    Default is the defining trace tr{(L^2/2I) (bath dissipators applied
    to rho)}, exact on the truncated window.  closed_form evaluates the
    equivalent local expression (hbar^2 kappa / 2I) sum_j tr{(n_j +
    Pi_e) f_j'^2 rho}, which matches away from the truncation edges;
    the cold contact drops out of it since f_c' = 0.
    """
    gen = build_generator(params)
    gg, ee = _as_blocks(rho, gen.dim)
    if closed_form:
        w_gg = (gen.f_h_prime2 @ gg).diagonal().sum().real
        w_ee = (gen.f_h_prime2 @ ee).diagonal().sum().real
        return float(params.kappa / (2.0 * params.inertia)
                     * (params.n_h * (w_gg + w_ee) + w_ee))
    dgg, dee = gen.bath_blocks(gg, ee)
    return float(np.dot(gen.kinetic, (dgg.diagonal() + dee.diagonal()).real))


def kinetic_power(rho, params: AutonomousParams) -> float:
    """d<L^2/2I>/dt under the no-load generator, as a direct trace."""
    gen = build_generator(params)
    gg, ee = _as_blocks(rho, gen.dim)
    dgg, dee = gen.unitary_blocks(gg, ee)
    bgg, bee = gen.bath_blocks(gg, ee)
    diag = (dgg + bgg).diagonal() + (dee + bee).diagonal()
    return float(np.dot(gen.kinetic, diag.real))


def net_power(rho, params: AutonomousParams) -> float:
    """Directed-motion part: <L/I> times the mean torque."""
    gen = build_generator(params)
    gg, ee = _as_blocks(rho, gen.dim)
    mean_l = float(np.dot(gen.l_values, (gg.diagonal() + ee.diagonal()).real))
    return mean_l / params.inertia * params.g * _mean_sin_ee(gen, ee)


def ergotropy(rho, params: AutonomousParams) -> float:
    """Unitary-extractable kinetic energy of the reduced rotor state.

    Populations sorted descending meet kinetic levels sorted ascending;
    the degenerate +/-l pairs are taken in ascending l, which cannot
    change the value.
    """
    gen = build_generator(params)
    gg, ee = _as_blocks(rho, gen.dim)
    rotor = gg + ee
    rotor = (rotor + rotor.conj().T) / 2
    pops = np.linalg.eigvalsh(rotor)[::-1]          # descending
    lv = gen.l_values
    order = np.lexsort((lv, gen.kinetic))           # ascending energy, then l
    energies = gen.kinetic[order]
    current = float(np.dot(gen.kinetic, rotor.diagonal().real))
    passive = float(np.dot(pops, energies))
    val = current - passive
    if val < -1e-10:
        raise RuntimeError(f"ergotropy came out negative: {val}")
    return max(val, 0.0)


def load_power(rho, params: AutonomousParams) -> float:
    """Energy drain into the momentum-damping load, -tr{(K + H_int) L_r rho}."""
    if params.gamma == 0:
        return 0.0
    gen = build_generator(params, include_load=True)
    gg, ee = _as_blocks(rho, gen.dim)
    dgg, dee = gen.load_blocks(gg, ee)
    val = np.dot(gen.kinetic, (dgg.diagonal() + dee.diagonal()).real)
    val += params.g * np.sum((gen.cos_phi @ dee).diagonal()).real
    return float(-val)


def _entropy_blocks(gg: np.ndarray, ee: np.ndarray) -> float:
    w = np.concatenate([
        np.linalg.eigvalsh((gg + gg.conj().T) / 2),
        np.linalg.eigvalsh((ee + ee.conj().T) / 2),
    ])
    w = w[w > 1e-14]
    return float(-np.dot(w, np.log(w)))


def _rk4_step(fun, gg, ee, dt):
    k1 = fun(gg, ee)
    k2 = fun(gg + 0.5 * dt * k1[0], ee + 0.5 * dt * k1[1])
    k3 = fun(gg + 0.5 * dt * k2[0], ee + 0.5 * dt * k2[1])
    k4 = fun(gg + dt * k3[0], ee + dt * k3[1])
    return (gg + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            ee + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))


def _bath_heat_flows(gen: Liouvillian, gg, ee):
    """tr{Pi_e L_j rho} per contact: excited-population flow, bare-gap heat."""
    flows = {}
    for which in ("hot", "cold"):
        _, dee = gen.bath_blocks_single(gg, ee, which)
        flows[which] = float(dee.diagonal().sum().real)
    return flows


def entropy_rates(rho, params: AutonomousParams, *, dt: float | None = None):
    """(S_sys_rate, S_h_rate, S_c_rate, S_net_rate) in k_B kappa.

    The system rate is a centered difference of the eigenvalue entropy
    across a short internal propagation.  Contact flow rates need no
    omega_0: the bare-gap heat and the bath temperature both carry it,
    so S_j = ln(1 + 1/n_j) * tr{Pi_e L_j rho} survives the cancellation
    (positive when the contact pumps entropy into the system).  The net
    rate subtracts both flows from the system rate.

    A zero-occupation contact has infinite inverse temperature: its
    flow is reported as 0 when it only drains heat, anything else
    raises.
    """
    gen = build_generator(params, include_load=params.gamma > 0)
    gg, ee = _as_blocks(rho, gen.dim)
    if dt is None:
        dt = 1e-3 / params.kappa if params.kappa > 0 else 1e-3
    fwd = _rk4_step(gen.apply_blocks, gg, ee, dt)
    bwd = _rk4_step(gen.apply_blocks, gg, ee, -dt)
    s_sys = (_entropy_blocks(*fwd) - _entropy_blocks(*bwd)) / (2 * dt)

    flows = _bath_heat_flows(gen, gg, ee)
    rates = {}
    for which, n in (("hot", params.n_h), ("cold", params.n_c)):
        q = flows[which]
        if n == 0:
            if q > 1e-12:
                raise ValueError(f"{which} contact at zero occupation absorbs heat")
            rates[which] = 0.0
        else:
            rates[which] = float(np.log1p(1.0 / n) * q)
    s_net = s_sys - rates["hot"] - rates["cold"]
    return float(s_sys), rates["hot"], rates["cold"], float(s_net)


def power_report(rho, params: AutonomousParams, *,
                 s_sys_rate: float | None = None,
                 w_erg_rate: float | None = None,
                 rate_dt: float = 1e-3) -> PowerReport:
    """Assemble every figure of merit for one state.

    Rates that need a time derivative are finite-differenced through a
    short internal propagation unless the caller supplies them (the
    timeline integrator does, from its own output triplets).
    """
    gen = build_generator(params, include_load=params.gamma > 0)
    gg, ee = _as_blocks(rho, gen.dim)
    pop = (gg.diagonal() + ee.diagonal()).real
    mean_l = float(np.dot(gen.l_values, pop))
    mean_l2 = float(np.dot(gen.l_values**2, pop))
    std_l = float(np.sqrt(max(mean_l2 - mean_l**2, 0.0)))

    if s_sys_rate is None or w_erg_rate is None:
        fwd = _rk4_step(gen.apply_blocks, gg, ee, rate_dt)
        bwd = _rk4_step(gen.apply_blocks, gg, ee, -rate_dt)
        if s_sys_rate is None:
            s_sys_rate = (_entropy_blocks(*fwd) - _entropy_blocks(*bwd)) / (2 * rate_dt)
        if w_erg_rate is None:
            w_erg_rate = (ergotropy(fwd, params) - ergotropy(bwd, params)) / (2 * rate_dt)

    flows = _bath_heat_flows(gen, gg, ee)
    s_h = np.log1p(1.0 / params.n_h) * flows["hot"] if params.n_h > 0 else 0.0
    s_c = np.log1p(1.0 / params.n_c) * flows["cold"] if params.n_c > 0 else 0.0
    return PowerReport(
        W_int_rate=intrinsic_power((gg, ee), params),
        W_kin_rate=kinetic_power((gg, ee), params),
        W_net_rate=net_power((gg, ee), params),
        Q_BA_rate=backaction_heating((gg, ee), params),
        W_erg_rate=float(w_erg_rate),
        W_load_rate=load_power((gg, ee), params),
        mean_L=mean_l,
        std_L=std_l,
        S_sys_rate=float(s_sys_rate),
        S_h_rate=float(s_h),
        S_c_rate=float(s_c),
        S_net_rate=float(s_sys_rate - s_h - s_c),
    )


# ---------- propagation ----------

def _integrate_blocks(gen: Liouvillian, gg0, ee0, t_eval, solver_tol):
    """March the interaction-frame blocks; yields states at t_eval.

    The free-rotor phases exp(-i l^2 t / 2I) are factored out of the
    state, which removes the dominant oscillation scale from the
    stepper; what remains is set by the contact rates and g.
    """
    d = gen.dim
    kvec = gen.kinetic
    n = d * d
    t0 = float(t_eval[0])
    s_eval = np.asarray(t_eval, dtype=float) - t0  # frame phases anchored at t0

    def rhs(s, y):
        u = np.exp(-1j * kvec * s)
        uc = u.conj()
        gg_t = y[:n].reshape(d, d)
        ee_t = y[n:].reshape(d, d)
        gg = (u[:, None] * gg_t) * uc[None, :]
        ee = (u[:, None] * ee_t) * uc[None, :]
        dgg, dee = gen.rest_blocks(gg, ee)
        dgg = (uc[:, None] * dgg) * u[None, :]
        dee = (uc[:, None] * dee) * u[None, :]
        return np.concatenate([dgg.ravel(), dee.ravel()])

    y0 = np.concatenate([gg0.ravel(), ee0.ravel()]).astype(complex)
    sol = integrate.solve_ivp(rhs, (0.0, s_eval[-1]), y0, t_eval=s_eval,
                              method="DOP853", rtol=solver_tol, atol=1e-12)
    if not sol.success:
        raise RuntimeError(f"propagation failed: {sol.message}")
    out = []
    for i, s in enumerate(sol.t):
        u = np.exp(-1j * kvec * s)
        uc = u.conj()
        gg = (u[:, None] * sol.y[:n, i].reshape(d, d)) * uc[None, :]
        ee = (u[:, None] * sol.y[n:, i].reshape(d, d)) * uc[None, :]
        out.append((gg, ee))
    return out


def evolve(rho0, generator: Liouvillian, t_span, *, n_out: int = 201,
           solver_tol: float = 1e-8, rate_dt: float | None = None,
           n_snapshots: int = 10) -> ObservableTimeline:
    """Propagate and record the full observable timeline.

    rho0 may be a composite matrix or a (rho_gg, rho_ee) pair; any
    qubit-coherence block must be negligible (it decouples from every
    reported observable and only decays, so the block propagation is
    exact for such states).  Rates are centered differences across
    bracketing output points spaced rate_dt apart.
    """
    gen = generator
    d = gen.dim
    if not isinstance(rho0, tuple):
        full = np.asarray(rho0, dtype=complex)
        check_density_matrix(full, trace_tol=1e-9)
        off = max(np.max(np.abs(full[:d, d:])), np.max(np.abs(full[d:, :d])))
        if off > 1e-10:
            raise ValueError(
                f"initial qubit-coherence block has norm {off:.2e}; "
                "block propagation requires a qubit-diagonal start")
    gg0, ee0 = _as_blocks(rho0, d)

    t0, t1 = float(t_span[0]), float(t_span[1])
    t_out = np.linspace(t0, t1, n_out)
    step = t_out[1] - t_out[0] if n_out > 1 else (t1 - t0)
    if rate_dt is None:
        kappa = gen.params.kappa if gen.params.kappa > 0 else 1.0
        rate_dt = min(1e-3 / kappa, step / 2 if step > 0 else 1e-3)

    # bracket every output time; one-sided at the span ends
    lo = np.where(t_out - rate_dt >= t0, t_out - rate_dt, t_out)
    hi = np.where(t_out + rate_dt <= t1, t_out + rate_dt, t_out)
    t_eval = np.unique(np.concatenate([
        t_out, lo, hi,
        np.clip([t0 + rate_dt, t0 + 2 * rate_dt,
                 t1 - rate_dt, t1 - 2 * rate_dt], t0, t1),
    ]))
    states = _integrate_blocks(gen, gg0, ee0, t_eval, solver_tol)

    def at(t):
        i = int(np.searchsorted(t_eval, t))
        if i == len(t_eval) or abs(t_eval[i] - t) > abs(t_eval[i - 1] - t):
            i -= 1
        if abs(t_eval[i] - t) > rate_dt / 4:
            raise RuntimeError(f"no solver output near t = {t}")
        return states[i]

    def entropy_and_erg(t):
        gg, ee = at(t)
        return _entropy_blocks(gg, ee), ergotropy((gg, ee), gen.params)

    params = gen.params
    cols = {k: np.zeros(n_out) for k in (
        "mean_L_hbar", "std_L_hbar", "W_int", "W_kin", "W_net", "Q_BA",
        "W_erg", "W_erg_rate", "S_sys_rate", "S_h_rate", "S_c_rate",
        "S_net_rate", "trace_err", "edge_pop")}
    snap_idx = set(np.linspace(0, n_out - 1, min(n_snapshots, n_out)).astype(int))
    snapshots = []

    for i, t in enumerate(t_out):
        gg, ee = at(t)
        pop = (gg.diagonal() + ee.diagonal()).real
        cols["trace_err"][i] = abs(pop.sum() - 1.0)
        cols["edge_pop"][i] = pop[:EDGE_GUARD].sum() + pop[-EDGE_GUARD:].sum()
        mean_l = float(np.dot(gen.l_values, pop))
        mean_l2 = float(np.dot(gen.l_values**2, pop))
        cols["mean_L_hbar"][i] = mean_l
        cols["std_L_hbar"][i] = np.sqrt(max(mean_l2 - mean_l**2, 0.0))
        cols["W_int"][i] = intrinsic_power((gg, ee), params)
        cols["W_kin"][i] = kinetic_power((gg, ee), params)
        cols["W_net"][i] = net_power((gg, ee), params)
        cols["Q_BA"][i] = backaction_heating((gg, ee), params)

        s_mid, erg_mid = _entropy_blocks(gg, ee), ergotropy((gg, ee), params)
        cols["W_erg"][i] = erg_mid
        if t - rate_dt >= t0 and t + rate_dt <= t1:
            s_lo, e_lo = entropy_and_erg(t - rate_dt)
            s_hi, e_hi = entropy_and_erg(t + rate_dt)
            s_rate = (s_hi - s_lo) / (2 * rate_dt)
            e_rate = (e_hi - e_lo) / (2 * rate_dt)
        elif t - rate_dt < t0:
            s_1, e_1 = entropy_and_erg(t + rate_dt)
            s_2, e_2 = entropy_and_erg(t + 2 * rate_dt)
            s_rate = (-3 * s_mid + 4 * s_1 - s_2) / (2 * rate_dt)
            e_rate = (-3 * erg_mid + 4 * e_1 - e_2) / (2 * rate_dt)
        else:
            s_1, e_1 = entropy_and_erg(t - rate_dt)
            s_2, e_2 = entropy_and_erg(t - 2 * rate_dt)
            s_rate = (3 * s_mid - 4 * s_1 + s_2) / (2 * rate_dt)
            e_rate = (3 * erg_mid - 4 * e_1 + e_2) / (2 * rate_dt)
        cols["S_sys_rate"][i] = s_rate
        cols["W_erg_rate"][i] = e_rate

        flows = _bath_heat_flows(gen, gg, ee)
        s_h = np.log1p(1 / params.n_h) * flows["hot"] if params.n_h > 0 else 0.0
        s_c = np.log1p(1 / params.n_c) * flows["cold"] if params.n_c > 0 else 0.0
        cols["S_h_rate"][i] = s_h
        cols["S_c_rate"][i] = s_c
        cols["S_net_rate"][i] = s_rate - s_h - s_c

        if i in snap_idx:
            snapshots.append((t, gg.copy(), ee.copy()))

    return ObservableTimeline(
        t_kappa=t_out,
        truncation_valid=bool(np.all(cols["edge_pop"] < EDGE_POP_TOL)),
        snapshots=snapshots,
        **cols,
    )


def evolve_full_reference(rho0: np.ndarray, generator: Liouvillian, t_span,
                          *, n_out: int = 11, solver_tol: float = 1e-8):
    """Dense composite-matrix propagation, kept for cross-validation.

    Returns (t, [rho(t)]).  Cost scales as the full 2D x 2D matrix, so
    this is for small windows only.
    """
    gen = generator
    d2 = 2 * gen.dim
    kfull = np.concatenate([gen.kinetic, gen.kinetic])
    t0 = float(t_span[0])

    def rhs(s, y):
        u = np.exp(-1j * kfull * s)
        rho = (u[:, None] * y.reshape(d2, d2)) * u.conj()[None, :]
        drho = gen.apply(rho) + 1j * (kfull[:, None] * rho - rho * kfull[None, :])
        return ((u.conj()[:, None] * drho) * u[None, :]).ravel()

    s_eval = np.linspace(0.0, float(t_span[1]) - t0, n_out)
    sol = integrate.solve_ivp(rhs, (0.0, s_eval[-1]),
                              np.asarray(rho0, dtype=complex).ravel(),
                              t_eval=s_eval, method="DOP853",
                              rtol=solver_tol, atol=1e-12)
    if not sol.success:
        raise RuntimeError(f"reference propagation failed: {sol.message}")
    rhos = []
    for i, s in enumerate(sol.t):
        u = np.exp(-1j * kfull * s)
        rhos.append((u[:, None] * sol.y[:, i].reshape(d2, d2)) * u.conj()[None, :])
    return sol.t + t0, rhos


# ---------- steady state ----------

def _vec_kron(a, b):
    """Superoperator block for X -> A X B, row-major vectorization."""
    return sparse.kron(a, b.T, format="csr")


def _block_superoperator(gen: Liouvillian) -> sparse.csr_matrix:
    d = gen.dim
    eye = sparse.identity(d, format="csr", dtype=complex)
    k = sparse.diags(gen.kinetic).astype(complex)
    p = gen.params
    kap = p.kappa

    def comm(h):
        return -1j * (_vec_kron(h, eye) - _vec_kron(eye, h))

    def anti(h):
        return _vec_kron(h, eye) + _vec_kron(eye, h)

    f, f2 = gen.f_h, gen.f_h2
    gg_gg = comm(k) - 0.5 * kap * p.n_h * anti(f2) - kap * p.n_c * _vec_kron(eye, eye)
    gg_ee = kap * (p.n_h + 1) * _vec_kron(f, f) + kap * (p.n_c + 1) * _vec_kron(eye, eye)
    ee_gg = kap * p.n_h * _vec_kron(f, f) + kap * p.n_c * _vec_kron(eye, eye)
    h_ee = (k + p.g * gen.cos_phi).tocsr()
    ee_ee = (comm(h_ee) - 0.5 * kap * (p.n_h + 1) * anti(f2)
             - kap * (p.n_c + 1) * _vec_kron(eye, eye))
    if gen._load:
        load = sparse.csr_matrix((d * d, d * d), dtype=complex)
        for a, a_conj, ada, _ in gen._load:
            load = load + _vec_kron(a, a.conj().T) - 0.5 * anti(ada)
        load = gen.load_prefactor * load
        gg_gg = gg_gg + load
        ee_ee = ee_ee + load
    return sparse.bmat([[gg_gg, gg_ee], [ee_gg, ee_ee]], format="csr")


def _steady_direct(gen: Liouvillian):
    """Null vector of the vectorized block generator, trace pinned to 1."""
    d = gen.dim
    m = _block_superoperator(gen).tolil()
    diag_idx = np.concatenate([
        np.arange(d) * d + np.arange(d),
        d * d + np.arange(d) * d + np.arange(d),
    ])
    m[0, :] = 0.0
    m[0, diag_idx] = 1.0
    rhs = np.zeros(2 * d * d, dtype=complex)
    rhs[0] = 1.0
    y = spsolve(m.tocsr(), rhs)
    gg = y[: d * d].reshape(d, d)
    ee = y[d * d :].reshape(d, d)
    gg = (gg + gg.conj().T) / 2
    ee = (ee + ee.conj().T) / 2
    return gg, ee


def _drift(old: PowerReport, new: PowerReport) -> float:
    scale = max(max(abs(v) for v in old.scalars().values()),
                max(abs(v) for v in new.scalars().values()))
    floor = 1e-4 * max(scale, 1e-12)
    worst = 0.0
    for key, v_new in new.scalars().items():
        v_old = old.scalars()[key]
        worst = max(worst, abs(v_new - v_old) / max(abs(v_new), abs(v_old), floor))
    return worst


def steady_state(params: AutonomousParams, *, method: str = "auto",
                 drift_tol: float = 1e-4, window: float = 10.0,
                 max_windows: int = 120, rho0=None, solver_tol: float = 1e-8):
    """Long-time operating point of the loaded engine.

    Returns ((rho_gg, rho_ee), PowerReport, info).  method "direct"
    solves the vectorized generator's null space (windows up to D = 61),
    "propagate" marches from a thermal-qubit start until every report
    scalar drifts less than drift_tol over a window of 10/kappa, "auto"
    picks direct when the window allows it.  The stopping rule for the
    propagated branch is recorded in info.
    """
    if params.gamma <= 0:
        raise ValueError("steady_state needs an active load (gamma > 0)")
    gen = build_generator(params, include_load=True)
    d = gen.dim
    if method == "auto":
        method = "direct" if d <= 61 else "propagate"
    info = {"method": method}

    if method == "direct":
        gg, ee = _steady_direct(gen)
        resid = gen.apply_blocks(gg, ee)
        info["residual"] = float(max(np.max(np.abs(resid[0])), np.max(np.abs(resid[1]))))
        rep = power_report((gg, ee), params, s_sys_rate=0.0, w_erg_rate=0.0)
        return (gg, ee), rep, info

    if method != "propagate":
        raise ValueError(f"unknown method {method!r}")
    if rho0 is None:
        pe = thermal_excitation(params.n_h, params.n_c)
        gg, ee = initial_state(params.basis, excited=True)
        gg, ee = (1 - pe) * ee.copy(), pe * ee
    else:
        gg, ee = _as_blocks(rho0, d)
    rep = power_report((gg, ee), params, s_sys_rate=0.0, w_erg_rate=0.0)
    for k in range(max_windows):
        states = _integrate_blocks(gen, gg, ee, np.array([0.0, window]), solver_tol)
        gg, ee = states[-1]
        new = power_report((gg, ee), params, s_sys_rate=0.0, w_erg_rate=0.0)
        drift = _drift(rep, new)
        rep = new
        if drift < drift_tol:
            info.update(windows=k + 1, drift=drift,
                        rule=f"all report scalars drift < {drift_tol} over {window}/kappa")
            return (gg, ee), rep, info
    raise RuntimeError(
        f"no steady state after {max_windows} windows of {window}/kappa "
        f"(last drift {drift:.2e})")


def steady_state_sweep(params: AutonomousParams, gammas, **kwargs):
    """Steady states across load strengths, warm-starting each from the last."""
    results = []
    rho = None
    for gam in sorted(gammas, reverse=True):
        p = AutonomousParams(basis=params.basis, g=params.g, kappa=params.kappa,
                             n_h=params.n_h, n_c=params.n_c, inertia=params.inertia,
                             gamma=float(gam), kT_load=params.kT_load)
        state, rep, info = steady_state(p, rho0=rho, **kwargs)
        rho = state
        results.append((float(gam), state, rep, info))
    results.sort(key=lambda r: r[0])
    return results
