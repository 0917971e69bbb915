"""
Quadrature variances, purity, photon numbers and energy of the cavity modes.

Series evaluation over a coefficient table, the elliptic-integral closed forms
for the first principal modes, short- and long-time laws, and corrections for
non-vacuum initial states.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.integrate import quad_vec

from .bogoliubov import (CavityConfig, KappaState, is_principal, kappa_state, residue,
                         rho_closed)
from .errors import AccuracyError, DomainError, InputError, RegimeError
from .photonstats import moments_and_q
from .specfun import elliptic_KE

logger = logging.getLogger(__name__)

PI2 = math.pi ** 2
ASYMPTOTIC_CHUNK = 2.0
ASYMPTOTIC_INCREMENT = 1e-10
ASYMPTOTIC_MAX_TAU = 200.0


@dataclass
class QuadratureStats:
    mode: int               # mode number m
    U: float                # variance of q
    V: float                # variance of p
    Y: float                # symmetrized covariance
    u: float = field(init=False)        # minimal invariant variance
    v: float = field(init=False)        # maximal invariant variance
    N: float = field(init=False)        # mean photon number
    purity: float = field(init=False)
    Q: float = field(init=False)        # Mandel parameter
    q_limit: bool = field(init=False)   # Q taken as its n -> 0 limit

    def __post_init__(self):
        half_sum = 0.5 * (self.U + self.V)
        half_gap = 0.5 * math.hypot(self.U - self.V, 2.0 * self.Y)
        self.u = half_sum - half_gap
        self.v = half_sum + half_gap
        self.N = half_sum - 0.5
        determinant = self.U * self.V - self.Y ** 2
        self.purity = 1.0 / math.sqrt(4.0 * determinant) if determinant > 0 else math.inf
        summary = moments_and_q(self.u, self.v, squeezed=self.u <= 0.5)
        self.Q = summary.Q
        self.q_limit = summary.limit

    @property
    def uncertainty_product(self):
        return self.u * self.v

    @classmethod
    def vacuum(cls, mode):
        return cls(mode=mode, U=0.5, V=0.5, Y=0.0)

    def as_dict(self):
        return {"mode": self.mode, "U": self.U, "V": self.V, "Y": self.Y, "u": self.u,
                "v": self.v, "N": self.N, "purity": self.purity, "Q": self.Q}


@dataclass
class DiagonalOccupation:
    occupations: dict       # mode number n -> initial mean occupation nu_n

    def __post_init__(self):
        cleaned = {}
        for n, nu in self.occupations.items():
            if int(n) != n or n < 1:
                raise InputError(f"occupied mode must be a positive integer, got {n}")
            if not nu >= 0 or not math.isfinite(nu):
                raise InputError(f"occupation of mode {n} must be finite and >= 0, got {nu}")
            cleaned[int(n)] = float(nu)
        self.occupations = cleaned

    @property
    def support(self):
        return max(self.occupations, default=0)

    @property
    def Z(self):
        """Occupation-weighted sum over the odd modes."""
        return math.fsum(nu / n for n, nu in self.occupations.items() if n % 2 == 1)

    def as_array(self, size):
        values = np.zeros(size)
        for n, nu in self.occupations.items():
            values[n - 1] = nu
        return values


@dataclass(frozen=True)
class VarianceRates:
    dU: float
    dV: float
    dY: float
    dN: float


@dataclass(frozen=True)
class Corrections:
    dU: float
    dV: float
    dY: float
    dN: float


def state_from_kappa(kappa, config, kappa_c=None):
    """Kinematic state at a prescribed kappa in [0, 1) for |gamma| <= 1."""
    if abs(config.gamma) > 1.0:
        raise RegimeError("kappa does not parametrize time monotonically for |gamma| > 1")
    if kappa_c is None:
        if not 0 <= kappa < 1:
            raise DomainError(f"kappa must lie in [0, 1), got {kappa}")
        kappa_c = math.sqrt((1.0 - kappa) * (1.0 + kappa))
    S = kappa / kappa_c
    a = config.a
    tau = S / config.p if config.regime == "degenerate" else math.asinh(a * S) / (a * config.p)
    beta = math.sqrt(max(0.0, 1.0 - (config.gamma * kappa) ** 2))
    return KappaState(tau=tau, kappa=kappa, kappa_c=kappa_c, a=a, beta=beta,
                      theta=math.atan2(config.gamma * kappa, beta), p=config.p, gamma=config.gamma)


def _elliptic(state):
    return elliptic_KE(abs(state.kappa), kappa_c=state.kappa_c)


def variances_series(m, table, tol=None):
    """
    U, V, Y of mode m summed over the upper index of a coefficient table.

    Raises AccuracyError when the table does not reach mode m or when the
    table's tail bound, weighted by m, exceeds ``tol``.
    """
    if m < 1 or int(m) != m:
        raise DomainError(f"mode must be a positive integer, got {m}")
    if m > table.max_m:
        raise AccuracyError(f"mode {m} outside table width {table.max_m}", {"m": m, "max_m": table.max_m})
    limit = tol if tol is not None else max(table.tol, 1e-12) * 1e4
    if m * table.tail_bound ** 2 > limit:
        raise AccuracyError(f"table tail {table.tail_bound:.3g} too large for mode {m}",
                            {"m": m, "tail_bound": table.tail_bound, "kappa": table.state.kappa})
    plus, minus = table.column(m), table.column(-m)
    n = table.upper_indices()
    U = 0.5 * m * np.sum(np.abs(plus - minus) ** 2 / n)
    V = 0.5 * m * np.sum(np.abs(plus + minus) ** 2 / n)
    Y = m * np.sum(np.imag(np.conj(plus) * minus) / n)
    return QuadratureStats(mode=m, U=float(U), V=float(V), Y=float(Y))


def _require_principal_p(state):
    if state.p % 2:
        raise DomainError(f"principal-mode closed forms need an even p, got {state.p}")


def variances_closed_mode1(state):
    """Closed forms for the first principal mode (mode 1 when p = 2)."""
    _require_principal_p(state)
    mode = state.p // 2
    if state.kappa == 0.0:
        return QuadratureStats.vacuum(mode)
    pair = _elliptic(state)
    K, E = pair.K, pair.E
    kappa, kc2, beta = state.kappa, state.kappa_c ** 2, state.beta
    scale = 2.0 / (PI2 * kappa)
    U = scale * (kc2 * (beta - kappa) * K * K - 2.0 * (beta - kappa) * K * E + beta * E * E)
    V = scale * (2.0 * (beta + kappa) * K * E - kc2 * (beta + kappa) * K * K - beta * E * E)
    Y = 2.0 * state.gamma / PI2 * (kc2 * K * K - 2.0 * K * E + E * E)
    stats = QuadratureStats(mode=mode, U=U, V=V, Y=Y)
    stats.u, stats.v = invariant_variances_mode1(state)
    stats.purity = purity_mode1(state)
    return stats


def invariant_variances_mode1(state):
    """Minimal and maximal invariant variances of the first principal mode."""
    if state.kappa == 0.0:
        return 0.5, 0.5
    pair = _elliptic(state)
    K, E = pair.K, pair.E
    k, kc2 = abs(state.kappa), state.kappa_c ** 2
    scale = 2.0 / (PI2 * k)
    u = scale * (kc2 * (1.0 - k) * K * K - 2.0 * (1.0 - k) * K * E + E * E)
    v = scale * (2.0 * (1.0 + k) * K * E - kc2 * (1.0 + k) * K * K - E * E)
    return u, v


def purity_mode1(state):
    """Purity of the first principal mode from K and E."""
    if state.kappa == 0.0:
        return 1.0
    pair = _elliptic(state)
    K, E = pair.K, pair.E
    kc2 = state.kappa_c ** 2
    bracket = (4.0 * K * E ** 3 + 4.0 * kc2 ** 2 * K ** 3 * E - 6.0 * kc2 * K * K * E * E
               - E ** 4 - kc2 ** 3 * K ** 4)
    return PI2 / 4.0 * abs(state.kappa) / math.sqrt(bracket)


def _mode3_U(kappa, kc2, K, E):
    k = kappa
    bracket = (kc2 * (1 - k) * (4 + 10 * k + 9 * k * k) * K * K
               + (1 - k) * (4 * k ** 3 - 14 * k * k - 20 * k - 8) * K * E
               + (4 * k ** 4 + 6 * k ** 3 - k * k + 6 * k + 4) * E * E)
    return 2.0 / (9.0 * PI2 * k ** 3) * bracket


def variances_closed_mode3(state):
    """Closed forms for the second principal mode at strict resonance."""
    _require_principal_p(state)
    if state.gamma != 0.0:
        raise DomainError("the mode-3 closed form holds for gamma = 0 only")
    mode = 3 * state.p // 2
    if state.kappa == 0.0:
        return QuadratureStats.vacuum(mode)
    pair = _elliptic(state)
    kc2 = state.kappa_c ** 2
    U = _mode3_U(state.kappa, kc2, pair.K, pair.E)
    V = _mode3_U(-state.kappa, kc2, pair.K, pair.E)
    return QuadratureStats(mode=mode, U=U, V=V, Y=0.0)


def mean_photons_mode3(state):
    if state.kappa == 0.0:
        return 0.0
    pair = _elliptic(state)
    K, E = pair.K, pair.E
    k2, kc2 = state.kappa ** 2, state.kappa_c ** 2
    return (2.0 / (3.0 * PI2 * k2) * ((3 * k2 - 2) * K * (2 * E - kc2 * K) + 2 * (1 + k2) * E * E)
            - 0.5)


def mean_photons_mode1(state):
    if state.kappa == 0.0:
        return 0.0
    pair = _elliptic(state)
    return 2.0 / PI2 * pair.K * (2.0 * pair.E - state.kappa_c ** 2 * pair.K) - 0.5


def _require_p2(state):
    if state.p != 2:
        raise DomainError(f"total photon laws are stated for p = 2, got p = {state.p}")


def total_photons(state):
    """Total number of photons created in all modes (p = 2)."""
    _require_p2(state)
    if state.kappa == 0.0:
        return 0.0
    pair = _elliptic(state)
    return 2.0 / PI2 * pair.K * (pair.K - pair.E)


def d2N_dtau2(state):
    """Second slow-time derivative of the total photon number (p = 2)."""
    _require_p2(state)
    if state.kappa == 0.0:
        return 2.0
    pair = _elliptic(state)
    K, E = pair.K, pair.E
    k2, kc2 = state.kappa ** 2, state.kappa_c ** 2
    bracket = kc2 ** 2 * K * K - 2.0 * kc2 * K * E + (1.0 + k2 - 2.0 * state.gamma ** 2 * k2 * k2) * E * E
    return 8.0 / (PI2 * k2) * bracket


def total_energy(tau, config):
    """Energy of all created photons in units of the fundamental frequency."""
    state = kappa_state(tau, config)
    S = state.kappa / state.kappa_c
    return (config.p ** 2 - 1) / 12.0 * S * S


def _double_factorial_ratio(m):
    """[(2m-1)!!/m!]^2 with (-1)!! = 1."""
    odd = math.prod(range(1, 2 * m, 2)) if m > 0 else 1
    return (odd / math.factorial(m)) ** 2


def short_time_expansion(m, tau, gamma):
    """Leading small-tau behaviour of (U, V, Y) for the principal mode 2m+1 (p = 2)."""
    if m < 0:
        raise DomainError(f"m must be >= 0, got {m}")
    c = _double_factorial_ratio(m)
    lead = tau ** (2 * m + 1) * c
    slope = (2 * m + 1) / (m + 1) ** 2 * tau
    U = 0.5 - lead * (1.0 - slope)
    V = 0.5 + lead * (1.0 + slope)
    Y = -2.0 * gamma * (2 * m + 1) * tau ** (2 * (m + 1)) * c
    return U, V, Y


def long_time_rates(m, gamma):
    """Constant long-time slopes of U, V, Y, N for the principal mode 2m+1."""
    if abs(gamma) > 1.0:
        raise RegimeError(f"linear growth requires |gamma| <= 1, got {gamma}")
    a = math.sqrt(1.0 - gamma ** 2)
    phi = math.asin(gamma)
    mu = 2 * m + 1
    base = 8.0 * a / (PI2 * mu)
    return VarianceRates(dU=2.0 * base * math.sin(0.5 * mu * phi) ** 2,
                         dV=2.0 * base * math.cos(0.5 * mu * phi) ** 2,
                         dY=-base * math.sin(mu * phi),
                         dN=base)


def principal_derivatives(mu, state, config):
    """Slow-time derivatives of U, V, Y, N for a principal mode."""
    if not is_principal(mu, config.p):
        raise DomainError(f"mode {mu} is not principal for p = {config.p}")
    upper = config.p // 2
    plus = rho_closed(upper, mu, state, config)
    minus = rho_closed(upper, -mu, state, config)
    dU = -mu * ((plus - minus) ** 2).real
    dV = mu * ((plus + minus) ** 2).real
    dY = mu * (plus.conjugate() ** 2 + minus ** 2).imag
    return VarianceRates(dU=dU, dV=dV, dY=dY, dN=0.5 * (dU + dV))


def nonprincipal_derivative(m, state, config):
    """Common slope of U and V for a mode without squeezing."""
    p = config.p
    if is_principal(m, p):
        raise DomainError(f"mode {m} is principal for p = {p}")
    j = residue(m, p)
    if j == p:
        return VarianceRates(dU=0.0, dV=0.0, dY=0.0, dN=0.0)
    slope = 2.0 * config.sigma * m * (rho_closed(j, m, state, config)
                                      * rho_closed(p - j, -m, state, config)).real
    return VarianceRates(dU=slope, dV=slope, dY=0.0, dN=slope)


def _rates_vector(mu, config):
    def rates(t):
        r = principal_derivatives(mu, kappa_state(t, config), config)
        return np.array([r.dU, r.dV, r.dY])
    return rates


def principal_variances(mu, tau, config):
    """(U, V, Y) of a principal mode at tau by quadrature of its rate laws from the vacuum."""
    if tau < 0:
        raise DomainError(f"slow time must be non-negative, got {tau}")
    if tau == 0:
        return QuadratureStats.vacuum(mu)
    rates = _rates_vector(mu, config)
    integral, error = quad_vec(rates, 0.0, tau, epsabs=1e-12, epsrel=1e-10, limit=500)
    logger.debug(f"principal_variances mu={mu} tau={tau}: quadrature error {error:.2e}")
    return QuadratureStats(mode=mu, U=0.5 + integral[0], V=0.5 + integral[1], Y=integral[2])


def delta_product(m, tau_max=15.0):
    """(2m+1) * (1/2 - U_{2m+1}(infinity)) at strict resonance, p = 2."""
    mu = 2 * m + 1
    stats = principal_variances(mu, tau_max, CavityConfig(p=2, gamma=0.0))
    return mu * (0.5 - stats.U)


@dataclass(frozen=True)
class AsymptoticMinVar:
    mode: int
    gamma: float
    Z: float
    f: float
    g: float
    h: float

    @property
    def phase(self):
        return self.mode * math.asin(self.gamma)

    @property
    def u_inf(self):
        chi = self.phase
        return (self.f * math.cos(0.5 * chi) ** 2 + self.g * math.sin(0.5 * chi) ** 2
                + self.h * math.sin(chi))

    def growth(self, tau):
        a = math.sqrt(1.0 - self.gamma ** 2)
        return 8.0 * (a * tau + self.Z) / (PI2 * self.mode)

    def triple(self, tau):
        """Long-time (U, V, Y) with linear growth plus the limiting offsets."""
        F, chi = self.growth(tau), self.phase
        return (2.0 * F * math.sin(0.5 * chi) ** 2 + self.f,
                2.0 * F * math.cos(0.5 * chi) ** 2 + self.g,
                -F * math.sin(chi) + self.h)

    def u_at(self, tau):
        U, V, Y = self.triple(tau)
        return 0.5 * (U + V - math.hypot(U - V, 2.0 * Y))

    def purity_at(self, tau):
        U, V, Y = self.triple(tau)
        return 1.0 / math.sqrt(4.0 * (U * V - Y * Y))


def asymptotic_minvar(mu, gamma, Z=0.0):
    """
    Long-time limit of the minimal variance of principal mode mu (p = 2).

    The offsets (f, g, h) are integrals of the rate laws with their constant
    long-time values subtracted, accumulated in chunks until an increment
    drops below 1e-10.
    """
    if abs(gamma) > 1.0:
        raise RegimeError(f"linear growth requires |gamma| <= 1, got {gamma}")
    if mu < 1 or mu % 2 == 0:
        raise DomainError(f"principal modes for p = 2 are odd, got {mu}")
    if Z < 0:
        raise InputError(f"Z must be non-negative, got {Z}")
    config = CavityConfig(p=2, gamma=gamma)
    linear = long_time_rates((mu - 1) // 2, gamma)
    constant = np.array([linear.dU, linear.dV, linear.dY])
    rates = _rates_vector(mu, config)

    def excess(t):
        return rates(t) - constant

    offsets = np.array([0.5, 0.5, 0.0])
    start = 0.0
    while True:
        stop = start + ASYMPTOTIC_CHUNK
        increment, _ = quad_vec(excess, start, stop, epsabs=1e-13, epsrel=1e-11, limit=200)
        offsets = offsets + increment
        start = stop
        if np.max(np.abs(increment)) < ASYMPTOTIC_INCREMENT:
            break
        if start >= ASYMPTOTIC_MAX_TAU:
            raise AccuracyError(f"offsets for mode {mu} did not settle by tau = {start}",
                                {"mu": mu, "gamma": gamma, "last_increment": increment.tolist()})
    logger.debug(f"asymptotic_minvar mu={mu} gamma={gamma}: converged at tau={start}")
    return AsymptoticMinVar(mode=mu, gamma=gamma, Z=Z, f=float(offsets[0]),
                            g=float(offsets[1]), h=float(offsets[2]))


def diagonal_corrections(m, table, occ):
    """Variance corrections for an initial state diagonal in the Fock basis."""
    if occ.support > table.max_n or m > table.max_m:
        raise AccuracyError(f"occupation support {occ.support} or mode {m} exceeds the table",
                            {"support": occ.support, "max_n": table.max_n, "m": m})
    n = table.upper_indices()
    nu = occ.as_array(table.max_n)
    plus, minus = table.column(m), table.column(-m)
    dU = m * np.sum(nu / n * np.abs(plus - minus) ** 2)
    dV = m * np.sum(nu / n * np.abs(plus + minus) ** 2)
    dY = 2.0 * m * np.sum(nu / n * np.imag(np.conj(plus) * minus))
    return Corrections(dU=float(dU), dV=float(dV), dY=float(dY), dN=float(0.5 * (dU + dV)))


@dataclass
class InitialMoments:
    """Second moments <b_n^+ b_j>, <b_n b_j> and means <b_n> of the initial state."""
    bdag_b: np.ndarray
    b_b: np.ndarray
    means: np.ndarray

    def __post_init__(self):
        self.bdag_b = np.asarray(self.bdag_b, dtype=complex)
        self.b_b = np.asarray(self.b_b, dtype=complex)
        self.means = np.asarray(self.means, dtype=complex)
        size = self.means.shape[0] if self.means.ndim == 1 else -1
        if size < 1 or self.bdag_b.shape != (size, size) or self.b_b.shape != (size, size):
            raise InputError(f"inconsistent moment shapes {self.bdag_b.shape}, {self.b_b.shape}, {self.means.shape}")
        if not np.allclose(self.bdag_b, self.bdag_b.conj().T, atol=1e-12):
            raise InputError("<b^+ b> matrix must be Hermitian")
        if not np.allclose(self.b_b, self.b_b.T, atol=1e-12):
            raise InputError("<b b> matrix must be symmetric")

    @property
    def size(self):
        return self.means.shape[0]

    def centered(self):
        normal = self.bdag_b - np.outer(self.means.conj(), self.means)
        anomalous = self.b_b - np.outer(self.means, self.means)
        return normal, anomalous

    @classmethod
    def coherent(cls, amplitudes):
        alpha = np.asarray(amplitudes, dtype=complex)
        return cls(bdag_b=np.outer(alpha.conj(), alpha), b_b=np.outer(alpha, alpha), means=alpha)

    @classmethod
    def diagonal(cls, occ, size):
        nu = occ.as_array(size)
        return cls(bdag_b=np.diag(nu), b_b=np.zeros((size, size)), means=np.zeros(size))


def general_corrections(m, table, moments):
    """Variance corrections for arbitrary initial second moments and means."""
    size = moments.size
    if size > table.max_n or m > table.max_m:
        raise AccuracyError(f"moment support {size} or mode {m} exceeds the table",
                            {"size": size, "max_n": table.max_n, "m": m})
    n = np.arange(1, size + 1)
    plus, minus = table.column(m)[:size], table.column(-m)[:size]
    weight = np.sqrt(m / (2.0 * n))
    c = weight * (plus - minus)
    d = -1j * weight * (plus + minus)
    normal, anomalous = moments.centered()

    def bilinear(x, y):
        return 2.0 * (x.conj() @ normal @ y + x @ anomalous @ y).real

    dU, dV, dY = bilinear(c, c), bilinear(d, d), bilinear(c, d)
    return Corrections(dU=float(dU), dV=float(dV), dY=float(dY), dN=float(0.5 * (dU + dV)))


def strong_detuning_scan(gamma, taus, p=2):
    """Minimal variance of the first principal mode over a tau grid (any gamma)."""
    config = CavityConfig(p=p, gamma=gamma)
    records = []
    for tau in taus:
        state = kappa_state(tau, config)
        u, v = invariant_variances_mode1(state)
        records.append({"tau": tau, "kappa": state.kappa, "u1": u, "v1": v})
    return pd.DataFrame.from_records(records, columns=["tau", "kappa", "u1", "v1"])
