"""
Slow-time Bogoliubov coefficients of the resonantly vibrating cavity.

Coefficients rho_m^(n)(tau) are available three ways: the hypergeometric closed
form (entry by entry), a batch table built from the generating function on an
FFT grid, and direct integration of the coupled linear system as an oracle.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.special import gammainccinv

from .errors import AccuracyError, DomainError, IntegrationError, RegimeError
from .specfun import hyp2f1, ln_gamma

logger = logging.getLogger(__name__)

DEGENERATE_DETUNING = 1e-12     # |1 - gamma^2| below this is treated as |gamma| = 1
MAX_UPPER_INDEX = 100_000       # hard cap for the adaptive cutoff
MAX_FFT_SIZE = 2 ** 20
GUARD_LEVEL = 1e-14             # spectrum level required in the aliasing guard band
TAIL_RATIO = 0.9
ODE_RTOL = 1e-10
ODE_ATOL = 1e-12
ORACLE_REACH = 3.0             # starting mode count in units of p / kappa_c^2
ORACLE_MAX_MODES = 32_768
ORACLE_CONVERGENCE = 1e-9


@dataclass
class CavityConfig:
    p: int                      # resonance multiple: wall frequency ~ p * omega_1
    gamma: float = 0.0          # detuning ratio delta / epsilon
    sigma: int = field(init=False)

    def __post_init__(self):
        if isinstance(self.p, bool) or int(self.p) != self.p or self.p < 1:
            raise DomainError(f"resonance order p must be a positive integer, got {self.p}")
        self.p = int(self.p)
        self.gamma = float(self.gamma)
        if not math.isfinite(self.gamma):
            raise DomainError(f"detuning ratio must be finite, got {self.gamma}")
        self.sigma = -1 if self.p % 2 else 1

    @property
    def regime(self):
        d = 1.0 - self.gamma ** 2
        if abs(d) < DEGENERATE_DETUNING:
            return "degenerate"
        return "hyperbolic" if d > 0 else "trigonometric"

    @property
    def a(self):
        """sqrt(|1 - gamma^2|): a for |gamma| <= 1, a-tilde otherwise."""
        return math.sqrt(abs(1.0 - self.gamma ** 2))

    def has_principal_modes(self):
        return self.p % 2 == 0

    def copy(self):
        return CavityConfig(p=self.p, gamma=self.gamma)


@dataclass(frozen=True)
class KappaState:
    tau: float          # slow time
    kappa: float        # universal variable, signed for |gamma| > 1
    kappa_c: float      # sqrt(1 - kappa^2), computed without cancellation
    a: float            # sqrt(|1 - gamma^2|)
    beta: float         # Re(lambda), changes sign past the turning points when |gamma| > 1
    theta: float        # continuous phase of lambda
    p: int
    gamma: float

    @property
    def lam(self):
        return complex(self.beta, self.gamma * self.kappa)

    def lam_power(self, y):
        """lambda**y on the branch continuous in tau."""
        return complex(math.cos(y * self.theta), math.sin(y * self.theta))

    @property
    def dkappa_dtau(self):
        return self.p * self.beta * self.kappa_c ** 2


def kappa_state(tau, config):
    """Kinematic bundle (kappa, lambda, beta, ...) at slow time tau."""
    if not tau >= 0 or not math.isfinite(tau):
        raise DomainError(f"slow time must be finite and non-negative, got {tau}")
    gamma, p = config.gamma, config.p
    a = config.a
    regime = config.regime

    if regime == "hyperbolic":
        x = a * p * tau
        e = math.exp(-x)
        one_minus = -math.expm1(-2.0 * x)           # 1 - e^2
        norm = math.sqrt(4.0 * a * a * e * e + one_minus * one_minus)
        kappa = one_minus / norm
        kappa_c = 2.0 * a * e / norm
        beta = a * (1.0 + e * e) / norm
        theta = math.atan2(gamma * one_minus, a * (1.0 + e * e))
    elif regime == "trigonometric":
        y = a * p * tau
        s, c = math.sin(y), math.cos(y)
        norm = math.hypot(a, s)
        kappa = s / norm
        kappa_c = a / norm
        beta = a * c / norm
        principal = math.atan2(gamma * s, a * c)
        winding = round((math.copysign(y, gamma) - principal) / (2.0 * math.pi))
        theta = principal + 2.0 * math.pi * winding
    else:
        S = p * tau
        norm = math.hypot(1.0, S)
        kappa = S / norm
        kappa_c = 1.0 / norm
        beta = kappa_c
        theta = math.atan2(gamma * S, 1.0)

    return KappaState(tau=float(tau), kappa=kappa, kappa_c=kappa_c, a=a, beta=beta,
                      theta=theta, p=p, gamma=gamma)


def residue(n, p):
    """Residue class j in 1..p of a positive index."""
    return (n - 1) % p + 1


def selection_allows(n, m, p):
    """Non-zero only when the signed lower index is congruent to the upper one mod p."""
    return m != 0 and (m - n) % p == 0


def _signed_power(base, exponent):
    """(sign, log|base**exponent|) for an integer exponent >= 0."""
    if exponent == 0:
        return 1.0, 0.0
    if base == 0:
        return 0.0, -math.inf
    sign = -1.0 if (base < 0 and exponent % 2) else 1.0
    return sign, exponent * math.log(abs(base))


def _assemble(log_magnitude, sign, hyper, phase_power, state):
    if sign == 0.0 or hyper == 0.0:
        return 0j
    return sign * hyper * math.exp(log_magnitude) * state.lam_power(phase_power)


def _positive_lower(n_q, m_q, x, state, sigma):
    """Upper p*n_q + j, lower p*m_q + j with m_q <= n_q."""
    d = n_q - m_q
    log_mag = ln_gamma(1 + n_q + x) - ln_gamma(1 + m_q + x) - ln_gamma(1 + d)
    sign, log_pow = _signed_power(sigma * state.kappa, d)
    hyper = hyp2f1(n_q + x, -m_q - x, 1 + d, state.kappa ** 2, one_minus_z=state.kappa_c ** 2)
    return _assemble(log_mag + log_pow, sign, hyper, m_q + n_q + 2 * x, state)


def _negative_lower(n_q, mc, x, state, sigma):
    """Upper p*n_q + j, lower -(p*mc + j'), j' = p - j (or p when j = p)."""
    if x == 1.0:
        return 0j
    power = n_q + mc + 1
    log_mag = (ln_gamma(1 + n_q + x) + ln_gamma(1 + mc - x) - ln_gamma(2 + n_q + mc)
               + math.log(math.sin(math.pi * x) / math.pi))
    sign, log_pow = _signed_power(sigma * state.kappa, power)
    sign *= (-1.0) ** mc
    hyper = hyp2f1(n_q + x, mc + 1 - x, 2 + n_q + mc, state.kappa ** 2, one_minus_z=state.kappa_c ** 2)
    return _assemble(log_mag + log_pow, sign, hyper, n_q - mc - 1 + 2 * x, state)


def _validate_indices(n, m):
    if int(n) != n or n < 1:
        raise DomainError(f"upper index must be a positive integer, got {n}")
    if int(m) != m or m == 0:
        raise DomainError(f"lower index must be a non-zero integer, got {m}")


def rho_closed_general(n, m, state, config):
    """Hypergeometric closed form on any residue class (no principal-mode shortcut)."""
    _validate_indices(n, m)
    p, sigma = config.p, config.sigma
    if not selection_allows(n, m, p):
        return 0j
    if state.kappa == 0.0:
        return state.lam_power(2.0 * n / p) if m == n else 0j

    j = residue(n, p)
    x = j / p
    n_q = (n - j) // p
    if m > 0:
        m_q = (m - j) // p
        if m_q <= n_q:
            return _positive_lower(n_q, m_q, x, state, sigma)
        # rho_m^(n) = (-1)^((n-m)/p) (n/m) rho_n^(m)
        swapped = _positive_lower(m_q, n_q, x, state, sigma)
        return (-1.0) ** (m_q - n_q) * (n / m) * swapped
    k = -m
    jk = residue(k, p)
    mc = (k - jk) // p
    return _negative_lower(n_q, mc, x, state, sigma)


def _rho_principal(n, m, state):
    """Principal-mode formulas for p even: upper p*n_q + p/2, lower +-(p*m_q + p/2)."""
    p = state.p
    n_q = (n - p // 2) // p
    m_q = (abs(m) - p // 2) // p
    kappa2, kappa_c2 = state.kappa ** 2, state.kappa_c ** 2
    if m < 0:
        sign, log_pow = _signed_power(state.kappa, n_q + m_q + 1)
        log_mag = (ln_gamma(m_q + 0.5) + ln_gamma(n_q + 1.5) - ln_gamma(2 + n_q + m_q)
                   - math.log(math.pi))
        hyper = hyp2f1(n_q + 0.5, m_q + 0.5, 2 + n_q + m_q, kappa2, one_minus_z=kappa_c2)
        return _assemble(log_mag + log_pow, sign * (-1.0) ** m_q, hyper, n_q - m_q, state)
    if n_q >= m_q:
        sign, log_pow = _signed_power(state.kappa, n_q - m_q)
        log_mag = ln_gamma(n_q + 1.5) - ln_gamma(m_q + 1.5) - ln_gamma(1 + n_q - m_q)
        hyper = hyp2f1(n_q + 0.5, -m_q - 0.5, 1 + n_q - m_q, kappa2, one_minus_z=kappa_c2)
        return _assemble(log_mag + log_pow, sign, hyper, m_q + n_q + 1, state)
    sign, log_pow = _signed_power(state.kappa, m_q - n_q)
    log_mag = ln_gamma(m_q + 0.5) - ln_gamma(n_q + 0.5) - ln_gamma(1 + m_q - n_q)
    hyper = hyp2f1(m_q + 0.5, -n_q - 0.5, 1 + m_q - n_q, kappa2, one_minus_z=kappa_c2)
    return _assemble(log_mag + log_pow, sign * (-1.0) ** (m_q - n_q), hyper, m_q + n_q + 1, state)


def is_principal(n, p):
    return p % 2 == 0 and residue(n, p) == p // 2


def rho_closed(n, m, state, config):
    """
    Closed-form coefficient rho_m^(n) at the kinematic state.

    Principal modes (p even, residue p/2) use their dedicated half-integer
    formulas; every other class goes through the general hypergeometric form.
    Entries violating the selection rule are exactly zero.
    """
    _validate_indices(n, m)
    if not selection_allows(n, m, config.p):
        return 0j
    if state.kappa != 0.0 and is_principal(n, config.p):
        return _rho_principal(n, m, state)
    return rho_closed_general(n, m, state, config)


def rho_asymptotic(n, m, config):
    """Long-time (kappa -> 1) limit of rho_m^(n) for |gamma| <= 1."""
    _validate_indices(n, m)
    if abs(config.gamma) > 1.0:
        raise RegimeError(f"no long-time limit for |gamma| > 1 (gamma={config.gamma})")
    p, sigma = config.p, config.sigma
    if not selection_allows(n, m, p):
        return 0j
    phi = math.asin(config.gamma)
    j = residue(n, p)
    x = j / p
    n_q = (n - j) // p
    if m > 0:
        m_q = (m - j) // p
        arg = m_q + x
        prefactor = math.sin(math.pi * arg) / (math.pi * arg) * float(sigma) ** (n_q - m_q)
        exponent = m_q + n_q + 2 * x
    else:
        k = -m
        mc = (k - residue(k, p)) // p
        prefactor = ((-1.0) ** mc * math.sin(math.pi * x) / (math.pi * (1 + mc - x))
                     * float(sigma) ** (n_q + mc + 1))
        exponent = n_q - mc - 1 + 2 * x
    return prefactor * complex(math.cos(exponent * phi), math.sin(exponent * phi))


@dataclass(frozen=True, eq=False)
class CoeffTable:
    """
    Finite table of coefficients.

    ``columns[n - 1, m + max_m]`` holds rho_m^(n) for n = 1..max_n, |m| <= max_m.
    ``rows[n - 1, k + width]`` holds rho_k^(n) for the first rows over a wider
    lower-index window, which the lower-index sums need.
    """
    config: CavityConfig
    state: KappaState
    columns: np.ndarray
    rows: np.ndarray
    tail_bound: float
    method: str
    tol: float

    @property
    def max_m(self):
        return (self.columns.shape[1] - 1) // 2

    @property
    def max_n(self):
        return self.columns.shape[0]

    @property
    def width(self):
        return (self.rows.shape[1] - 1) // 2

    @property
    def n_rows(self):
        return self.rows.shape[0]

    def get(self, n, m):
        _validate_indices(n, m)
        if not selection_allows(n, m, self.config.p):
            return 0j
        if n <= self.max_n and abs(m) <= self.max_m:
            return complex(self.columns[n - 1, m + self.max_m])
        if n <= self.n_rows and abs(m) <= self.width:
            return complex(self.rows[n - 1, m + self.width])
        raise AccuracyError(f"entry (n={n}, m={m}) lies outside the table truncation",
                            {"n": n, "m": m, "max_n": self.max_n, "max_m": self.max_m})

    def column(self, m):
        """rho_m^(n) for n = 1..max_n."""
        if m == 0 or abs(m) > self.max_m:
            raise DomainError(f"column {m} outside 1..{self.max_m}")
        return self.columns[:, m + self.max_m].copy()

    def row(self, n):
        """rho_k^(n) for k = -width..width."""
        if not 1 <= n <= self.n_rows:
            raise DomainError(f"row {n} outside 1..{self.n_rows}")
        return self.rows[n - 1].copy()

    def upper_indices(self):
        return np.arange(1, self.max_n + 1)

    def to_frame(self):
        n_idx, m_idx = np.nonzero(self.columns)
        values = self.columns[n_idx, m_idx]
        frame = pd.DataFrame({
            "n": n_idx + 1,
            "m": m_idx - self.max_m,
            "re": values.real,
            "im": values.imag,
        })
        return frame.sort_values(["n", "m"], kind="stable").reset_index(drop=True)

    @classmethod
    def from_closed_form(cls, config, state, max_n, max_m):
        """Small dense table evaluated entry by entry with rho_closed."""
        if max_n < 1 or max_m < 1:
            raise DomainError("table extents must be positive")
        columns = np.zeros((max_n, 2 * max_m + 1), dtype=complex)
        for n in range(1, max_n + 1):
            for m in range(-max_m, max_m + 1):
                if m != 0 and selection_allows(n, m, config.p):
                    columns[n - 1, m + max_m] = rho_closed(n, m, state, config)
        tail = float(np.max(np.abs(columns[-1]))) if max_n > max_m else 0.0
        return cls(config=config, state=state, columns=columns,
                   rows=columns[:min(max_n, max_m)].copy(),
                   tail_bound=tail, method="closed", tol=0.0)


def _selection_mask(upper, lower, p):
    return ((lower[None, :] - upper[:, None]) % p == 0) & (lower[None, :] != 0)


def _next_pow2(n):
    return 1 << max(8, int(math.ceil(math.log2(max(n, 1)))))


def _generating_phase(state, config, size):
    """Phase Phi on the FFT grid: sum_k rho_k^(n) e^{ik theta} = exp(i n Phi(theta))."""
    theta = 2.0 * np.pi * np.arange(size) / size
    p = config.p
    inner = 1.0 + config.sigma * state.kappa * np.conj(state.lam) * np.exp(-1j * p * theta)
    return theta + (2.0 / p) * (state.theta + np.angle(inner))


def _tail_cutoff(magnitudes, tol, floor):
    """Index where three consecutive magnitudes are below tol with ratio < 0.9."""
    mags = np.where(magnitudes <= floor, 0.0, magnitudes)
    if mags.size < 3:
        return None, None
    below = mags < tol
    previous = mags[1:-1]
    ratio = np.divide(mags[2:], previous, out=np.zeros_like(previous), where=previous > 0.0)
    hits = np.nonzero(below[2:] & below[1:-1] & below[:-2] & (ratio < TAIL_RATIO))[0]
    if hits.size == 0:
        return None, None
    i = int(hits[0])
    return i + 2, mags[i + 2] / (1.0 - ratio[i])


def _envelope_cutoff(state, config, max_m, tol):
    """
    Upper-index cutoff from the column envelope |rho_m^(n)|^2 ~ s^(2|m|/p) e^(-s).

    Here s = (n / p) * kappa_c^2. The share of a column's weight beyond s is at most
    Q(2|m|/p + 2, s), so the widest column fixes the cutoff.
    """
    weight = state.kappa_c ** 2
    if weight == 0.0:
        return math.inf
    s_end = float(gammainccinv(2.0 * max_m / config.p + 2.0, min(tol, 0.5)))
    return config.p * int(math.ceil(s_end / weight)) + max_m + config.p


def _beyond_cap_tail(state, config, max_m):
    """Magnitude estimate of the first entries past MAX_UPPER_INDEX."""
    k_abs = abs(state.kappa)
    if abs(config.gamma) > 1.0:
        return k_abs ** ((MAX_UPPER_INDEX - max_m) / config.p)
    bound = 0.0
    for m in range(-max_m, max_m + 1):
        if m == 0:
            continue
        n_first = MAX_UPPER_INDEX + 1 + (m - MAX_UPPER_INDEX - 1) % config.p
        limit = abs(rho_asymptotic(n_first, m, config))
        bound = max(bound, limit * k_abs ** ((n_first - abs(m)) / config.p))
    return bound


def _identity_table(config, state, max_m, tol):
    columns = np.zeros((max_m, 2 * max_m + 1), dtype=complex)
    for n in range(1, max_m + 1):
        columns[n - 1, n + max_m] = state.lam_power(2.0 * n / config.p)
    return CoeffTable(config=config, state=state, columns=columns, rows=columns.copy(),
                      tail_bound=0.0, method="exact", tol=tol)


def rho_table(config, tau, max_m, tol):
    """
    Batch table of coefficients with an adaptive upper-index cutoff.

    Rows rho_k^(u), u <= max_m, are Fourier coefficients of exp(i u Phi(theta));
    columns with large upper index follow from the index-exchange symmetries.
    For |kappa| < 0.9 the cutoff comes from the geometric tail rule; closer to
    kappa = 1 the columns stop decaying geometrically and the cutoff comes from
    their envelope. The FFT grid is doubled until the guard band is clean.
    """
    if max_m < 1:
        raise DomainError(f"max_m must be >= 1, got {max_m}")
    if not tol > 0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    state = kappa_state(tau, config)
    if state.kappa == 0.0:
        return _identity_table(config, state, max_m, tol)

    p = config.p
    k_abs = abs(state.kappa)
    if k_abs < TAIL_RATIO:
        envelope = None
        estimate = max_m + math.log(1.0 / tol) * p / -math.log(k_abs) + 64
    else:
        envelope = _envelope_cutoff(state, config, max_m, tol)
        if envelope > MAX_UPPER_INDEX:
            tail = _beyond_cap_tail(state, config, max_m)
            raise AccuracyError(
                f"column m = {max_m} needs n up to {envelope:.3g} > {MAX_UPPER_INDEX} at kappa = {state.kappa}",
                {"m": max_m, "kappa": state.kappa, "kappa_c": state.kappa_c, "cutoff": envelope,
                 "tail_bound": tail},
            )
        estimate = envelope
    size = _next_pow2(int(8 * estimate / 3) + 64)
    upper = np.arange(1, max_m + 1)

    while True:
        if size > MAX_FFT_SIZE:
            raise AccuracyError(
                f"FFT grid exceeded {MAX_FFT_SIZE} points at kappa = {state.kappa}",
                {"m": max_m, "kappa": state.kappa, "kappa_c": state.kappa_c, "tail_bound": math.inf},
            )
        phase = _generating_phase(state, config, size)
        spectrum = np.fft.fft(np.exp(1j * upper[:, None] * phase[None, :]), axis=1) / size
        guard = np.abs(spectrum[:, 3 * size // 8: 5 * size // 8 + 1]).max()
        if guard > GUARD_LEVEL:
            logger.debug(f"FFT size {size}: guard band level {guard:.2e}, doubling")
            size *= 2
            continue

        if envelope is not None:
            cutoff = envelope
            columns = _symmetric_columns(spectrum, state, config, cutoff, size)
            tail = float(np.max(np.abs(columns[cutoff - p:])))
            break
        limit = 3 * size // 8
        columns = _symmetric_columns(spectrum, state, config, limit, size)
        cutoff, tail = _geometric_cutoff(columns, config, tol, size)
        if cutoff is None:
            logger.debug(f"FFT size {size}: tail rule not met below n = {limit}, doubling")
            size *= 2
            continue
        if cutoff > MAX_UPPER_INDEX:
            raise AccuracyError(
                f"cutoff {cutoff} exceeds {MAX_UPPER_INDEX} at kappa = {state.kappa}",
                {"m": max_m, "kappa": state.kappa, "cutoff": cutoff, "tail_bound": float(tail)},
            )
        break

    width = cutoff
    rows = np.concatenate([spectrum[:, size - width:], spectrum[:, :width + 1]], axis=1)
    lower = np.arange(-width, width + 1)
    rows = np.where(_selection_mask(upper, lower, p), rows, 0.0)
    columns = columns[:cutoff]
    columns[:max_m, :] = rows[:, width - max_m: width + max_m + 1][:min(max_m, cutoff)]
    logger.debug(f"rho_table p={p} gamma={config.gamma} tau={tau}: FFT {size}, cutoff {cutoff}, tail {tail:.2e}")
    return CoeffTable(config=config, state=state, columns=columns, rows=rows,
                      tail_bound=float(tail), method="fft", tol=tol)


def _symmetric_columns(spectrum, state, config, limit, size):
    """Columns n = 1..limit from the rows via the index-exchange symmetries."""
    p = config.p
    max_m = spectrum.shape[0]
    n = np.arange(1, limit + 1)
    columns = np.zeros((limit, 2 * max_m + 1), dtype=complex)
    for k in range(1, max_m + 1):
        plus = (n - k) % p == 0
        sign = np.where(((n - k) // p) % 2 == 0, 1.0, -1.0)
        columns[:, max_m + k] = np.where(plus, sign * (n / k) * spectrum[k - 1, n], 0.0)

        minus = (n + k) % p == 0
        sign = np.where(((n + k) // p + 1) % 2 == 0, 1.0, -1.0)
        phase = np.exp(2j * (n - k) * state.theta / p)
        columns[:, max_m - k] = np.where(minus, sign * (n / k) * phase * spectrum[k - 1, size - n], 0.0)
    return columns


def _geometric_cutoff(columns, config, tol, size):
    """(cutoff, tail) from the geometric tail rule on every column, or (None, None)."""
    p = config.p
    max_m = (columns.shape[1] - 1) // 2
    n = np.arange(1, columns.shape[0] + 1)
    noise = 64 * np.finfo(float).eps * math.log2(size)
    cutoff, tail = max_m, 0.0
    for m in range(-max_m, max_m + 1):
        if m == 0:
            continue
        picks = np.nonzero(((n - m) % p == 0) & (n >= abs(m)))[0]
        if picks.size == 0:
            continue
        mags = np.abs(columns[picks, max_m + m])
        index, bound = _tail_cutoff(mags, tol, noise * n[picks] / abs(m))
        if index is None:
            return None, None
        cutoff = max(cutoff, int(n[picks[index]]))
        tail = max(tail, bound)
    return cutoff, tail


def _oracle_chain(residue_class, n_modes, p):
    """Lower indices |k| <= n_modes congruent to residue_class mod p, k = 0 excluded."""
    k = np.arange(-n_modes, n_modes + 1)
    return k[(k != 0) & ((k - residue_class) % p == 0)]


def _integrate_chain(config, tau_end, lower, uppers):
    """Evolve rho_k^(n) over one chain of lower indices for the given upper indices."""
    p, sigma, gamma = config.p, config.sigma, config.gamma
    size, width = lower.size, uppers.size
    # k and k + p are neighbours unless the step crosses the absent k = 0
    linked = np.diff(lower) == p
    up = np.zeros(size)
    down = np.zeros(size)
    up[:-1] = np.where(linked, sigma * (lower[:-1] + p), 0.0)
    down[1:] = np.where(linked, -sigma * (lower[1:] - p), 0.0)
    rotation = 2.0 * gamma * lower

    initial = np.zeros((size, width))
    initial[np.searchsorted(lower, uppers), np.arange(width)] = 1.0
    half = size * width

    def rhs(_, y):
        re = y[:half].reshape(size, width)
        im = y[half:].reshape(size, width)
        d_re = -rotation[:, None] * im
        d_im = rotation[:, None] * re
        d_re[:-1] += up[:-1, None] * re[1:]
        d_im[:-1] += up[:-1, None] * im[1:]
        d_re[1:] += down[1:, None] * re[:-1]
        d_im[1:] += down[1:, None] * im[:-1]
        return np.concatenate([d_re.ravel(), d_im.ravel()])

    y0 = np.concatenate([initial.ravel(), np.zeros(half)])
    solution = solve_ivp(rhs, (0.0, tau_end), y0, method="DOP853", rtol=ODE_RTOL, atol=ODE_ATOL)
    if solution.status < 0:
        raise IntegrationError(f"ODE integration failed: {solution.message}",
                               {"tau": float(solution.t[-1]), "n_modes": int(lower.max())})
    y = solution.y[:, -1]
    logger.debug(f"ODE chain of {size} modes, p={p} gamma={gamma} tau={tau_end}: {solution.nfev} evaluations")
    return y[:half].reshape(size, width) + 1j * y[half:].reshape(size, width)


def _oracle_rows(config, tau_end, n_modes, max_n):
    """rows[n - 1, k + n_modes] = rho_k^(n) with the lower index truncated at |k| <= n_modes."""
    p = config.p
    rows = np.zeros((max_n, 2 * n_modes + 1), dtype=complex)
    upper = np.arange(1, max_n + 1)
    for residue_class in range(p):
        uppers = upper[upper % p == residue_class]
        if uppers.size == 0:
            continue
        lower = _oracle_chain(residue_class, n_modes, p)
        if tau_end == 0:
            final = (lower[:, None] == uppers[None, :]).astype(complex)
        else:
            final = _integrate_chain(config, tau_end, lower, uppers)
        rows[np.ix_(uppers - 1, lower + n_modes)] = final.T
    return rows


def rho_ode_oracle(config, tau_end, n_modes, max_n=9, tol=ORACLE_CONVERGENCE):
    """
    Integrate the coupled slow-time equations for lower indices -N..-1, 1..N.

    Upper index n only couples lower indices congruent to n mod p, so each
    residue class is evolved as its own chain from rho_k^(n)(0) = delta_kn.
    rho_0 is absent. The mode count starts at the larger of ``n_modes`` and
    ORACLE_REACH * p / kappa_c^2 and is doubled until two runs agree on the
    entries |m|, n <= max_n to ``tol``.
    """
    if n_modes < max_n + config.p:
        raise DomainError(f"n_modes={n_modes} too small for max_n={max_n}")
    if not tau_end >= 0:
        raise DomainError(f"tau_end must be non-negative, got {tau_end}")
    state = kappa_state(tau_end, config)
    weight = state.kappa_c ** 2
    reach = ORACLE_REACH * config.p / weight if weight > 0.0 else math.inf
    if reach > ORACLE_MAX_MODES // 2:
        raise AccuracyError(
            f"direct integration needs about {reach:.3g} modes at kappa_c = {state.kappa_c:.3g}",
            {"required_modes": reach, "max_modes": ORACLE_MAX_MODES, "kappa_c": state.kappa_c,
             "tail_bound": math.inf},
        )
    modes = max(n_modes, int(math.ceil(reach)))
    previous = _oracle_rows(config, tau_end, modes, max_n)
    change = math.inf
    while True:
        if 2 * modes > ORACLE_MAX_MODES:
            raise AccuracyError(
                f"direct integration not converged with {modes} modes at kappa_c = {state.kappa_c:.3g}",
                {"n_modes": modes, "last_change": change, "kappa_c": state.kappa_c, "tail_bound": change},
            )
        current = _oracle_rows(config, tau_end, 2 * modes, max_n)
        change = float(np.max(np.abs(current[:, 2 * modes - max_n: 2 * modes + max_n + 1]
                                     - previous[:, modes - max_n: modes + max_n + 1])))
        modes *= 2
        if change < tol:
            break
        logger.debug(f"ODE oracle: {modes} modes changed entries by {change:.2e}, doubling")
        previous = current

    columns = current[:, modes - max_n: modes + max_n + 1].copy()
    tail = float(np.max(np.abs(current[:, [0, -1]])))
    logger.info(f"ODE oracle p={config.p} gamma={config.gamma} tau={tau_end}: converged with {modes} modes")
    return CoeffTable(config=config, state=state, columns=columns, rows=current,
                      tail_bound=tail, method="ode", tol=tol)


@dataclass(frozen=True)
class UnitarityReport:
    orthogonality: float    # sum over lower index, target n * delta_nk
    completeness: float     # sum over upper index, target delta_mj
    symmetry: float         # sum over upper index, target 0
    tail_bound: float
    budget: float = 0.0     # weight the truncated tail can still carry in the m-weighted sums

    @property
    def worst(self):
        return max(self.orthogonality, self.completeness, self.symmetry)

    def passed(self, tol):
        return self.worst + self.budget < tol


def unitarity_residuals(table):
    """Maximum deviations of the three unitarity sums from their targets."""
    width = table.width
    lower = np.arange(-width, width + 1)
    rows = table.rows
    n_rows = table.n_rows
    gram = np.conj(rows) @ (rows * lower[None, :]).T
    orthogonality = float(np.max(np.abs(gram - np.diag(np.arange(1, n_rows + 1)))))

    max_m = table.max_m
    n = table.upper_indices()[:, None].astype(float)
    positive = table.columns[:, max_m + 1:]
    negative = table.columns[:, max_m - 1::-1]          # m = -1, -2, ..., -max_m
    weights = np.arange(1, max_m + 1)[:, None]
    direct = np.conj(positive).T @ (positive / n)
    reflected = negative.T @ (np.conj(negative) / n)
    completeness = float(np.max(np.abs(weights * (direct - reflected) - np.eye(max_m))))

    mixed = np.conj(positive).T @ (negative / n)
    symmetry = float(np.max(np.abs(mixed - mixed.T)))
    return UnitarityReport(orthogonality=orthogonality, completeness=completeness, symmetry=symmetry,
                           tail_bound=table.tail_bound, budget=max_m * table.tail_bound ** 2)


@dataclass(frozen=True)
class RecurrenceReport:
    upper: float        # n >= p branch
    lower: float        # n < p branch with the conjugated partner
    step: float

    @property
    def worst(self):
        return max(self.upper, self.lower)


# (offset in steps, weight); both divide by 12 h
CENTRAL_STENCIL = ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0))
FORWARD_STENCIL = ((0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0))


def recurrence_residuals(config, tau, table, step=None):
    """
    Finite-difference check of the upper-index recurrences.

    Tables at tau +- h, tau +- 2h are built with the same width and tolerance as
    ``table`` and combined with a fourth-order central stencil; closer than 2h
    to tau = 0 a fourth-order forward stencil is used.
    """
    h = step if step is not None else 1e-4 * max(1.0, tau)
    max_m, tol = table.max_m, table.tol if table.tol > 0 else 1e-12
    stencil = CENTRAL_STENCIL if tau >= 2 * h else FORWARD_STENCIL
    shifted = [(weight, table if offset == 0 else rho_table(config, tau + offset * h, max_m, tol))
               for offset, weight in stencil]
    depth = min([table.max_n] + [neighbour.max_n for _, neighbour in shifted])
    derivative = sum(weight * neighbour.columns[:depth] for weight, neighbour in shifted) / (12 * h)

    p, sigma, gamma = config.p, config.sigma, config.gamma
    values = table.columns[:depth]
    checked = min(depth - p, 3 * max_m)
    upper_res, lower_res = 0.0, 0.0
    for n in range(1, checked + 1):
        ahead = values[n + p - 1]
        if n >= p:
            behind = values[n - p - 1] if n > p else np.zeros_like(ahead)
        else:
            # conj(rho_{-m}^(p-n)) in column m
            behind = np.conj(values[p - n - 1][::-1])
        expected = n * (sigma * (behind - ahead) + 2j * gamma * values[n - 1])
        residual = float(np.max(np.abs(derivative[n - 1] - expected)))
        if n >= p:
            upper_res = max(upper_res, residual)
        else:
            lower_res = max(lower_res, residual)
    return RecurrenceReport(upper=upper_res, lower=lower_res, step=h)
