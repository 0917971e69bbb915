"""
Photon-number distributions of single-mode Gaussian states.

Three exact routes are provided and cross-checked against each other: the
Taylor coefficients of the generating function, the Legendre closed form for
zero-mean states and the finite Hermite sum for displaced states. Long-time
asymptotic forms are available with explicit validity checks.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import gammaln

from .errors import AccuracyError, DomainError, RegimeError, UnphysicalStateError
from .specfun import legendre_scaled

logger = logging.getLogger(__name__)

UNCERTAINTY_SLACK = 1e-12
NEGATIVE_ROUNDOFF = 1e-12       # larger negative probabilities are reported, not clamped
ZERO_PHOTONS = 1e-14
DEFAULT_TAIL_MASS = 1e-12        # probability and mean left beyond a default n_max
MAX_DEFAULT_N = 100_000
DEGENERATE_DELTA = 1e-14
METHODS = ("generating_series", "legendre", "hermite", "planck", "asymptotic")

# validity of the long-time forms
LAPLACE_HEINE_MIN_GAP = 0.5
LAPLACE_HEINE_MIN_N = 5
LARGE_V_MIN_V = 10.0
LARGE_V_MAX_U = 2.0


@dataclass(frozen=True)
class MomentSummary:
    n_bar: float        # mean photon number
    sigma_n: float      # photon-number variance
    Q: float            # Mandel parameter
    limit: bool         # Q is the analytic n_bar -> 0 limit, not a ratio


def moments_and_q(u, v, squeezed=True):
    """
    Mean, variance and Mandel parameter of a zero-mean Gaussian state.

    Args:
        u: Minimal invariant variance.
        v: Maximal invariant variance.
        squeezed: Which limit to report when the state is the vacuum: the squeezed
            branch approaches Q = 1, the thermal branch Q = 0.
    """
    n_bar = 0.5 * (u + v - 1.0)
    sigma_n = 0.25 * (2.0 * u * u + 2.0 * v * v - 1.0)
    if n_bar < ZERO_PHOTONS:
        return MomentSummary(n_bar=max(n_bar, 0.0), sigma_n=max(sigma_n, 0.0),
                             Q=1.0 if squeezed else 0.0, limit=True)
    # sigma/n_bar - 1 written without the cancellation near the vacuum
    Q = ((u - 0.5) ** 2 + (v - 0.5) ** 2) / (u + v - 1.0)
    return MomentSummary(n_bar=n_bar, sigma_n=sigma_n, Q=Q, limit=False)


def default_n_max(n_bar, sigma_n):
    """First guess for the truncation; the tail check below may extend it."""
    return int(math.ceil(n_bar + 12.0 * math.sqrt(max(sigma_n, 0.0)) + 20.0))


def tail_ratio(v):
    """Geometric decay rate (2v - 1) / (2v + 1) of f(n) set by the larger invariant variance."""
    return (2.0 * v - 1.0) / (2.0 * v + 1.0) if v > 0.5 else 0.0


def tail_estimate(f, ratio):
    """
    Probability mass and mean photon number beyond the last entry of ``f``.

    The tail is bounded by a geometric series from the largest of the last two
    entries (odd entries vanish for squeezed vacua), at the larger of ``ratio``
    and the decay rate observed over the last two steps.
    """
    if len(f) < 3:
        return 1.0, 1.0
    peak = float(max(f[-1], f[-2], 0.0))
    if peak == 0.0:
        return 0.0, 0.0
    observed = math.sqrt(f[-1] / f[-3]) if f[-3] > 0 and f[-1] > 0 else 0.0
    r = min(max(ratio, observed), 1.0 - 1e-9)
    n_last = len(f) - 1
    mass = peak * r / (1.0 - r)
    return mass, mass * (n_last + 1.0 / (1.0 - r))


def _cover_tail(build, n_bar, sigma_n, ratio):
    """Call ``build(n_max)``, doubling n_max until the tail estimate is below DEFAULT_TAIL_MASS."""
    n_max = default_n_max(n_bar, sigma_n)
    while True:
        dist = build(n_max)
        mass, mean = tail_estimate(dist.f, ratio)
        if max(mass, mean) < DEFAULT_TAIL_MASS:
            return dist
        if n_max >= MAX_DEFAULT_N:
            raise AccuracyError(
                f"photon distribution tail {mass:.2e} still open at n_max = {n_max}",
                {"n_max": n_max, "tail_mass": mass, "tail_mean": mean, "ratio": ratio},
            )
        logger.debug(f"tail mass {mass:.2e} at n_max={n_max}, doubling")
        n_max = min(2 * n_max, MAX_DEFAULT_N)


@dataclass
class GaussianModeState:
    mean_q: float
    mean_p: float
    U: float            # variance of q
    V: float            # variance of p
    Y: float            # symmetrized covariance
    determinant: float = field(init=False)

    def __post_init__(self):
        self.mean_q, self.mean_p = float(self.mean_q), float(self.mean_p)
        self.U, self.V, self.Y = float(self.U), float(self.V), float(self.Y)
        self.determinant = self.U * self.V - self.Y ** 2
        if self.U <= 0 or self.V <= 0 or self.determinant < 0.25 - UNCERTAINTY_SLACK:
            raise UnphysicalStateError(
                f"second moments violate the uncertainty relation: U={self.U}, V={self.V}, Y={self.Y}",
                {"U": self.U, "V": self.V, "Y": self.Y, "determinant": self.determinant},
            )

    @classmethod
    def from_stats(cls, stats, mean_q=0.0, mean_p=0.0):
        """Build from anything carrying U, V, Y (e.g. observables.QuadratureStats)."""
        return cls(mean_q=mean_q, mean_p=mean_p, U=stats.U, V=stats.V, Y=stats.Y)

    @property
    def delta(self):
        return math.hypot(self.U - self.V, 2.0 * self.Y)

    @property
    def invariants(self):
        """(u, v): eigenvalues of the covariance matrix."""
        half_sum = 0.5 * (self.U + self.V)
        half_gap = 0.5 * self.delta
        return half_sum - half_gap, half_sum + half_gap

    @property
    def D(self):
        return 1.0 + 2.0 * (self.U + self.V) + 4.0 * self.determinant

    @property
    def has_means(self):
        return self.mean_q != 0.0 or self.mean_p != 0.0

    def g_coefficients(self):
        """(g0, g1, g2) of the exponential factor of the generating function."""
        q, p, U, V, Y = self.mean_q, self.mean_p, self.U, self.V, self.Y
        g0 = p * p * (2 * U + 1) + q * q * (2 * V + 1) - 4 * p * q * Y
        g1 = (2 * p * p * (U * U + Y * Y + U + 0.25) + 2 * q * q * (V * V + Y * Y + V + 0.25)
              - 4 * p * q * Y * (U + V + 1))
        g2 = (2 * p * p * (U * U + Y * Y - 0.25) + 2 * q * q * (V * V + Y * Y - 0.25)
              - 4 * p * q * Y * (U + V))
        return g0, g1, g2

    def quadratic(self):
        """Coefficients (c0, c1, c2) of the quadratic in the generating function."""
        det, trace = self.determinant, self.U + self.V
        return (0.25 * (1 + 4 * det + 2 * trace),
                0.5 * (1 - 4 * det),
                0.25 * (1 + 4 * det - 2 * trace))

    def moments(self):
        """Mean and variance of the photon number, means included."""
        q, p, U, V, Y = self.mean_q, self.mean_p, self.U, self.V, self.Y
        n_bar = 0.5 * (U + V - 1.0) + 0.5 * (q * q + p * p)
        sigma_n = 0.5 * (U * U + V * V + 2 * Y * Y) - 0.25 + (U * q * q + 2 * Y * q * p + V * p * p)
        return n_bar, sigma_n


@dataclass
class PhotonDistribution:
    f: np.ndarray           # probabilities f(0..n_max)
    n_bar: float
    sigma_n: float
    Q: float
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown distribution method '{self.method}'")
        self.f = np.asarray(self.f, dtype=float)

    @property
    def n_max(self):
        return len(self.f) - 1

    @property
    def mass(self):
        return math.fsum(self.f)

    def moments_from_f(self):
        n = np.arange(len(self.f))
        mean = float(np.dot(n, self.f))
        return mean, float(np.dot(n * n, self.f)) - mean * mean

    def to_frame(self):
        return pd.DataFrame({"n": np.arange(len(self.f)), "f": self.f})

    @classmethod
    def planck(cls, n_bar, n_max):
        """Thermal distribution N^n / (N + 1)^(n + 1) with the same mean photon number."""
        if n_bar < 0:
            raise DomainError(f"mean photon number must be non-negative, got {n_bar}")
        n = np.arange(n_max + 1)
        ratio = n_bar / (n_bar + 1.0)
        f = np.power(ratio, n) / (n_bar + 1.0)
        return cls(f=f, n_bar=n_bar, sigma_n=n_bar * (n_bar + 1.0), Q=n_bar, method="planck")


def _finalize(f, method, n_bar, sigma_n, Q):
    worst = float(np.min(f)) if len(f) else 0.0
    if worst < -NEGATIVE_ROUNDOFF:
        raise AccuracyError(
            f"{method} route produced a negative probability {worst:.3e}",
            {"method": method, "min_f": worst, "index": int(np.argmin(f))},
        )
    return PhotonDistribution(f=np.clip(f, 0.0, None), n_bar=n_bar, sigma_n=sigma_n, Q=Q, method=method)


def _check_invariants(u, v):
    if u * v < 0.25 - UNCERTAINTY_SLACK or u <= 0:
        raise UnphysicalStateError(f"invariant variances violate uv >= 1/4: u={u}, v={v}",
                                   {"u": u, "v": v})
    if u > v + UNCERTAINTY_SLACK:
        raise DomainError(f"expected u <= v, got u={u}, v={v}")


def _vacuum_series(c0, c1, c2, n_max):
    """Taylor coefficients of (c0 + c1 z + c2 z^2)^(-1/2)."""
    f = np.zeros(n_max + 1)
    f[0] = 1.0 / math.sqrt(c0)
    if n_max >= 1:
        f[1] = -c1 * f[0] / (2.0 * c0)
    for n in range(1, n_max):
        f[n + 1] = -((2 * n + 1) * c1 * f[n] + 2 * n * c2 * f[n - 1]) / (2.0 * c0 * (n + 1))
    return f


def pdf_vacuum_seeded(u, v, n_max=None):
    """Photon distribution of a zero-mean state from its invariant variances."""
    _check_invariants(u, v)
    summary = moments_and_q(u, v)
    if n_max is None:
        return _cover_tail(lambda n: pdf_vacuum_seeded(u, v, n), summary.n_bar, summary.sigma_n, tail_ratio(v))
    if n_max < 0:
        raise DomainError(f"n_max must be non-negative, got {n_max}")
    c0 = 0.25 * (2 * u + 1) * (2 * v + 1)
    c1 = 0.5 * (1 - 4 * u * v)
    c2 = 0.25 * (2 * u - 1) * (2 * v - 1)
    f = _vacuum_series(c0, c1, c2, n_max)
    return _finalize(f, "generating_series", summary.n_bar, summary.sigma_n, summary.Q)


def pdf_legendre(u, v, n_max=None):
    """
    Legendre closed form for a zero-mean state, through the scaled sequence t^n P_n(z).

    With z*t and t^2 both real the sequence is real even when 2u < 1 and the
    Legendre argument itself is imaginary.
    """
    _check_invariants(u, v)
    summary = moments_and_q(u, v)
    if n_max is None:
        return _cover_tail(lambda n: pdf_legendre(u, v, n), summary.n_bar, summary.sigma_n, tail_ratio(v))
    denominator = (2 * u + 1) * (2 * v + 1)
    zt = (4 * u * v - 1) / denominator
    t2 = (2 * u - 1) * (2 * v - 1) / denominator
    f = 2.0 / math.sqrt(denominator) * legendre_scaled(n_max, zt, t2)
    return _finalize(f, "legendre", summary.n_bar, summary.sigma_n, summary.Q)


def _state_summary(state):
    n_bar, sigma_n = state.moments()
    if n_bar < ZERO_PHOTONS:
        return n_bar, sigma_n, 0.0
    return n_bar, sigma_n, sigma_n / n_bar - 1.0


def generating_series(state, n_max=None):
    """Taylor coefficients of the full generating function, exponential factor included."""
    n_bar, sigma_n, Q = _state_summary(state)
    if n_max is None:
        return _cover_tail(lambda n: generating_series(state, n), n_bar, sigma_n, tail_ratio(state.invariants[1]))
    c0, c1, c2 = state.quadratic()
    vacuum = _vacuum_series(c0, c1, c2, n_max)
    if not state.has_means:
        return _finalize(vacuum, "generating_series", n_bar, sigma_n, Q)

    g0, g1, g2 = state.g_coefficients()
    D = state.D
    size = n_max + 1
    # 1 / quadratic
    inverse = np.zeros(size)
    inverse[0] = 1.0 / c0
    for n in range(1, size):
        tail = c1 * inverse[n - 1] + (c2 * inverse[n - 2] if n >= 2 else 0.0)
        inverse[n] = -tail / c0
    numerator = np.zeros(size)
    if size > 1:
        numerator[1] = g1
    if size > 2:
        numerator[2] = -g2
    h = np.convolve(numerator, inverse)[:size] / D
    h[0] -= g0 / D

    # exp of a power series: n e_n = sum_k k h_k e_{n-k}
    weighted = np.arange(size) * h
    exponential = np.zeros(size)
    exponential[0] = math.exp(h[0])
    for n in range(1, size):
        exponential[n] = np.dot(weighted[1:n + 1], exponential[n - 1::-1]) / n
    f = np.convolve(vacuum, exponential)[:size]
    return _finalize(f, "generating_series", n_bar, sigma_n, Q)


def _hermite_sequence(state, n_max):
    """tau_j = h_j / sqrt(j!) where exp(-r a^2 / 2 + y a) = sum_j h_j a^j / j!."""
    q, p, U, V, Y = state.mean_q, state.mean_p, state.U, state.V, state.Y
    D = state.D
    r = 2.0 * complex(V - U, -2.0 * Y) / D
    y = math.sqrt(2.0) * complex((2 * V + 1) * q - 2 * Y * p, (1 + 2 * U) * p - 2 * Y * q) / D
    tau = np.zeros(n_max + 1, dtype=complex)
    tau[0] = 1.0
    if n_max >= 1:
        tau[1] = y
    for j in range(1, n_max):
        tau[j + 1] = (y * tau[j] - r * math.sqrt(j) * tau[j - 1]) / math.sqrt(j + 1)
    return tau


def pdf_gaussian(state, n_max=None):
    """
    Photon distribution of a general Gaussian state from the finite Hermite sum.

    f(n) = F0 sum_k C(n, k) (S/D)^k |tau_(n-k)|^2 with S = 4 det - 1 >= 0, so the
    sum has no cancellations. States with equal variances and non-zero means
    go through the generating series instead.
    """
    D = state.D
    if D <= 0:
        raise UnphysicalStateError(f"D = {D} must be positive", {"D": D})
    n_bar, sigma_n, Q = _state_summary(state)
    if n_max is None:
        return _cover_tail(lambda n: pdf_gaussian(state, n), n_bar, sigma_n, tail_ratio(state.invariants[1]))
    if state.has_means and state.delta < DEGENERATE_DELTA:
        logger.debug("equal variances with non-zero means, using the generating series")
        return generating_series(state, n_max)

    g0, _, _ = state.g_coefficients()
    log_f0 = math.log(2.0) - 0.5 * math.log(D) - g0 / D
    amplitudes = np.abs(_hermite_sequence(state, n_max)) ** 2
    S = max(4.0 * state.determinant - 1.0, 0.0)

    f = np.zeros(n_max + 1)
    if S == 0.0:
        f[:] = math.exp(log_f0) * amplitudes
    else:
        log_ratio = math.log(S / D)
        for n in range(n_max + 1):
            k = np.arange(n + 1)
            log_weights = (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
                           + k * log_ratio + log_f0)
            f[n] = float(np.dot(np.exp(log_weights), amplitudes[n - k]))
    return _finalize(f, "hermite", n_bar, sigma_n, Q)


def generating_function_eval(state, z):
    """G(z) including the mean-dependent exponential factor."""
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"z must lie in [0, 1], got {z}")
    c0, c1, c2 = state.quadratic()
    quadratic = c0 + c1 * z + c2 * z * z
    if quadratic <= 0:
        raise UnphysicalStateError(f"generating-function quadratic is {quadratic} at z={z}",
                                   {"z": z, "value": quadratic})
    g0, g1, g2 = state.g_coefficients()
    exponent = ((z * g1 - z * z * g2) / quadratic - g0) / state.D
    return math.exp(exponent) / math.sqrt(quadratic)


def asymptotic_regimes(u, v, n):
    """Names of the long-time forms whose validity conditions hold at (u, v, n)."""
    regimes = []
    if v - u >= LAPLACE_HEINE_MIN_GAP and n >= LAPLACE_HEINE_MIN_N:
        regimes.append("laplace_heine")
    if v >= LARGE_V_MIN_V and u <= LARGE_V_MAX_U and n < 8.0 * v * v:
        regimes.append("large_v")
    return regimes


def pdf_asymptotic(u, v, n, regime=None):
    """
    Long-time estimate of f(n) for a zero-mean state.

    Args:
        u, v: Invariant variances.
        n: Photon number.
        regime: "laplace_heine" (n >> 1, v - u not small), "large_v" (v >> 1,
            u of order one, n << 8 v^2) or None for the first one that applies.

    Returns:
        (estimate, regime name). The exact routes stay authoritative.
    """
    _check_invariants(u, v)
    valid = asymptotic_regimes(u, v, n)
    if regime is None:
        if not valid:
            raise RegimeError(f"no asymptotic form applies at u={u}, v={v}, n={n}",
                              {"u": u, "v": v, "n": n})
        regime = valid[0]
    elif regime not in ("laplace_heine", "large_v"):
        raise DomainError(f"unknown asymptotic regime '{regime}'")
    elif regime not in valid:
        raise RegimeError(f"{regime} form is not valid at u={u}, v={v}, n={n}",
                          {"u": u, "v": v, "n": n, "regime": regime})

    if regime == "laplace_heine":
        estimate = ((2 * v - 1) / (2 * v + 1)) ** (n + 0.5) / math.sqrt(math.pi * n * (v - u))
    else:
        scaled = legendre_scaled(n, 2 * u / (2 * u + 1), (2 * u - 1) / (2 * u + 1))[n]
        estimate = (math.sqrt(2.0) / math.sqrt(v * (2 * u + 1)) * math.exp(-n / (2.0 * v)) * scaled)
    return float(estimate), regime
