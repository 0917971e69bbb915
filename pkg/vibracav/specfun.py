"""
Special-function kernels.

Complete elliptic integrals (AGM), the Gauss hypergeometric series with the
1 - z linear transformations, Legendre and Hermite recurrences and log-gamma.
Everything here is a pure function of its arguments.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

from .errors import AccuracyError, DomainError, PolynomialOverflowError

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps
DIRECT_SERIES_LIMIT = 0.7      # direct series below, 1 - z transformation above
DIRECT_FALLBACK_LIMIT = 0.97   # direct series still tried as a second opinion up to here
MAX_SERIES_TERMS = 20000
AGM_MAX_ITERATIONS = 64


@dataclass(frozen=True)
class EllipticPair:
    K: float          # complete elliptic integral of the first kind
    E: float          # complete elliptic integral of the second kind
    kappa: float      # modulus
    kappa_c: float    # complementary modulus sqrt(1 - kappa^2)


def ln_gamma(x):
    """Natural logarithm of the gamma function for x > 0."""
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"ln_gamma requires a finite x > 0, got {x}")
    return math.lgamma(x)


def _is_nonpositive_integer(x):
    return x <= 0 and x == math.floor(x)


def _lgamma_signed(x):
    """Return (log|Gamma(x)|, sign). Sign 0 marks a pole."""
    if _is_nonpositive_integer(x):
        return math.inf, 0
    if x > 0:
        return math.lgamma(x), 1
    sign = -1 if math.floor(x) % 2 else 1
    return math.lgamma(x), sign


def gamma_ratio(numerator, denominator):
    """Product of Gamma(x) over ``numerator`` divided by the product over ``denominator``.

    A pole in the denominator gives 0; a pole in the numerator is a domain error.
    """
    log_value = 0.0
    sign = 1
    for x in numerator:
        lg, s = _lgamma_signed(x)
        if s == 0:
            raise DomainError(f"gamma pole at {x} in numerator")
        log_value += lg
        sign *= s
    for x in denominator:
        lg, s = _lgamma_signed(x)
        if s == 0:
            return 0.0
        log_value -= lg
        sign *= s
    return sign * math.exp(log_value)


def elliptic_KE(kappa, kappa_c=None):
    """
    Complete elliptic integrals K(kappa) and E(kappa) by the arithmetic-geometric mean.

    Args:
        kappa: Modulus in [0, 1).
        kappa_c: Optional complementary modulus sqrt(1 - kappa^2). Pass it when it
            is known more accurately than 1 - kappa^2 allows, e.g. kappa_c = 1e-12.

    Returns:
        EllipticPair with K and E to full double precision.
    """
    if kappa_c is None:
        if not 0 <= kappa < 1:
            raise DomainError(f"elliptic modulus must lie in [0, 1), got {kappa}")
        kappa_c = math.sqrt((1.0 - kappa) * (1.0 + kappa))
    else:
        if not 0 < kappa_c <= 1 or kappa < 0:
            raise DomainError(f"complementary modulus must lie in (0, 1], got {kappa_c}")

    a, b, c = 1.0, kappa_c, kappa
    weighted = [0.5 * c * c]
    power = 0.5
    for _ in range(AGM_MAX_ITERATIONS):
        if abs(c) <= EPS * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        power *= 2.0
        weighted.append(power * c * c)
    K = math.pi / (2.0 * a)
    E = K * (1.0 - math.fsum(weighted))
    return EllipticPair(K=K, E=E, kappa=kappa, kappa_c=kappa_c)


def _direct_series(a, b, c, z, max_terms=MAX_SERIES_TERMS):
    """Sum the hypergeometric series at z. Returns (value, error estimate)."""
    term = 1.0
    terms = [1.0]
    scale = 1.0
    for k in range(max_terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * z
        terms.append(term)
        scale += abs(term)
        if term == 0.0:
            break
        # once the ratio has settled below one the tail is geometric
        ratio = abs((a + k + 1) * (b + k + 1) / ((c + k + 1) * (k + 2)) * z)
        if ratio < 1.0 and abs(term) * ratio / (1.0 - ratio) <= 0.25 * EPS * scale:
            break
    else:
        raise AccuracyError(
            f"hypergeometric series did not converge in {max_terms} terms",
            {"partial_sum": math.fsum(terms), "terms": max_terms, "a": a, "b": b, "c": c, "z": z},
        )
    value = math.fsum(terms)
    error = 4 * EPS * math.fsum(abs(t) for t in terms)
    return value, error


def _terminating(a, b, c, z):
    degree = min(int(-x) for x in (a, b) if _is_nonpositive_integer(x))
    term = 1.0
    terms = [1.0]
    for k in range(degree):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * z
        terms.append(term)
    return math.fsum(terms), 4 * EPS * math.fsum(abs(t) for t in terms)


def _log_case(a, b, m, w):
    """F(a, b; a + b + m; 1 - w) for integer m >= 0, w in (0, 0.3]."""
    parts = []
    if m > 0:
        prefactor = gamma_ratio([m, a + b + m], [a + m, b + m])
        term = 1.0
        finite = [1.0]
        for k in range(m - 1):
            term *= (a + k) * (b + k) / ((k + 1) * (1 - m + k)) * w
            finite.append(term)
        parts.extend(prefactor * t for t in finite)

    prefactor = (-w) ** m * gamma_ratio([a + b + m], [a, b])
    if prefactor == 0.0:
        value = math.fsum(parts)
        return value, 4 * EPS * math.fsum(abs(t) for t in parts)

    log_w = math.log(w)
    psi_1 = float(digamma(1.0))
    psi_m1 = float(digamma(m + 1.0))
    psi_a = float(digamma(a + m))
    psi_b = float(digamma(b + m))
    coefficient = 1.0 / math.factorial(m)
    scale = math.fsum(abs(t) for t in parts)
    for k in range(MAX_SERIES_TERMS):
        bracket = log_w - psi_1 - psi_m1 + psi_a + psi_b
        contribution = -prefactor * coefficient * bracket
        parts.append(contribution)
        scale += abs(contribution)
        coefficient *= (a + m + k) * (b + m + k) / ((k + 1) * (k + m + 1)) * w
        psi_1 += 1.0 / (k + 1)
        psi_m1 += 1.0 / (k + m + 1)
        psi_a += 1.0 / (a + m + k)
        psi_b += 1.0 / (b + m + k)
        if coefficient == 0.0:
            break
        if k > 2 and abs(prefactor * coefficient) * (abs(bracket) + 1.0) <= 0.25 * EPS * scale:
            break
    else:
        raise AccuracyError(
            "logarithmic hypergeometric expansion did not converge",
            {"partial_sum": math.fsum(parts), "a": a, "b": b, "m": m, "w": w},
        )
    value = math.fsum(parts)
    return value, 8 * EPS * math.fsum(abs(t) for t in parts)


def _transformed(a, b, c, w):
    """F(a, b; c; 1 - w) through the 1 - z linear transformations."""
    s = c - a - b
    m = round(s)
    if abs(s - m) < 1e-13:
        if m >= 0:
            return _log_case(a, b, m, w)
        # Euler transformation flips the sign of c - a - b
        value, error = _log_case(c - a, c - b, -m, w)
        factor = w ** s
        return factor * value, factor * error

    first, first_error = _direct_series(a, b, 1.0 - s, w)
    second, second_error = _direct_series(c - a, c - b, 1.0 + s, w)
    g1 = gamma_ratio([c, s], [c - a, c - b])
    g2 = w ** s * gamma_ratio([c, -s], [a, b])
    value = g1 * first + g2 * second
    error = abs(g1) * first_error + abs(g2) * second_error + 4 * EPS * (abs(g1 * first) + abs(g2 * second))
    return value, error


def hyp2f1(a, b, c, z, one_minus_z=None):
    """
    Gauss hypergeometric function F(a, b; c; z) for real parameters and 0 <= z <= 1.

    ``one_minus_z`` may be supplied when 1 - z is known more accurately than the
    subtraction would give (arguments such as 1 - kappa^2 near kappa = 1).
    """
    if _is_nonpositive_integer(c) and not (
        (_is_nonpositive_integer(a) and a > c) or (_is_nonpositive_integer(b) and b > c)
    ):
        raise DomainError(f"c must not be a non-positive integer, got {c}")
    w = (1.0 - z) if one_minus_z is None else one_minus_z
    if z < 0 or w < 0:
        raise DomainError(f"hyp2f1 requires 0 <= z <= 1, got z={z}")
    if z == 0:
        return 1.0
    if _is_nonpositive_integer(a) or _is_nonpositive_integer(b):
        return _terminating(a, b, c, z)[0]
    if w == 0:
        if c - a - b <= 0:
            raise DomainError(f"F(a, b; c; 1) diverges for c - a - b = {c - a - b}")
        return gamma_ratio([c, c - a - b], [c - a, c - b])
    if z <= DIRECT_SERIES_LIMIT:
        return _direct_series(a, b, c, z)[0]

    value, error = _transformed(a, b, c, w)
    if error > 1e-13 * abs(value) and z <= DIRECT_FALLBACK_LIMIT:
        direct, direct_error = _direct_series(a, b, c, z)
        logger.debug(f"hyp2f1({a}, {b}; {c}; {z}): transform err {error:.3g}, direct err {direct_error:.3g}")
        if direct_error < error:
            return direct
    return value


def legendre_P(n, z):
    """Legendre polynomial P_n(z) by the three-term recurrence."""
    if n < 0:
        raise DomainError(f"degree must be non-negative, got {n}")
    previous, current = 1.0, float(z)
    if n == 0:
        return previous
    for k in range(1, n):
        previous, current = current, ((2 * k + 1) * z * current - k * previous) / (k + 1)
    if not math.isfinite(current):
        raise PolynomialOverflowError(
            f"P_{n}({z}) overflows double precision; use the asymptotic form",
            {"n": n, "z": z},
        )
    return current


def legendre_scaled(n_max, zt, t2):
    """
    Sequence q_n = t^n P_n(z) for n = 0..n_max given zt = z*t and t2 = t^2.

    The scaled sequence stays finite when z is imaginary or huge as long as
    z*t and t^2 are moderate, which is how the photon-number formulas use it.
    """
    dtype = complex if isinstance(zt, complex) or isinstance(t2, complex) else float
    q = np.zeros(n_max + 1, dtype=dtype)
    q[0] = 1.0
    if n_max >= 1:
        q[1] = zt
    for k in range(1, n_max):
        q[k + 1] = ((2 * k + 1) * zt * q[k] - k * t2 * q[k - 1]) / (k + 1)
    return q


def hermite_H(n, z):
    """Physicists' Hermite polynomial H_n(z) for complex z."""
    if n < 0:
        raise DomainError(f"degree must be non-negative, got {n}")
    z = complex(z)
    previous, current = 1.0 + 0j, 2.0 * z
    if n == 0:
        return previous
    for k in range(1, n):
        previous, current = current, 2.0 * z * current - 2.0 * k * previous
    return current
