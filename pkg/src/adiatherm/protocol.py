"""Estimators for the thermal-preparation protocol.

The X-based entropy estimate, the noisy-entropy model, finite-difference
temperature extraction, the decay-rate fit, and the observable-to-temperature
arithmetic used for hardware-style measurement records. Everything here is
pure scalar/array math; circuit execution lives in ``experiments``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.optimize

from .errors import NumericalError

LN2 = math.log(2.0)

FLAT_E_THRESHOLD = 1e-6  # |dE/dbeta0| below this is flagged, not divided


@dataclass(frozen=True)
class CurveRecord:
    """One protocol data point at a given initial inverse temperature."""

    beta0: float
    energy: float
    entropy: float
    p: float
    m_steps: int
    dt: float
    n_qubits: int
    beta_f: float = math.nan
    flat_e: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.beta0) and math.isfinite(self.energy)):
            raise NumericalError(f"non-finite record at beta0={self.beta0}")
        if not -1e-9 <= self.entropy <= LN2 + 1e-9:
            raise NumericalError(
                f"entropy density {self.entropy} outside [0, ln 2] at beta0={self.beta0}"
            )


@dataclass(frozen=True)
class TimeSeries:
    """Sampled observable trace; ``kind`` is "entropy" or "energy"."""

    times: tuple[float, ...]
    values: tuple[float, ...]
    kind: str

    def __post_init__(self):
        if self.kind not in ("entropy", "energy"):
            raise ValueError(f"unknown series kind {self.kind!r}")
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")


@dataclass(frozen=True)
class DecayFit:
    """Exponential-decay fit of an entropy trace."""

    alpha: float
    r: float
    rms: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("decay rate must be >= 0")
        if not 0.0 < self.r <= 1.0:
            raise ValueError("residual amplitude must be in (0, 1]")


@dataclass(frozen=True)
class HardwareObservables:
    """Energy densities and mirror X means with their standard errors."""

    zz: float
    x: float
    e: float
    zz_prime: float
    x_prime: float
    e_prime: float
    m: float
    m_prime: float
    se_zz: float = 0.0
    se_x: float = 0.0
    se_e: float = 0.0
    se_zz_prime: float = 0.0
    se_x_prime: float = 0.0
    se_e_prime: float = 0.0
    se_m: float = 0.0
    se_m_prime: float = 0.0

    def __post_init__(self):
        if abs(self.m) > 1 + 1e-9 or abs(self.m_prime) > 1 + 1e-9:
            raise ValueError("mirror X means must lie in [-1, 1]")


@dataclass(frozen=True)
class BetaEstimate:
    """Inverse temperature with first-order propagated errors."""

    beta: float
    beta_err: float
    temperature: float
    temperature_err: float
    overflow: bool = False


# --------------------------------------------------------------------------
# scalar estimators

def entropy_from_x(mean_x: float) -> float:
    """Entropy density (nats/site) of a product X-thermal state with <X>=m."""
    if abs(mean_x) > 1.0 + 1e-12:
        raise ValueError(f"mean X {mean_x} outside [-1, 1]")
    m = min(1.0, max(-1.0, mean_x))
    q = 0.5 * (1.0 + m)
    s = 0.0
    if q > 0.0:
        s -= q * math.log(q)
    if q < 1.0:
        s -= (1.0 - q) * math.log(1.0 - q)
    return s


def s0_of_beta0(beta0: float) -> float:
    """Entropy density of the product X-thermal state at beta0 (symmetric)."""
    return entropy_from_x(math.tanh(beta0))


def predicted_noisy_entropy(beta0: float, r: float) -> float:
    """Entropy density when the measured X has decayed to r*tanh(beta0)."""
    if not 0.0 < r <= 1.0:
        raise ValueError(f"noise amplitude r={r} outside (0, 1]")
    return entropy_from_x(r * math.tanh(beta0))


def d_noisy_entropy_d_beta0(beta0: float, r: float) -> float:
    """Closed-form derivative of ``predicted_noisy_entropy`` in beta0.

    Negative for beta0 > 0 (entropy falls as the start gets colder); it
    matches centered finite differences of the predicted entropy.
    """
    if not 0.0 < r <= 1.0:
        raise ValueError(f"noise amplitude r={r} outside (0, 1]")
    th = math.tanh(beta0)
    num = r * (1.0 - r * r * th * th) * math.atanh(r * th)
    den = 1.0 + (1.0 - r * r) * math.sinh(beta0) ** 2
    return -num / den


def beta_max_scaling(r: float, c: float) -> float:
    """Magnitude of the largest attainable inverse temperature, 2|log(1-r)|/C."""
    if not 0.0 < r < 1.0:
        raise ValueError(f"noise amplitude r={r} outside (0, 1)")
    if not c > 0.0:
        raise ValueError("model constant must be positive")
    return abs(2.0 * math.log(1.0 - r)) / c


def beta_closed_form(beta0: float, de_dbeta0: float) -> float:
    """Final inverse temperature -beta0 (1 - tanh^2 beta0) / dE/dbeta0."""
    if de_dbeta0 == 0.0:
        raise ZeroDivisionError("dE/dbeta0 is zero")
    th = math.tanh(beta0)
    return -beta0 * (1.0 - th * th) / de_dbeta0


def estimate_beta_curve(
    records: list[CurveRecord], flat_threshold: float = FLAT_E_THRESHOLD
) -> list[CurveRecord]:
    """Fill beta_f = dS/dE via finite differences over the beta0 grid.

    Centered three-point differences on the interior, one-sided two-point at
    the ends. Records where |dE/dbeta0| falls below ``flat_threshold`` are
    flagged (beta_f = nan) instead of divided.
    """
    if len(records) < 3:
        raise ValueError("need at least 3 records to differentiate")
    beta0 = np.array([r.beta0 for r in records])
    if np.any(np.diff(beta0) <= 0):
        raise ValueError("records must be sorted by strictly increasing beta0")
    energy = np.array([r.energy for r in records])
    entropy = np.array([r.entropy for r in records])
    de = np.gradient(energy, beta0, edge_order=1)
    ds = np.gradient(entropy, beta0, edge_order=1)
    out = []
    for rec, d_e, d_s in zip(records, de, ds):
        if abs(d_e) < flat_threshold:
            out.append(replace(rec, beta_f=math.nan, flat_e=True))
        else:
            out.append(replace(rec, beta_f=float(d_s / d_e), flat_e=False))
    return out


def _mean_x_for_entropy(s: float) -> float:
    """Nonnegative m with entropy_from_x(m) = s (inverse binary entropy)."""
    if not 0.0 <= s <= LN2 + 1e-12:
        raise ValueError(f"entropy {s} outside [0, ln 2]")
    if s >= LN2:
        return 0.0
    if s <= 0.0:
        return 1.0
    return scipy.optimize.brentq(lambda m: entropy_from_x(m) - s, 0.0, 1.0 - 1e-15)


def fit_decay(series: TimeSeries, beta0: float) -> DecayFit:
    """Least-squares fit of the decay rate in S(t) = H2(e^{-a t} tanh b0)."""
    if series.kind != "entropy":
        raise ValueError("decay fit needs an entropy series")
    if beta0 == 0.0:
        raise ValueError("decay model is degenerate at beta0 = 0")
    times = np.array(series.times)
    values = np.array(series.values)
    tb = abs(math.tanh(beta0))

    def model(alpha: float) -> np.ndarray:
        return np.array([entropy_from_x(math.exp(-alpha * t) * tb) for t in times])

    # initial guess from inverting the endpoint entropy
    t_end = times[-1]
    try:
        m_end = _mean_x_for_entropy(min(values[-1], LN2))
        guess = -math.log(max(m_end / tb, 1e-12)) / t_end if t_end > 0 else 0.0
    except ValueError:
        guess = 0.0
    guess = max(guess, 0.0)

    res = scipy.optimize.least_squares(
        lambda a: model(a[0]) - values,
        x0=[guess],
        bounds=([0.0], [np.inf]),
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
    )
    if not res.success:
        raise NumericalError("decay fit did not converge")
    alpha = float(res.x[0])
    rms = float(np.sqrt(np.mean((model(alpha) - values) ** 2)))
    return DecayFit(alpha=alpha, r=math.exp(-alpha * times[-1]), rms=rms)


# --------------------------------------------------------------------------
# hardware-record arithmetic

def beta_from_observables(
    e: float,
    e_prime: float,
    m: float,
    m_prime: float,
    se_e: float = 0.0,
    se_e_prime: float = 0.0,
    se_m: float = 0.0,
    se_m_prime: float = 0.0,
) -> BetaEstimate:
    """beta = (1/2) (m-m')/(e-e') log((1-m)/(1+m)), with propagated errors.

    ``m = m'`` gives beta = 0 (infinite temperature). ``m -> +-1`` makes the
    log diverge; the estimate is returned as a flagged overflow with
    beta = +-inf and temperature 0.
    """
    if e == e_prime:
        raise ZeroDivisionError("e and e' coincide; beta is undefined")
    de = e - e_prime
    dm = m - m_prime
    if abs(m) >= 1.0 - 1e-12:
        # log((1-m)/(1+m)) -> +inf as m -> -1, -inf as m -> +1
        log_term = math.inf if m < 0 else -math.inf
        beta = 0.0 if dm == 0.0 else 0.5 * (dm / de) * log_term
        has_err = bool(se_e or se_e_prime or se_m or se_m_prime)
        return BetaEstimate(
            beta=beta,
            beta_err=math.nan if has_err else 0.0,
            temperature=math.inf if beta == 0.0 else 0.0,
            temperature_err=math.nan if has_err else 0.0,
            overflow=True,
        )
    log_term = math.log((1.0 - m) / (1.0 + m))
    beta = 0.5 * (dm / de) * log_term
    # first-order propagation
    d_beta_d_e = -beta / de
    d_beta_d_ep = beta / de
    d_beta_d_m = 0.5 * log_term / de + 0.5 * (dm / de) * (-2.0 / (1.0 - m * m))
    d_beta_d_mp = -0.5 * log_term / de
    var = (
        (d_beta_d_e * se_e) ** 2
        + (d_beta_d_ep * se_e_prime) ** 2
        + (d_beta_d_m * se_m) ** 2
        + (d_beta_d_mp * se_m_prime) ** 2
    )
    beta_err = math.sqrt(var)
    if beta == 0.0:
        return BetaEstimate(beta=0.0, beta_err=beta_err,
                            temperature=math.inf, temperature_err=math.inf,
                            overflow=False)
    temperature = 1.0 / beta
    temperature_err = beta_err / beta**2
    return BetaEstimate(beta, beta_err, temperature, temperature_err, overflow=False)


def hardware_summary(obs: HardwareObservables) -> dict:
    """Entropy density, inverse temperature and temperature for one record set."""
    s = entropy_from_x(obs.m)
    # dS/dm = -arctanh(m); propagate the m standard error
    if abs(obs.m) < 1.0:
        s_err = abs(math.atanh(obs.m)) * obs.se_m
    else:
        s_err = 0.0
    est = beta_from_observables(
        obs.e, obs.e_prime, obs.m, obs.m_prime,
        se_e=obs.se_e, se_e_prime=obs.se_e_prime,
        se_m=obs.se_m, se_m_prime=obs.se_m_prime,
    )
    return {
        "entropy_density": s,
        "entropy_density_err": s_err,
        "beta": est.beta,
        "beta_err": est.beta_err,
        "temperature": est.temperature,
        "temperature_err": est.temperature_err,
        "overflow": est.overflow,
    }
