"""Closed-form exponents of the averaging and iteration arguments.

The integrability threshold for a selected averaging exponent gamma is
q > 2 kappa / (kappa - 1) = (1 + d1 + d2) / gamma, where kappa is the
Sobolev conjugate 1/(2 kappa) = 1/2 - gamma / (1 + d1 + d2).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import InputError, ThresholdError

GAMMA_CHOICES = ("VAL", "lip", "NA", "bdd")


@dataclass(frozen=True)
class ExponentTable:
    alpha: float
    delta: float
    d1: int
    d2: int
    q: float
    gamma_choice: str
    varsigma: float
    gamma_VAL: float
    gamma_lip: float
    gamma_NA: float
    gamma_bdd: float
    gamma: float
    kappa: float
    theta: float
    vartheta: float
    q_min: float
    q_min_bdd: float
    q_min_reg: float
    rho_exponent: float
    eps_degiorgi: float

    def as_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        """One ``key=value`` line per field."""
        return "".join(f"{k}={v!r}\n" for k, v in self.as_dict().items())


def varsigma(alpha: float) -> float:
    return alpha / (4.0 + alpha)


def gamma_val(alpha: float, delta: float, d2: int) -> float:
    return 2.0 * alpha * delta / ((4.0 + alpha) * (2.0 + 2.0 * delta + d2))


def gamma_lip(alpha: float, delta: float, d2: int) -> float:
    return alpha * delta / (alpha * delta + 2.0 * d2)


def gamma_na(alpha: float, delta: float) -> float:
    return alpha * delta / (2.0 + alpha * delta)


def gamma_bdd(alpha: float, d2: int) -> float:
    """Lipschitz b with delta = 1; equals 1/(1+2d) at alpha = 1."""
    return gamma_lip(alpha, 1.0, d2)


def kappa_of(gamma: float, d1: int, d2: int) -> float:
    """Solve 1/(2 kappa) = 1/2 - gamma/(1 + d1 + d2)."""
    return 1.0 / (1.0 - 2.0 * gamma / (1.0 + d1 + d2))


def _threshold_name(choice: str, alpha: float, delta: float, d1: int, d2: int) -> str:
    if choice in ("bdd", "lip") and alpha == 1 and (choice == "bdd" or delta == 1) and d1 == d2:
        return "q>(1+2d)^2"
    if choice == "VAL" and delta == 1:
        return "q>(4+alpha)(4+d2)(1+d1+d2)/(2alpha)"
    return f"q>(1+d1+d2)/gamma_{choice}"


def exponent_table(alpha: float, delta: float = 1.0, d1: int = 1, d2: int = 1, q: float = 100.0,
                   gamma_choice: str = "bdd") -> ExponentTable:
    """Evaluate every exponent; raise ThresholdError if q is not admissible
    for the selected gamma."""
    if not (0 < alpha <= 1):
        raise InputError(f"alpha must lie in (0, 1], got {alpha}")
    if not (0 < delta <= 1):
        raise InputError(f"delta must lie in (0, 1], got {delta}")
    if d1 < 1 or d2 < 1:
        raise InputError("dimensions must be positive")
    if gamma_choice not in GAMMA_CHOICES:
        raise InputError(f"gamma_choice must be one of {GAMMA_CHOICES}")
    g = {"VAL": gamma_val(alpha, delta, d2), "lip": gamma_lip(alpha, delta, d2),
         "NA": gamma_na(alpha, delta), "bdd": gamma_bdd(alpha, d2)}
    gamma = g[gamma_choice]
    D = 1.0 + d1 + d2
    kappa = kappa_of(gamma, d1, d2)
    q_min = D / gamma
    if not q > q_min:
        name = _threshold_name(gamma_choice, alpha, delta, d1, d2)
        raise ThresholdError(f"q = {q} violates {name} = {q_min:.6g} (gamma choice {gamma_choice!r})")
    theta = kappa / ((kappa - 1.0) * q)
    return ExponentTable(
        alpha=alpha, delta=delta, d1=d1, d2=d2, q=q, gamma_choice=gamma_choice,
        varsigma=varsigma(alpha), gamma_VAL=g["VAL"], gamma_lip=g["lip"], gamma_NA=g["NA"],
        gamma_bdd=g["bdd"], gamma=gamma, kappa=kappa, theta=theta, vartheta=1.0 / (1.0 - theta),
        q_min=q_min,
        q_min_bdd=(4.0 + alpha) * (4.0 + d2) * D / (2.0 * alpha),
        q_min_reg=(1.0 + 2.0 * d2) ** 2,
        rho_exponent=(2.0 + alpha) / (4.0 + alpha),
        eps_degiorgi=1.0 - 1.0 / kappa - 2.0 / q,
    )
