"""Farm credit accounting and the two-sided token traceability check."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .kinetics import ResponseClass, equilibrium_rf, classify

DEFAULT_CR0 = 500.0
DEFAULT_ALPHA = 0.05


@dataclass(frozen=True)
class FarmAccount:
    farm_id: str
    credits: float = DEFAULT_CR0
    cum_freq_E: int = 0
    cum_freq_notE: int = 0
    history: tuple[tuple[int, float], ...] = ((0, DEFAULT_CR0),)
    # f_E before the latest recorded round; the credit rule fires when it moved
    prev_freq_E: int = 0

    @classmethod
    def open(cls, farm_id: str, cr0: float = DEFAULT_CR0) -> "FarmAccount":
        return cls(farm_id, cr0, history=((0, cr0),))

    @property
    def rounds(self) -> int:
        return self.cum_freq_E + self.cum_freq_notE


@dataclass(frozen=True)
class TokenTransfer:
    farm_id: str
    round: int
    declared_tokens: float
    detected_tokens: float

    def __post_init__(self):
        if self.declared_tokens < 0 or self.detected_tokens < 0:
            raise ValueError("token amounts must be >= 0")


def is_class_e(posterior_column, predicate: str = "argmax", p_not_e_threshold: float = 0.8) -> bool:
    """Round-level E / not-E decision for one farm.

    ``argmax``: E is the most probable class (ties resolve to the lower class).
    ``p_not_e``: the farm is compliant when P(not E) >= ``p_not_e_threshold``.
    """
    col = np.asarray(posterior_column, dtype=float)
    if predicate == "argmax":
        return int(col.argmax()) == ResponseClass.E.index and col.sum() > 0
    if predicate == "p_not_e":
        return (1.0 - col[ResponseClass.E.index]) < p_not_e_threshold
    raise ValueError(f"unknown compliance predicate {predicate!r}")


def record_classification(account: FarmAccount, in_class_e: bool) -> FarmAccount:
    if in_class_e:
        return replace(account, cum_freq_E=account.cum_freq_E + 1, prev_freq_E=account.cum_freq_E)
    return replace(account, cum_freq_notE=account.cum_freq_notE + 1, prev_freq_E=account.cum_freq_E)


def update_credit(account: FarmAccount, p_E: float, alpha: float = DEFAULT_ALPHA,
                  round_no: int | None = None) -> FarmAccount:
    """Apply the penalty/reward rule for the round just recorded.

    Only when the farm's cumulative class-E count changed this round:
    ``credits - p_E * exp(alpha f_E) + (1 - p_E) * exp(alpha f_notE)``.
    Otherwise the balance is carried over unchanged.
    """
    if not 0.0 <= p_E <= 1.0:
        raise ValueError("p_E must lie in [0, 1]")
    credits = account.credits
    if account.cum_freq_E != account.prev_freq_E:
        credits = (credits
                   - p_E * math.exp(alpha * account.cum_freq_E)
                   + (1.0 - p_E) * math.exp(alpha * account.cum_freq_notE))
    t = account.rounds if round_no is None else round_no
    return replace(account, credits=credits, history=account.history + ((t, credits),))


def class_token_amount(cls: ResponseClass, alpha: float = DEFAULT_ALPHA) -> float:
    """Tokens owed for a detected class: exp(alpha * i), i = 1..5 for A..E."""
    return math.exp(alpha * cls.code)


def declared_tokens_for_usage(bag_fraction: float, tokens_per_bag: float = 1000) -> float:
    if not 0.0 <= bag_fraction <= 1.0:
        raise ValueError("bag_fraction must lie in [0, 1]")
    return bag_fraction * tokens_per_bag


def declared_class_tokens(conc: float, k_D: float, alpha: float = DEFAULT_ALPHA) -> float:
    """Farmer-side amount in class-token units for an applied concentration.

    The farmer reads their class off the published RF curve and owes the same
    per-class amount the regulator charges for a detection.
    """
    return class_token_amount(classify(float(equilibrium_rf(conc, k_D))), alpha)


def detected_class_tokens(posterior_column, alpha: float = DEFAULT_ALPHA) -> float:
    col = np.asarray(posterior_column, dtype=float)
    if col.sum() == 0:
        return 0.0
    return class_token_amount(ResponseClass(int(col.argmax())), alpha)


def traceability_check(transfer: TokenTransfer, threshold: float = 1e-3) -> bool:
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    return abs(transfer.declared_tokens - transfer.detected_tokens) < threshold


def write_credit_history_csv(path, accounts: Iterable[FarmAccount], f_e_history=None) -> None:
    """Rows of (round, farm_id, credits, f_E).

    ``f_e_history`` maps farm_id to the per-round f_E sequence; without it the
    final count is repeated.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "farm_id", "credits", "f_E"])
        for acct in accounts:
            fe = (f_e_history or {}).get(acct.farm_id)
            for i, (t, credits) in enumerate(acct.history):
                writer.writerow([t, acct.farm_id, credits, fe[i] if fe is not None else acct.cum_freq_E])
