"""Intercept-resend eavesdropper acting on Bob's arm."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import (
    ALL_SETTINGS,
    AliceConditional,
    MeasurementSetting,
    PairSource,
    ResentState,
    collapse_and_resend,
)
from .protocols import ProtocolSpec


@dataclass(frozen=True)
class EveStrategy:
    """Intercept a fraction of Bob's photons, measuring each in a policy-drawn setting.

    ``basis_policy`` of None means uniform over the settings Bob may use in
    the attacked protocol.
    """

    intercept_fraction: float = 0.0
    basis_policy: dict | None = None

    def __post_init__(self):
        f = float(self.intercept_fraction)
        if not 0.0 <= f <= 1.0:
            raise DomainError(f"intercept_fraction must lie in [0, 1], got {f}")
        object.__setattr__(self, "intercept_fraction", f)
        if self.basis_policy is not None:
            policy = {
                (s if isinstance(s, MeasurementSetting) else MeasurementSetting.from_code(s)): float(p)
                for s, p in self.basis_policy.items()
            }
            if any(p < 0 for p in policy.values()) or abs(sum(policy.values()) - 1.0) > 1e-9:
                raise DomainError("Eve's basis policy must be a probability distribution")
            object.__setattr__(self, "basis_policy", policy)

    def policy(self, spec: ProtocolSpec | None = None) -> dict[MeasurementSetting, float]:
        if self.basis_policy is not None:
            return dict(self.basis_policy)
        settings = spec.allowed("B") if spec is not None else ALL_SETTINGS
        return {s: 1.0 / len(settings) for s in settings}

    def policy_vector(self, spec: ProtocolSpec | None = None) -> np.ndarray:
        policy = self.policy(spec)
        return np.array([policy.get(s, 0.0) for s in ALL_SETTINGS])

    def to_dict(self) -> dict:
        out = {"intercept_fraction": self.intercept_fraction}
        if self.basis_policy is not None:
            out["basis_policy"] = {s.code: p for s, p in self.basis_policy.items()}
        return out


NO_EVE = EveStrategy(0.0)


@dataclass(frozen=True)
class EveRound:
    touched: bool
    eve_setting: MeasurementSetting | None = None
    eve_outcome: tuple[int, int] | None = None
    resent: ResentState | None = None
    alice_conditional: AliceConditional | None = None


def eve_process_round(
    source: PairSource, strategy: EveStrategy, rng: np.random.Generator, spec: ProtocolSpec | None = None
) -> EveRound:
    """One round of the attack: passthrough, or collapse and resend."""
    if rng.random() >= strategy.intercept_fraction:
        return EveRound(touched=False)
    policy = strategy.policy(spec)
    settings = list(policy)
    setting = settings[int(rng.choice(len(settings), p=np.array([policy[s] for s in settings])))]
    hit = collapse_and_resend(source, setting, rng)
    return EveRound(True, setting, hit.eve_outcome, hit.resent, hit.alice_conditional)
