"""Seeded synthetic mobile-money transaction streams with account-takeover fraud.

Randomness comes from numpy's PCG64 bit generator seeded with the config seed,
so a config reproduces the same stream on every platform.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import IO, Iterator

import numpy as np

from .data import TX_TYPES, Transaction, TxType

DEFAULT_TYPE_MIX = {
    "CASH_IN": 0.22,
    "CASH_OUT": 0.35,
    "DEBIT": 0.01,
    "PAYMENT": 0.34,
    "TRANSFER": 0.08,
}

_CASH_IN = TX_TYPES.index(TxType.CASH_IN)
_SENDER_TRIES = 32
_OUTGOING = (TxType.CASH_OUT, TxType.DEBIT, TxType.PAYMENT, TxType.TRANSFER)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    n_steps: int = 720
    customers: int = 1000
    merchants: int = 200
    tx_per_step_mean: float = 7.0
    type_mix: dict = field(default_factory=lambda: dict(DEFAULT_TYPE_MIX))
    amount_log_mean: float = 5.0
    amount_log_sigma: float = 1.2
    income_log_mean: float = 6.5
    balance_log_mean: float = 9.0
    balance_log_sigma: float = 1.0
    fraud_scenario_rate: float = 7e-4
    seed: int = 0
    drift: None = None  # reserved for concept-drift injection

    def __post_init__(self):
        mix = self.type_mix
        if isinstance(mix, (list, tuple)):
            if len(mix) != len(TX_TYPES):
                raise ConfigError("type_mix needs one probability per transaction type")
            mix = {t.value: float(p) for t, p in zip(TX_TYPES, mix)}
        unknown = set(mix) - {t.value for t in TX_TYPES}
        if unknown:
            raise ConfigError(f"type_mix has unknown types {sorted(unknown)}")
        mix = {t.value: float(mix.get(t.value, 0.0)) for t in TX_TYPES}
        object.__setattr__(self, "type_mix", mix)
        if any(p < 0 for p in mix.values()) or abs(sum(mix.values()) - 1.0) > 1e-9:
            raise ConfigError("type_mix must be non-negative and sum to 1")
        for name in ("n_steps", "customers", "merchants"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not self.tx_per_step_mean > 0:
            raise ConfigError("tx_per_step_mean must be positive")
        if not 0 <= self.fraud_scenario_rate <= 1:
            raise ConfigError("fraud_scenario_rate must lie in [0, 1]")
        if self.amount_log_sigma < 0 or self.balance_log_sigma < 0:
            raise ConfigError("lognormal sigmas must be non-negative")
        if self.drift is not None:
            raise ConfigError("drift injection is reserved and not supported")

    @property
    def mix_vector(self) -> np.ndarray:
        return np.array([self.type_mix[t.value] for t in TX_TYPES])

    @property
    def legal_per_step_mean(self) -> float:
        return self.tx_per_step_mean * self.customers / 100.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as err:
            raise ConfigError(str(err)) from None

    @classmethod
    def load(cls, fh: IO) -> "GeneratorConfig":
        try:
            d = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)


@dataclass
class AccountState:
    id: str
    balance: float

    def __post_init__(self):
        if self.balance < 0:
            raise ValueError("balance must be non-negative")


def _cents(x: float) -> float:
    return round(float(x), 2)


def inject_fraud_scenario(victim: AccountState, step: int, rng: np.random.Generator,
                          mule_id: str, n_merchants: int = 1) -> list[Transaction]:
    """Account takeover: drain the victim into a fresh mule, then cash the mule out.

    Returns ``[TRANSFER, CASH_OUT]``, both fraudulent, or ``[]`` when the
    victim has nothing to steal. The victim's balance is set to zero.
    """
    amount = victim.balance
    if amount <= 0:
        return []
    agent = f"M{int(rng.integers(0, n_merchants))}"
    victim.balance = 0.0
    return [
        Transaction(step, TxType.TRANSFER, amount, victim.id, amount, 0.0,
                    mule_id, 0.0, amount, True),
        Transaction(step, TxType.CASH_OUT, amount, mule_id, amount, 0.0,
                    agent, 0.0, 0.0, True),
    ]


class TransactionGenerator:
    """Iterable transaction stream for one config.

    Legal amounts are lognormal; CASH_IN deposits use ``income_log_mean`` so
    that accounts are replenished. Each step draws ``Poisson(tx_per_step_mean * customers / 100)`` legal
    transactions and ``Binomial(customers, fraud_scenario_rate)`` distinct
    takeover victims, interleaved in a random order. Outgoing transactions
    clamp the sender's balance at zero. An outgoing transaction drawn for an
    empty account is reassigned to a customer with funds (up to 32 redraws,
    then declined and not emitted), so the emitted type mix follows
    ``type_mix``. TRANSFER and CASH_IN credit their destination. Counters (``n_legal``, ``n_declined``, ``n_scenarios``,
    ``n_skipped``) are filled in as the stream is consumed.
    """

    def __init__(self, cfg: GeneratorConfig):
        self.cfg = cfg
        self.n_legal = 0
        self.n_scenarios = 0
        self.n_skipped = 0
        self.n_declined = 0

    def __iter__(self) -> Iterator[Transaction]:
        cfg = self.cfg
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        customers = [AccountState(f"C{i}", _cents(b)) for i, b in enumerate(
            rng.lognormal(cfg.balance_log_mean, cfg.balance_log_sigma, cfg.customers))]
        merchants = [0.0] * cfg.merchants
        mix = cfg.mix_vector
        lam = cfg.legal_per_step_mean
        n_mules = 0
        for step in range(cfg.n_steps):
            n_legal = int(rng.poisson(lam))
            n_victims = int(rng.binomial(cfg.customers, cfg.fraud_scenario_rate))
            victims = rng.choice(cfg.customers, n_victims, replace=False) if n_victims else []
            types = rng.choice(len(TX_TYPES), n_legal, p=mix)
            origs = rng.integers(0, cfg.customers, n_legal)
            peers = rng.integers(0, max(cfg.customers - 1, 1), n_legal)
            shops = rng.integers(0, cfg.merchants, n_legal)
            amounts = rng.lognormal(cfg.amount_log_mean, cfg.amount_log_sigma, n_legal)
            income = rng.lognormal(cfg.income_log_mean, cfg.amount_log_sigma, n_legal)
            amounts = np.where(types == _CASH_IN, income, amounts)
            order = rng.permutation(n_legal + n_victims)
            for slot in order:
                if slot >= n_legal:
                    victim = customers[victims[slot - n_legal]]
                    self.n_scenarios += 1
                    txs = inject_fraud_scenario(victim, step, rng, f"C{cfg.customers + n_mules}",
                                                cfg.merchants)
                    if txs:
                        n_mules += 1
                    else:
                        self.n_skipped += 1
                    yield from txs
                    continue
                tx_type = TX_TYPES[types[slot]]
                orig = int(origs[slot])
                if tx_type in _OUTGOING and customers[orig].balance <= 0:
                    orig = self._funded_sender(rng, customers)
                    if orig is None:
                        self.n_declined += 1
                        continue
                self.n_legal += 1
                yield self._legal(step, tx_type, customers[orig],
                                  int(peers[slot]), orig, int(shops[slot]),
                                  _cents(amounts[slot]), customers, merchants)

    @staticmethod
    def _funded_sender(rng, customers, tries: int = _SENDER_TRIES):
        for _ in range(tries):
            i = int(rng.integers(0, len(customers)))
            if customers[i].balance > 0:
                return i
        return None

    def _legal(self, step, tx_type, sender, peer, orig_idx, shop, amount,
               customers, merchants) -> Transaction:
        old = sender.balance
        if tx_type in _OUTGOING:
            sender.balance = _cents(max(0.0, old - amount))
        else:
            sender.balance = _cents(old + amount)
        if tx_type is TxType.TRANSFER and len(customers) > 1:
            dest = customers[peer + (peer >= orig_idx)]
            d_old = dest.balance
            dest.balance = _cents(d_old + amount)
            d_id, d_new = dest.id, dest.balance
        elif tx_type is TxType.CASH_IN or tx_type is TxType.TRANSFER:
            d_old = merchants[shop]
            merchants[shop] = _cents(d_old + amount)
            d_id, d_new = f"M{shop}", merchants[shop]
        else:
            d_id, d_old, d_new = f"M{shop}", 0.0, 0.0
        return Transaction(step, tx_type, amount, sender.id, old, sender.balance,
                           d_id, d_old, d_new, False)


def generate(cfg: GeneratorConfig) -> Iterator[Transaction]:
    """Stream transactions for ``cfg``, ordered by non-decreasing step."""
    return iter(TransactionGenerator(cfg))
