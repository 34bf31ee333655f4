"""Simulated federation participants.

Benign and malicious clients run the exact same local-training procedure;
the only malicious act is training against a label-flipped overlay of the
client's own shard (data poisoning, not update forging). Ground-truth
malice flags live here and in the cohort only; defense code never sees them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import AttackSpec, Dataset, Shard, apply_attack, shard_arrays
from .model import Hyper, ModelParams, train_local
from .numerics import RngStream, derive_seed


@dataclass(frozen=True)
class ClientUpdate:
    """One client's weight delta for one round, plus its sample count."""

    client_id: int
    delta: np.ndarray
    n_c: int
    round_index: int

    def __post_init__(self):
        object.__setattr__(self, "delta", np.asarray(self.delta, dtype=np.float64))
        if self.n_c < 1:
            raise ValueError("n_c must be >= 1")


@dataclass(frozen=True)
class ClientProfile:
    """A participant's identity, data shard, behavior, and private seed."""

    client_id: int
    shard: Shard
    rng_seed: int
    attack: AttackSpec | None = None  # None -> benign

    @property
    def malicious(self) -> bool:
        return self.attack is not None


def run_client_round(profile: ClientProfile, global_params: ModelParams,
                     hyper: Hyper, dataset: Dataset, round_index: int) -> ClientUpdate:
    """Local training for one round; returns the client's weight delta.

    Malicious profiles train on the label-flip overlay of their shard but
    are otherwise identical to benign ones. Each (client, round) pair gets
    its own derived RNG stream, so results are independent of scheduling.
    """
    overlay = None
    if profile.attack is not None:
        overlay = apply_attack(dataset, profile.shard, profile.attack)
    x, y = shard_arrays(dataset, profile.shard, overlay)
    rng = RngStream(derive_seed(profile.rng_seed, "round", round_index))
    delta = train_local(global_params, x, y, hyper, rng)
    return ClientUpdate(client_id=profile.client_id, delta=delta,
                        n_c=profile.shard.size, round_index=round_index)


def make_cohort(num_clients: int, malicious_count: int, shards: list[Shard],
                attack: AttackSpec, base_seed: int) -> list[ClientProfile]:
    """Build client profiles with a seeded random choice of malicious members.

    The first malicious_count ids of a seeded shuffle turn malicious; the
    returned list is ordered by client_id. Ground truth is recorded on the
    profiles (for detection metrics only).
    """
    if malicious_count < 0 or malicious_count > num_clients:
        raise ValueError("malicious_count must be in [0, num_clients]")
    if len(shards) != num_clients:
        raise ValueError("need exactly one shard per client")
    order = RngStream(derive_seed(base_seed, "cohort")).permutation(num_clients)
    malicious_ids = set(int(c) for c in order[:malicious_count])
    profiles = []
    for cid in range(num_clients):
        profiles.append(ClientProfile(
            client_id=cid,
            shard=shards[cid],
            rng_seed=derive_seed(base_seed, "client", cid),
            attack=attack if cid in malicious_ids else None,
        ))
    return profiles
