"""XOR trusted-relay key chaining and compromise analysis.

A trusted relay holds both of its segment keys in the clear and announces
their bitwise parity; either end can then XOR its own segment key with the
announcements to recover the far end's key.  The announcements themselves
are uniformly random and leak nothing -- but anyone who owns the relay box
owns the keys.  Untrusted (entanglement / MDI) satellites never hold key
material, so compromising them leaks nothing.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .link_models import LinkBudget, key_rate_estimate, combined_arm_loss


class RelayProtocolError(ValueError):
    """Invalid relay-protocol input."""


class RelayKind(enum.Enum):
    TRUSTED_NODE = "trusted_node"
    TRUSTED_SATELLITE = "trusted_satellite"
    UNTRUSTED_ENTANGLEMENT_SATELLITE = "untrusted_entanglement_satellite"
    UNTRUSTED_MDI_SATELLITE = "untrusted_mdi_satellite"

    @property
    def is_trusted(self) -> bool:
        return self in (RelayKind.TRUSTED_NODE, RelayKind.TRUSTED_SATELLITE)


@dataclass(frozen=True)
class KeyBlock:
    """Immutable fixed-length block of key bits, stored as an integer."""

    value: int
    length_bits: int

    def __post_init__(self) -> None:
        if self.length_bits <= 0:
            raise RelayProtocolError("length_bits must be > 0")
        if not 0 <= self.value < (1 << self.length_bits):
            raise RelayProtocolError("value does not fit in length_bits")

    @classmethod
    def from_bits(cls, bits: str) -> "KeyBlock":
        if not bits or set(bits) - {"0", "1"}:
            raise RelayProtocolError("bits must be a non-empty 0/1 string")
        return cls(int(bits, 2), len(bits))

    @classmethod
    def zeros(cls, length_bits: int) -> "KeyBlock":
        return cls(0, length_bits)

    @classmethod
    def random(cls, length_bits: int, rng: random.Random) -> "KeyBlock":
        return cls(rng.getrandbits(length_bits), length_bits)

    def bits(self) -> str:
        return format(self.value, f"0{self.length_bits}b")


def xor_parity(k_a: KeyBlock, k_b: KeyBlock) -> KeyBlock:
    """Bitwise parity of two equal-length key blocks."""
    if k_a.length_bits != k_b.length_bits:
        raise RelayProtocolError(
            f"length mismatch: {k_a.length_bits} vs {k_b.length_bits}"
        )
    return KeyBlock(k_a.value ^ k_b.value, k_a.length_bits)


def recover_remote_key(local: KeyBlock, parity: KeyBlock) -> KeyBlock:
    """Recover the far-end key from a local key and a parity announcement."""
    return xor_parity(local, parity)


@dataclass(frozen=True)
class RelayChain:
    """An ordered relay path: endpoints plus interior trusted relays.

    ``segment_keys[i]`` is the key shared between ``nodes[i]`` and
    ``nodes[i+1]``.  All keys must have the same length.
    """

    nodes: tuple[str, ...]
    segment_keys: tuple[KeyBlock, ...]

    def __post_init__(self) -> None:
        if len(self.nodes) < 2:
            raise RelayProtocolError("a chain needs at least two nodes")
        if len(self.segment_keys) != len(self.nodes) - 1:
            missing = len(self.nodes) - 1 - len(self.segment_keys)
            raise RelayProtocolError(
                f"chain over {self.nodes} is missing {missing} segment key(s)"
            )
        lengths = {k.length_bits for k in self.segment_keys}
        if len(lengths) > 1:
            raise RelayProtocolError("all segment keys must share one length")

    @property
    def interior_nodes(self) -> tuple[str, ...]:
        return self.nodes[1:-1]


def chain_announcements(chain: RelayChain) -> tuple[KeyBlock, ...]:
    """Per-interior-node parity announcements, in chain order."""
    return tuple(
        xor_parity(chain.segment_keys[i], chain.segment_keys[i + 1])
        for i in range(len(chain.segment_keys) - 1)
    )


def chain_establish(chain: RelayChain) -> tuple[KeyBlock, KeyBlock]:
    """Run the relay protocol over a chain; both ends derive the same key.

    The shared key is the first segment key: the far end folds every
    announcement into its own segment key to recover it.
    """
    announcements = chain_announcements(chain)
    end_a = chain.segment_keys[0]
    end_b = chain.segment_keys[-1]
    for ann in announcements:
        end_b = xor_parity(end_b, ann)
    return end_a, end_b


def announcement_leakage_test(key_length_bits: int) -> dict:
    """Exhaustively verify that parity announcements leak nothing.

    Enumerates all 2^(2L) ordered key pairs and checks that, conditioned on
    any announcement value, the first key is exactly uniform (each value
    occurs exactly once per announcement).
    """
    if not 1 <= key_length_bits <= 12:
        raise RelayProtocolError("key_length_bits must be in [1, 12]")
    n = 1 << key_length_bits
    all_values = np.arange(n, dtype=np.uint32)
    conditional_uniform = True
    # Row a covers the pairs (a, b) for every b; XOR with a fixed value is a
    # bijection, so each announcement must appear exactly once per row.
    for a in range(n):
        parities = np.uint32(a) ^ all_values
        counts = np.bincount(parities, minlength=n)
        if not np.all(counts == 1):
            conditional_uniform = False
            break
    return {
        "key_length_bits": key_length_bits,
        "pairs_enumerated": n * n,
        "announcement_values": n,
        "pairs_per_announcement": n,
        "conditional_uniform": conditional_uniform,
    }


def untrusted_establish(
    arm_a: LinkBudget,
    arm_b: LinkBudget,
    kind: RelayKind,
    source_rate_hz: float,
    sifting_factor: float = 0.5,
) -> float:
    """Key rate through an untrusted satellite; both arms' losses combine.

    No key material is ever attributed to the satellite.
    """
    if kind.is_trusted:
        raise RelayProtocolError("untrusted_establish requires an untrusted kind")
    return key_rate_estimate(
        source_rate_hz, combined_arm_loss(arm_a, arm_b), sifting_factor
    )


def compromise_analysis(plan, compromised_nodes: Iterable[str]) -> set[tuple[str, str]]:
    """End-to-end pairs whose keys leak if the given nodes are compromised.

    A pair leaks iff a compromised node is a trusted interior relay on its
    path or one of its endpoints.  Compromised untrusted satellites leak
    nothing.  ``plan`` is any object with an ``items`` sequence whose
    entries expose ``endpoints`` and ``relay_path`` (id/kind pairs).
    """
    compromised = set(compromised_nodes)
    known: set[str] = set()
    for item in plan.items:
        known.update(item.endpoints)
        known.update(node_id for node_id, _ in item.relay_path)
    unknown = compromised - known
    if unknown:
        raise RelayProtocolError(f"unknown node id(s): {sorted(unknown)}")

    leaked: set[tuple[str, str]] = set()
    for item in plan.items:
        a, b = item.endpoints
        if a in compromised or b in compromised:
            leaked.add((a, b))
            continue
        for node_id, kind in item.relay_path:
            if node_id in compromised and kind.is_trusted:
                leaked.add((a, b))
                break
    return leaked
