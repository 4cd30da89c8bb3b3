"""World state: account nonces, deployed programs, contract storage."""

from dataclasses import dataclass, field

from ..core.codec import CanonicalWriter
from ..crypto import hash_bytes
from ..vm.program import ContractProgram

# Storage layout shared by the shipped betting contracts.
WINNINGS_BASE = 1 << 160
PENDING_BASE = 2 << 160
ORACLE_SLOT = 1
NEXT_REF_SLOT = 2


def storage_key(value: int) -> bytes:
    return value.to_bytes(32, "big")


def winnings_key(address: bytes) -> bytes:
    return storage_key(WINNINGS_BASE + int.from_bytes(address, "big"))


def pending_key(oracle_ref: int) -> bytes:
    return storage_key(PENDING_BASE + oracle_ref)


@dataclass
class WorldState:
    nonces: dict[bytes, int] = field(default_factory=dict)
    programs: dict[bytes, ContractProgram] = field(default_factory=dict)
    storage: dict[bytes, dict[bytes, bytes]] = field(default_factory=dict)

    def copy(self) -> "WorldState":
        """Independent copy; programs are immutable and shared."""
        return WorldState(
            nonces=dict(self.nonces),
            programs=dict(self.programs),
            storage={address: dict(slots) for address, slots in self.storage.items()},
        )

    def nonce(self, sender: bytes) -> int:
        return self.nonces.get(sender, 0)

    def bump_nonce(self, sender: bytes) -> None:
        self.nonces[sender] = self.nonce(sender) + 1

    def storage_for(self, contract: bytes) -> dict[bytes, bytes]:
        return self.storage.setdefault(contract, {})

    def read(self, contract: bytes, key: bytes) -> int:
        return int.from_bytes(self.storage.get(contract, {}).get(key, bytes(32)), "big")

    def winnings(self, contract: bytes, address: bytes) -> int:
        return self.read(contract, winnings_key(address))

    def state_root(self) -> bytes:
        """
        Digest of the canonically sorted state.

        Empty storage maps do not contribute, so a contract whose slots were
        all cleared hashes the same as one that never wrote any.
        """
        w = CanonicalWriter()
        nonces = sorted((a, n) for a, n in self.nonces.items() if n)
        w.u32(len(nonces))
        for address, nonce in nonces:
            w.raw(address).u64(nonce)

        w.u32(len(self.programs))
        for address in sorted(self.programs):
            w.raw(address).raw(hash_bytes(self.programs[address].bytecode))

        contracts = sorted(a for a, slots in self.storage.items() if slots)
        w.u32(len(contracts))
        for address in contracts:
            slots = self.storage[address]
            w.raw(address).u32(len(slots))
            for key in sorted(slots):
                w.raw(key).raw(slots[key])
        return hash_bytes(w.getvalue())
