"""In-process stand-in for the two on-chain contracts.

A single serialized transaction queue replaces the chain: every mutating
call appends a receipt (reverted calls still charge gas, as on the EVM),
view calls are free and raise on access violations.  The prototype store
enforces a whitelist plus contract ownership; the data oracle is
owner-gated for writes and permissionless for reads, with the two event
kinds recording the oracle round-trip.

Money is exact: gas and ETH are Fractions end to end, rendered as decimal
strings only at the CSV/report boundary.  The deployment charge is a
configured constant and the one schedule entry allowed to be fractional,
because the reproduced deployment total does not divide evenly by the
reference gas price.
"""

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .errors import (
    ArgumentError,
    LedgerRevert,
    NotAllowedOwner,
    NotContractOwner,
    NotOracle,
    OracleUnset,
)

GWEI = Fraction(1, 10**9)

FETCH_EVENT = "fetchOracleDataEvent"
UPDATE_EVENT = "updateOracleDataEvent"


@dataclass(frozen=True, order=True)
class Address:
    """Opaque 20-byte participant identifier, hex-rendered."""

    value: bytes

    def __post_init__(self):
        if len(self.value) != 20:
            raise ArgumentError("addresses are exactly 20 bytes")

    @classmethod
    def derive(cls, label: str) -> "Address":
        return cls(hashlib.sha256(label.encode()).digest()[:20])

    @property
    def hex(self) -> str:
        return "0x" + self.value.hex()

    def __repr__(self) -> str:
        return f"Address({self.hex})"


def gas_to_eth(gas, price_gwei) -> Fraction:
    """gas x price x 10^-9 ETH, exact."""
    if gas < 0 or price_gwei < 0:
        raise ArgumentError("gas and price must be non-negative")
    return Fraction(gas) * Fraction(price_gwei) * GWEI


def decimal_str(x, places: int = 18) -> str:
    """Exact decimal rendering of a Fraction when it terminates within
    ``places`` digits; otherwise round-half-even at ``places``."""
    fr = Fraction(x)
    sign = "-" if fr < 0 else ""
    scaled = abs(fr) * 10**places
    units = round(scaled)  # exact when the expansion terminates
    whole, frac = divmod(units, 10**places)
    digits = f"{frac:0{places}d}".rstrip("0")
    return f"{sign}{whole}.{digits}" if digits else f"{sign}{whole}"


def gas_str(gas) -> str:
    fr = Fraction(gas)
    return str(fr.numerator) if fr.denominator == 1 else f"{fr.numerator}/{fr.denominator}"


@dataclass
class GasSchedule:
    """Per-component gas buckets plus the deployment constant and price."""

    security: int = 88_546
    oracle: int = 139_731
    io: int = 656_230
    deployment_gas: Fraction = Fraction(25_967_270, 12)
    gas_price_gwei: Fraction = Fraction(12)

    _OP_BUCKET = {
        "set_owner": "security",
        "set_oracle_instance_address": "security",
        "update_data": "oracle",
        "update_oracle_data": "oracle",
        "add_prototype": "io",
    }

    def gas_for(self, op: str) -> Fraction:
        if op == "deploy":
            return Fraction(self.deployment_gas)
        return Fraction(getattr(self, self._OP_BUCKET[op]))

    def eth_for(self, op: str) -> Fraction:
        return gas_to_eth(self.gas_for(op), self.gas_price_gwei)


@dataclass
class Receipt:
    index: int
    round: int
    caller: Address
    op: str
    args: tuple
    gas_used: Fraction
    eth_cost: Fraction
    status: str
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class EventRecord:
    name: str
    emitter: Address
    round: int


@dataclass
class PrototypeBufferState:
    address: Address
    contract_owner: Address
    whitelist: set[Address] = field(default_factory=set)
    owner_to_prototype: dict[Address, bytes] = field(default_factory=dict)
    oracle_data: bytes = b""
    oracle_address: Optional[Address] = None


@dataclass
class DataOracleState:
    address: Address
    oracle_owner: Address
    data_value: bytes = b""


class Ledger:
    """Serialized state machine over the two contract states.

    Transactions return their receipt (check ``receipt.ok``); views raise
    the revert reason directly and never charge gas.
    """

    def __init__(self, schedule: GasSchedule, buffer: PrototypeBufferState, oracle: DataOracleState):
        self.schedule = schedule
        self.buffer = buffer
        self.oracle = oracle
        self.receipts: list[Receipt] = []
        self.events: list[EventRecord] = []
        self.round = 0

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def deploy(
        cls,
        schedule: GasSchedule,
        deployer: Address,
        oracle_owner: Optional[Address] = None,
    ) -> "Ledger":
        """Fresh contract pair; the deployer owns the buffer and starts
        whitelisted, and the deployment receipt charges the configured
        deployment constant."""
        oracle_owner = oracle_owner or deployer
        buffer = PrototypeBufferState(
            address=Address.derive(f"contract:PrototypeBuffer:{deployer.hex}"),
            contract_owner=deployer,
            whitelist={deployer},
        )
        oracle = DataOracleState(
            address=Address.derive(f"contract:DataOracle:{deployer.hex}"),
            oracle_owner=oracle_owner,
        )
        ledger = cls(schedule, buffer, oracle)
        ledger._record("deploy", deployer, (oracle_owner,), ok=True)
        return ledger

    def _record(self, op: str, caller: Address, args: tuple, ok: bool, error: str = "") -> Receipt:
        gas = self.schedule.gas_for(op)
        receipt = Receipt(
            index=len(self.receipts),
            round=self.round,
            caller=caller,
            op=op,
            args=args,
            gas_used=gas,
            eth_cost=gas_to_eth(gas, self.schedule.gas_price_gwei),
            status="ok" if ok else "reverted",
            error=error,
        )
        self.receipts.append(receipt)
        return receipt

    def _tx(self, op: str, caller: Address, args: tuple, body) -> Receipt:
        try:
            body()
        except LedgerRevert as exc:
            return self._record(op, caller, args, ok=False, error=type(exc).__name__)
        return self._record(op, caller, args, ok=True)

    # -- modifiers ---------------------------------------------------------

    def _require_allowed(self, caller: Address) -> None:
        if caller not in self.buffer.whitelist:
            raise NotAllowedOwner(f"{caller.hex} is not whitelisted")

    def _require_contract_owner(self, caller: Address) -> None:
        if caller != self.buffer.contract_owner:
            raise NotContractOwner(f"{caller.hex} does not own the contract")

    def _require_oracle(self, caller: Address) -> None:
        if caller != self.oracle.oracle_owner:
            raise NotOracle(f"{caller.hex} is not the oracle owner")

    # -- transactions (gas charged, receipt returned) -----------------------

    def add_prototype(self, caller: Address, payload: bytes) -> Receipt:
        """Store/overwrite the caller's prototype payload; clears any oracle
        context so the stored prototype is never paired with stale feed data."""

        def body():
            self._require_allowed(caller)
            self.buffer.owner_to_prototype[caller] = bytes(payload)
            self.buffer.oracle_data = b""

        return self._tx("add_prototype", caller, (bytes(payload),), body)

    def set_owner(self, caller: Address, new_owner: Address) -> Receipt:
        def body():
            self._require_contract_owner(caller)
            self.buffer.whitelist.add(new_owner)

        return self._tx("set_owner", caller, (new_owner,), body)

    def set_oracle_instance_address(self, caller: Address, addr: Address) -> Receipt:
        def body():
            self._require_contract_owner(caller)
            self.buffer.oracle_address = addr

        return self._tx("set_oracle_instance_address", caller, (addr,), body)

    def update_data(self, caller: Address) -> Receipt:
        """Ask the linked oracle for fresh data (emits the demand event)."""

        def body():
            self._require_allowed(caller)
            if self.buffer.oracle_address is None:
                raise OracleUnset("no oracle instance linked")
            self.events.append(
                EventRecord(FETCH_EVENT, self.buffer.oracle_address, self.round)
            )

        return self._tx("update_data", caller, (), body)

    def update_oracle_data(self, caller: Address, value: bytes) -> Receipt:
        """Oracle pushes fresh data into both contracts (the send-back leg)."""

        def body():
            self._require_oracle(caller)
            self.oracle.data_value = bytes(value)
            self.buffer.oracle_data = bytes(value)
            self.events.append(
                EventRecord(UPDATE_EVENT, self.oracle.address, self.round)
            )

        return self._tx("update_oracle_data", caller, (bytes(value),), body)

    # -- views (free, raise on violation) ------------------------------------

    def see_all(self, caller: Address) -> list[bytes]:
        """Stored payloads of every other owner, in address order."""
        self._require_allowed(caller)
        return [
            payload
            for owner, payload in sorted(self.buffer.owner_to_prototype.items())
            if owner != caller
        ]

    def see_all_with_owners(self, caller: Address) -> list[tuple[Address, bytes]]:
        self._require_allowed(caller)
        return [
            (owner, payload)
            for owner, payload in sorted(self.buffer.owner_to_prototype.items())
            if owner != caller
        ]

    def fetch_oracle_data(self, caller: Address) -> bytes:
        """Permissionless oracle read."""
        return self.oracle.data_value

    def contains(self, caller: Address) -> bool:
        return caller in self.buffer.whitelist

    # -- accounting / audit ---------------------------------------------------

    def total_gas(self) -> Fraction:
        return sum((r.gas_used for r in self.receipts), Fraction(0))

    def total_eth(self) -> Fraction:
        return sum((r.eth_cost for r in self.receipts), Fraction(0))

    def serialize_state(self) -> bytes:
        """Canonical byte form of both contract states (replay oracle)."""
        doc = {
            "buffer": {
                "address": self.buffer.address.hex,
                "contract_owner": self.buffer.contract_owner.hex,
                "whitelist": sorted(a.hex for a in self.buffer.whitelist),
                "owner_to_prototype": {
                    a.hex: p.hex()
                    for a, p in sorted(self.buffer.owner_to_prototype.items())
                },
                "oracle_data": self.buffer.oracle_data.hex(),
                "oracle_address": self.buffer.oracle_address.hex
                if self.buffer.oracle_address
                else None,
            },
            "oracle": {
                "address": self.oracle.address.hex,
                "oracle_owner": self.oracle.oracle_owner.hex,
                "data_value": self.oracle.data_value.hex(),
            },
        }
        return json.dumps(doc, sort_keys=True).encode()

    def export_receipts_csv(self) -> str:
        lines = ["round,caller,op,gas,eth,status"]
        for r in self.receipts:
            lines.append(
                f"{r.round},{r.caller.hex},{r.op},{gas_str(r.gas_used)},"
                f"{decimal_str(r.eth_cost)},{r.status}"
            )
        return "\n".join(lines) + "\n"


def replay(receipts: Sequence[Receipt], schedule: GasSchedule) -> Ledger:
    """Re-execute a receipt log from scratch; the rebuilt ledger's serialized
    state matches the original byte for byte."""
    if not receipts or receipts[0].op != "deploy":
        raise ArgumentError("receipt log must start with the deployment")
    head = receipts[0]
    ledger = Ledger.deploy(schedule, head.caller, head.args[0])
    dispatch = {
        "add_prototype": ledger.add_prototype,
        "set_owner": ledger.set_owner,
        "set_oracle_instance_address": ledger.set_oracle_instance_address,
        "update_data": ledger.update_data,
        "update_oracle_data": ledger.update_oracle_data,
    }
    for r in receipts[1:]:
        ledger.round = r.round
        dispatch[r.op](r.caller, *r.args)
    return ledger
