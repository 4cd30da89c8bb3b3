"""
Configuration: chain parameters, oracle service settings, experiment runs.

Values come from (highest first) explicit arguments, a JSON file, the
environment (a .env file is honoured) and finally the defaults below.
"""

import json
import logging
import os
import sys
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .core.types import Bytes32
from .crypto import KeyPair, keygen, seed_from_label

DEFAULT_ORACLE_URL = "http://oracle.local:8080"


# ---------------------------------------------------------------------------
# Environment helpers
# ---------------------------------------------------------------------------

def env_str(name: str, default: str) -> str:
    return os.environ.get(name, default)


def env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}") from None


def parse_probability(value: Union[str, float, int, Fraction]) -> Fraction:
    """Accept '0.5', '1/100', 0.25 or a Fraction; result is limited to [0, 1]."""
    try:
        p = Fraction(value).limit_denominator(1_000_000) if not isinstance(value, str) \
            else Fraction(value.strip()).limit_denominator(1_000_000)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a probability: {value!r}") from None
    if not 0 <= p <= 1:
        raise ValueError(f"probability must be in [0, 1], got {value!r}")
    return p


def load_environment() -> None:
    """Read a .env file (if any) into the process environment."""
    load_dotenv()


def configure_logging(level: Optional[str] = None) -> None:
    """Send log records to stderr; stdout belongs to reports and MCP stdio."""
    level = (level or env_str("EXCALL_LOG_LEVEL", "INFO")).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def load_json_config(path: Optional[Path]) -> dict[str, Any]:
    """
    Load a flat JSON object of option values.

    Raises:
        ValueError: If the file is not a JSON object.
    """
    if path is None:
        return {}
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError(f"{path}: configuration must be a JSON object")
    return {key.replace("-", "_"): value for key, value in data.items()}


# ---------------------------------------------------------------------------
# Keys used by the simulator
# ---------------------------------------------------------------------------

def sealer_keypair(index: int) -> KeyPair:
    return keygen(seed_from_label(f"sealer-{index}"))


def oracle_keypair(key_seed: int) -> KeyPair:
    return keygen(seed_from_label(f"oracle-{key_seed}"))


def account_keypair(label: str) -> KeyPair:
    return keygen(seed_from_label(f"account-{label}"))


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

class ChainConfig(BaseModel):
    """Parameters every node of one chain must agree on."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    block_period_ms: int = Field(default=500, gt=0, description="Minimum gap between block timestamps.")
    sealer_keys: tuple[Bytes32, ...] = Field(
        ..., min_length=1, description="Sealer public keys; block n is sealed by sealer_keys[n % k]."
    )
    pinned_oracle_keys: dict[str, Bytes32] = Field(
        default_factory=dict, description="URI prefix -> oracle public key trusted for that prefix."
    )
    step_limit: int = Field(default=100_000, gt=0)
    max_excalls_per_tx: int = Field(default=8, ge=1, le=255)
    excall_timeout_ms: int = Field(default=2000, gt=0)
    max_txs_per_block: int = Field(default=512, ge=1)
    genesis_timestamp: int = Field(default=0, ge=0, description="Unix milliseconds of block 0.")

    @field_validator("pinned_oracle_keys")
    @classmethod
    def _http_prefixes(cls, value: dict[str, bytes]) -> dict[str, bytes]:
        for prefix in value:
            if not prefix.startswith("http"):
                raise ValueError(f"pinned key prefix must be an http URI: {prefix!r}")
        return value

    def sealer_for(self, number: int) -> bytes:
        return self.sealer_keys[number % len(self.sealer_keys)]

    def pinned_key_for(self, uri: str) -> Optional[bytes]:
        """Key pinned under the longest prefix of uri, or None."""
        best: Optional[str] = None
        for prefix in self.pinned_oracle_keys:
            if uri.startswith(prefix) and (best is None or len(prefix) > len(best)):
                best = prefix
        return None if best is None else self.pinned_oracle_keys[best]

    @classmethod
    def from_env(cls, **overrides: Any) -> "ChainConfig":
        values: dict[str, Any] = {
            "block_period_ms": env_int("EXCALL_BLOCK_PERIOD_MS", 500),
            "step_limit": env_int("EXCALL_STEP_LIMIT", 100_000),
            "excall_timeout_ms": env_int("EXCALL_EXCALL_TIMEOUT_MS", 2000),
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


def simulation_chain_config(
    oracle_url: str = DEFAULT_ORACLE_URL,
    oracle_public_key: Optional[bytes] = None,
    sealers: int = 2,
    **overrides: Any,
) -> ChainConfig:
    """A chain with label-derived sealer keys and one pinned oracle."""
    if oracle_public_key is None:
        oracle_public_key = oracle_keypair(env_int("EXCALL_ORACLE_KEY_SEED", 1)).public_key
    return ChainConfig.from_env(
        sealer_keys=tuple(sealer_keypair(i).public_key for i in range(sealers)),
        pinned_oracle_keys={oracle_url: oracle_public_key},
        **overrides,
    )


class OracleSettings(BaseModel):
    """How an oracle service binds, signs and draws outcomes."""

    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)

    bind: str = Field(default="127.0.0.1:8080", description="host:port to listen on.")
    seed: int = Field(default=7, description="Seed of the outcome RNG.")
    win_probability: Fraction = Field(default=Fraction(1, 2), description="Chance a draw is '1'.")
    key_seed: int = Field(default=1, description="Label seed of the signing key.")
    latency_ms: int = Field(default=0, ge=0, description="Artificial delay added to every answer.")

    @field_validator("win_probability", mode="before")
    @classmethod
    def _probability(cls, value: Any) -> Fraction:
        return parse_probability(value)

    @field_validator("bind")
    @classmethod
    def _host_port(cls, value: str) -> str:
        host, sep, port = value.rpartition(":")
        if not sep or not host or not port.isdigit():
            raise ValueError(f"bind must look like host:port, got {value!r}")
        return value

    @property
    def host(self) -> str:
        return self.bind.rpartition(":")[0]

    @property
    def port(self) -> int:
        return int(self.bind.rpartition(":")[2])

    @property
    def keypair(self) -> KeyPair:
        return oracle_keypair(self.key_seed)

    @classmethod
    def from_env(cls, **overrides: Any) -> "OracleSettings":
        values: dict[str, Any] = {
            "bind": env_str("EXCALL_ORACLE_BIND", "127.0.0.1:8080"),
            "seed": env_int("EXCALL_ORACLE_SEED", 7),
            "win_probability": env_str("EXCALL_WIN_PROB", "0.5"),
            "key_seed": env_int("EXCALL_ORACLE_KEY_SEED", 1),
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


class Implementation(str, Enum):
    STANDARD = "standard"
    EXCALL = "excall"


class ExperimentConfig(BaseModel):
    """One experiment configuration; a run repeats it `repeats` times."""

    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)

    impl: Implementation = Field(default=Implementation.EXCALL, description="Which betting contract to drive.")
    initiators: int = Field(default=1, ge=1, le=64)
    iterations: int = Field(default=10, ge=1)
    block_period_ms: int = Field(default=500, gt=0)
    repeats: int = Field(default=4, ge=1)
    oracle_url: str = Field(default=DEFAULT_ORACLE_URL)
    external_oracle: bool = Field(default=False, description="Call a real HTTP service at oracle_url.")
    oracle_seed: int = 7
    oracle_key_seed: int = 1
    win_probability: Fraction = Fraction(1, 2)
    excall_latency_ms: int = Field(default=0, ge=0)
    link_latency_ms: int = Field(default=0, ge=0)
    verifiers: int = Field(default=1, ge=0)
    realtime: bool = False
    block_log_dir: Optional[Path] = Field(default=None, description="Write each run's sealer block log here.")

    @field_validator("impl", mode="before")
    @classmethod
    def _lower_impl(cls, value: Any) -> Any:
        return value.lower() if isinstance(value, str) else value

    @field_validator("win_probability", mode="before")
    @classmethod
    def _probability(cls, value: Any) -> Fraction:
        return parse_probability(value)

    @model_validator(mode="after")
    def _oracle_url_is_http(self) -> "ExperimentConfig":
        if not self.oracle_url.startswith("http"):
            raise ValueError("oracle_url must be an http URI")
        return self

    @property
    def bet_timeout_ms(self) -> int:
        return 100 * self.block_period_ms


def chain_config_path(block_log: Path) -> Path:
    """Where the chain configuration of a block log is kept."""
    block_log = Path(block_log)
    return block_log.with_name(block_log.name + ".config.json")


def save_chain_config(config: ChainConfig, block_log: Path) -> Path:
    path = chain_config_path(block_log)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(config.model_dump_json(indent=2), encoding="utf-8")
    return path


def load_chain_config(block_log: Path) -> ChainConfig:
    """
    Configuration saved next to a block log, else one built from the environment.

    Raises:
        pydantic.ValidationError: If the saved file is malformed.
    """
    path = chain_config_path(block_log)
    if path.exists():
        return ChainConfig.model_validate_json(path.read_text(encoding="utf-8"))
    return simulation_chain_config(env_str("EXCALL_ORACLE_URL", DEFAULT_ORACLE_URL))
