"""Shared CLI configuration: JSON config file merged with command-line flags."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from ..dns.chain import IANA_ROOT_ANCHOR, load_anchors
from ..policy import DEFAULT_RESERVED
from ..preload import PreloadArtifact, load


class ConfigError(ValueError):
    pass


def system_resolver(path: str = "/etc/resolv.conf") -> str:
    try:
        with open(path) as fh:
            for line in fh:
                parts = line.split()
                if len(parts) >= 2 and parts[0] == "nameserver":
                    host = parts[1]
                    return f"[{host}]:53" if ":" in host else f"{host}:53"
    except OSError:
        pass
    return "127.0.0.1:53"


@dataclass
class CliConfig:
    preload_path: str | None = None
    trust_anchor_paths: list = field(default_factory=list)
    resolver_address: str | None = None
    probe_timeout: float = 3.0
    dns_timeout: float = 2.0
    output: str = "human"
    reserved: list | None = None

    KEYS = {"preload", "anchors", "resolver", "probe_timeout", "dns_timeout", "output", "reserved"}

    @classmethod
    def from_file(cls, path: str) -> "CliConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        unknown = set(data) - cls.KEYS
        if unknown:
            raise ConfigError(f"{path}: unknown keys {', '.join(sorted(unknown))}")
        cfg = cls(preload_path=data.get("preload"),
                  trust_anchor_paths=list(data.get("anchors", [])),
                  resolver_address=data.get("resolver"),
                  probe_timeout=float(data.get("probe_timeout", 3.0)),
                  dns_timeout=float(data.get("dns_timeout", 2.0)),
                  output=data.get("output", "human"),
                  reserved=data.get("reserved"))
        if cfg.output not in ("human", "json"):
            raise ConfigError(f"{path}: output must be 'human' or 'json'")
        return cfg

    def load_preload(self) -> PreloadArtifact | None:
        """A missing list behaves like an expired one; a corrupt list is an error."""
        if not self.preload_path or not os.path.exists(self.preload_path):
            return None
        try:
            return load(self.preload_path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{self.preload_path}: {exc}") from None

    def load_anchors(self) -> list:
        if not self.trust_anchor_paths:
            return [IANA_ROOT_ANCHOR]
        anchors = []
        for path in self.trust_anchor_paths:
            try:
                anchors.extend(load_anchors(path))
            except OSError as exc:
                raise ConfigError(f"{path}: {exc}") from None
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        return anchors

    def reserved_set(self) -> frozenset:
        return DEFAULT_RESERVED if self.reserved is None else frozenset(self.reserved)

    def resolver(self) -> str:
        return self.resolver_address or system_resolver()
