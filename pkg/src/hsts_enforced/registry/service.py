"""Registration pipeline: submit, verify from every vantage, re-verify, publish."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

from ..policy import DEFAULT_RESERVED, AuthorityClass, InvalidTarget, classify_authority, normalize_host
from ..preload import DEFAULT_VALIDITY, PreloadArtifact, PreloadEntry, build, dump_jsonl
from .store import LAPSED, PENDING, REJECTED, VERIFIED, Registration, Store
from .vantage import probe

MIN_VANTAGES = 2


class RegistryError(Exception):
    code = "registry-error"
    status = 400

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InvalidDomain(RegistryError):
    code = "invalid-domain"
    status = 400


class NotPublicDomain(RegistryError):
    code = "not-public-domain"
    status = 422


class UnknownDomain(RegistryError):
    code = "not-found"
    status = 404


class NothingPublished(RegistryError):
    code = "not-published"
    status = 404


class NoVerificationRound(RegistryError):
    code = "no-verification-round"
    status = 409


@dataclass(frozen=True)
class ReverifySummary:
    checked: int = 0
    still_verified: tuple = ()
    lapsed: tuple = ()

    def to_json(self) -> dict:
        return {"checked": self.checked, "still_verified": list(self.still_verified),
                "lapsed": list(self.lapsed)}


@dataclass
class RegistryService:
    store: Store
    vantages: list
    validity: int = DEFAULT_VALIDITY
    reserved: frozenset = DEFAULT_RESERVED
    clock: object = time.time
    latest: PreloadArtifact | None = None
    latest_version: int = 0  # publish counter; the binary layout carries no list version
    _writer: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if len(self.vantages) < MIN_VANTAGES:
            raise ValueError(f"need at least {MIN_VANTAGES} vantage points")
        if len({v.id for v in self.vantages}) != len(self.vantages):
            raise ValueError("vantage ids must be unique")
        self.latest_version = self.store.published_version

    def _now(self, now) -> int:
        return int(self.clock()) if now is None else int(now)

    @staticmethod
    def canonical(domain: str, reserved=DEFAULT_RESERVED) -> str:
        try:
            host = normalize_host(domain)
            authority = classify_authority(host, reserved)
        except InvalidTarget as exc:
            raise InvalidDomain(str(exc)) from None
        if authority is not AuthorityClass.PUBLIC_DOMAIN:
            raise NotPublicDomain(f"{host} is {authority.value}, not a public domain")
        if "." not in host:
            raise NotPublicDomain(f"{host} is a single label")
        return host

    def submit(self, domain: str, include_subdomains: bool = False, now=None) -> Registration:
        domain = self.canonical(domain, self.reserved)
        with self._writer:
            existing = self.store.get(domain)
            if existing is not None and existing.status not in (REJECTED, LAPSED):
                return existing
            self.store.upsert(domain, include_subdomains, PENDING, self._now(now))
            return self.store.get(domain)

    def get(self, domain: str) -> Registration:
        try:
            key = normalize_host(domain)
        except InvalidTarget as exc:
            raise InvalidDomain(str(exc)) from None
        reg = self.store.get(key)
        if reg is None:
            raise UnknownDomain(f"{key} is not registered")
        return reg

    def remove(self, domain: str):
        with self._writer:
            reg = self.get(domain)
            self.store.delete(reg.domain)

    def _verify_locked(self, reg: Registration, now: int, failed_status: str) -> Registration:
        results = [probe(v, reg.domain, reg.include_subdomains) for v in self.vantages]
        status = VERIFIED if all(r.passed for r in results) else failed_status
        self.store.record_round(reg.domain, results, status, now)
        return self.store.get(reg.domain)

    def verify(self, domain: str, now=None) -> Registration:
        with self._writer:
            reg = self.get(domain)
            return self._verify_locked(reg, self._now(now), REJECTED)

    def verify_pending(self, now=None) -> list[Registration]:
        with self._writer:
            return [self._verify_locked(r, self._now(now), REJECTED)
                    for r in self.store.all(PENDING)]

    def reverify_all(self, now=None) -> ReverifySummary:
        now = self._now(now)
        kept, lapsed = [], []
        with self._writer:
            for reg in self.store.all(VERIFIED):
                # each round is committed on its own, so partial progress survives
                after = self._verify_locked(reg, now, LAPSED)
                (kept if after.status == VERIFIED else lapsed).append(after.domain)
        return ReverifySummary(len(kept) + len(lapsed), tuple(kept), tuple(lapsed))

    def publish(self, now=None) -> PreloadArtifact:
        with self._writer:
            if self.store.rounds_completed() == 0:
                raise NoVerificationRound("no verification round has completed yet")
            entries = [PreloadEntry(r.domain, r.include_subdomains)
                       for r in self.store.all(VERIFIED)]
            version = self.store.published_version + 1
            artifact = build(entries, issued_at=self._now(now), validity=self.validity)
            self.store.set_published_version(version)
            self.latest_version = version
            self.latest = artifact
            return artifact

    def latest_jsonl(self) -> str:
        if self.latest is None:
            raise NothingPublished("no list has been published")
        return dump_jsonl(self.latest.entries)

    def scheduled_round(self, now=None) -> tuple[ReverifySummary, PreloadArtifact]:
        """The recurring job: check pending and verified entries, then publish."""
        summary = self.reverify_all(now)
        self.verify_pending(now)
        return summary, self.publish(now)
