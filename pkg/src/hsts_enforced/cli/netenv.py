"""PolicyEnv over real sockets: TCP probes, TLS handshakes and DNS over UDP."""

from __future__ import annotations

import http.client
import socket
import ssl
import time

from ..dns.chain import ValidationResult
from ..policy import DEFAULT_RESERVED, HttpListener, HttpsResult, Transport, UrlTarget
from ..preload import PreloadArtifact
from ..resolver import CacheStore, ResolutionMetrics, StubResolver, UdpTransport


def parse_connect_to(spec: str) -> tuple[tuple, tuple]:
    """``HOST:PORT:CONNECT_HOST:CONNECT_PORT`` as accepted by curl."""
    parts = spec.rsplit(":", 3)
    if len(parts) != 4 or not parts[1].isdigit() or not parts[3].isdigit():
        raise ValueError(f"bad --connect-to {spec!r}; expected HOST:PORT:CONNECT_HOST:CONNECT_PORT")
    return (parts[0].lower(), int(parts[1])), (parts[2], int(parts[3]))


class NetworkEnv:
    def __init__(self, anchors, preload: PreloadArtifact | None, resolver: str,
                 timeout: float = 3.0, dns_timeout: float = 2.0, now: int | None = None,
                 ca_file: str | None = None, connect_to: dict | None = None,
                 reserved=DEFAULT_RESERVED):
        self.anchors = list(anchors)
        self._preload = preload
        self.resolver = resolver
        self.timeout = timeout
        self.dns_timeout = dns_timeout
        self._now = now
        self.ca_file = ca_file
        self.connect_to = connect_to or {}
        self.reserved = reserved
        self.cache = CacheStore()
        self.metrics = ResolutionMetrics()
        self.response: dict | None = None
        self.plaintext_requests = 0
        self._tls: ssl.SSLSocket | None = None

    def now(self) -> int:
        return self._now if self._now is not None else int(time.time())

    def monotonic_ms(self) -> float:
        return time.monotonic() * 1000.0

    def preload(self):
        return self._preload

    def resolve_httpreq(self, domain: str) -> ValidationResult:
        resolver = StubResolver(UdpTransport(self.resolver), self.anchors, self.cache,
                                timeout=self.dns_timeout)
        result, metrics = resolver.resolve(domain, self.now())
        self.metrics.merge(metrics)
        return result

    def _dial(self, host: str, port: int) -> socket.socket:
        address = self.connect_to.get((host.lower(), port), (host, port))
        return socket.create_connection(address, timeout=self.timeout)

    def probe_http(self, host: str, port: int) -> HttpListener:
        # connect and close again: no request bytes leave before the status check
        try:
            self._dial(host, port).close()
            return HttpListener.PRESENT
        except socket.timeout:
            return HttpListener.TIMEOUT
        except OSError:
            return HttpListener.ABSENT

    def _tls_context(self, verify: bool) -> ssl.SSLContext:
        if not verify:
            ctx = ssl.create_default_context()
            ctx.check_hostname = False
            ctx.verify_mode = ssl.CERT_NONE
            return ctx
        return ssl.create_default_context(cafile=self.ca_file)

    def connect_https(self, host: str, port: int) -> HttpsResult:
        try:
            raw = self._dial(host, port)
        except socket.timeout:
            return HttpsResult.TIMEOUT
        except OSError:
            return HttpsResult.NO_LISTENER
        try:
            self._tls = self._tls_context(True).wrap_socket(raw, server_hostname=host)
            return HttpsResult.TRUSTED_OK
        except ssl.SSLCertVerificationError:
            raw.close()
            return HttpsResult.UNTRUSTED_CERT
        except socket.timeout:
            raw.close()
            return HttpsResult.TIMEOUT
        except (ssl.SSLError, OSError):
            raw.close()
            return HttpsResult.NO_LISTENER

    def send_request(self, target: UrlTarget, transport: Transport) -> bool:
        try:
            if transport is Transport.TRUSTED_HTTPS and self._tls is not None:
                sock, self._tls = self._tls, None
                port = target.https_port
            elif transport is Transport.HTTP:
                port = target.http_port
                sock = self._dial(target.host, port)
            else:
                port = target.https_port
                verify = transport is Transport.TRUSTED_HTTPS
                sock = self._tls_context(verify).wrap_socket(
                    self._dial(target.host, port), server_hostname=target.host)
            conn = http.client.HTTPConnection(target.host, port, timeout=self.timeout)
            conn.sock = sock
            try:
                conn.putrequest("GET", target.path, skip_accept_encoding=True)
                conn.putheader("User-Agent", "hsget/0.1")
                conn.putheader("Connection", "close")
                conn.endheaders()
                if transport is Transport.HTTP:
                    self.plaintext_requests += 1
                resp = conn.getresponse()
                body = resp.read()
                self.response = {"status": resp.status, "headers": dict(resp.getheaders()),
                                 "body": body}
                return True
            finally:
                conn.close()
        except (OSError, http.client.HTTPException) as exc:
            self.response = {"error": str(exc) or type(exc).__name__}
            return False
