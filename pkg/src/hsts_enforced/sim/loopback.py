"""Real sockets on 127.0.0.1 for demos and end-to-end CLI tests.

Starts a UDP DNS server for a signed world plus optional HTTP and HTTPS
servers.  The HTTP server keeps every request it receives, which is exactly
what an on-path observer would see in plaintext.
"""

from __future__ import annotations

import datetime
import os
import socket
import socketserver
import ssl
import tempfile
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.x509.oid import NameOID

from ..dns.chain import format_anchor
from .dnsworld import DnsWorld, build_dns_world
from .network import ServerKind


class _DnsHandler(socketserver.BaseRequestHandler):
    def handle(self):
        data, sock = self.request
        response = self.server.world.handle_wire(data)
        if response is not None:
            sock.sendto(response, self.client_address)


class _DnsServer(socketserver.ThreadingUDPServer):
    daemon_threads = True

    def __init__(self, world: DnsWorld):
        super().__init__(("127.0.0.1", 0), _DnsHandler)
        self.world = world


def _handler(site: "LoopbackSite", secure: bool):
    class Handler(BaseHTTPRequestHandler):
        def do_GET(self):
            raw = self.requestline + "\r\n" + str(self.headers)
            (site.tls_requests if secure else site.plaintext_requests).append(raw.encode())
            body = f"hello from {'https' if secure else 'http'}\n".encode()
            self.send_response(200)
            if site.http_required is not None:
                self.send_header("HTTP-Required", site.http_required)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    return Handler


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _key():
    return ec.generate_private_key(ec.SECP256R1())


def _cert(subject: str, key, issuer_name, issuer_key, ca: bool):
    now = datetime.datetime.now(datetime.timezone.utc)
    builder = (x509.CertificateBuilder()
               .subject_name(x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, subject)]))
               .issuer_name(issuer_name)
               .public_key(key.public_key())
               .serial_number(x509.random_serial_number())
               .not_valid_before(now - datetime.timedelta(days=1))
               .not_valid_after(now + datetime.timedelta(days=30))
               .add_extension(x509.BasicConstraints(ca=ca, path_length=None), critical=True))
    if not ca:
        builder = builder.add_extension(x509.SubjectAlternativeName([x509.DNSName(subject)]),
                                        critical=False)
    return builder.sign(issuer_key, hashes.SHA256())


class LoopbackSite:
    """A signed DNS world and web servers for one domain, all on loopback."""

    def __init__(self, domain: str, servers, httpreq_flags: int | None = None,
                 http_required: str | None = None, seed: int = 0, custom_anchor: bool = False,
                 epoch: int | None = None):
        self.domain = domain
        self.servers = frozenset(servers)
        self.world = build_dns_world(domain, httpreq_flags=httpreq_flags,
                                     custom_anchor=custom_anchor, seed=seed,
                                     epoch=int(time.time()) if epoch is None else epoch)
        self.http_required = http_required
        self.plaintext_requests: list = []
        self.tls_requests: list = []
        self._servers: list = []
        self._dir = tempfile.TemporaryDirectory(prefix="hsts-loopback-")
        self.http_port = _free_port()
        self.https_port = _free_port()

    @property
    def workdir(self) -> str:
        return self._dir.name

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()

    def _serve(self, server):
        self._servers.append(server)
        threading.Thread(target=server.serve_forever, daemon=True).start()

    def start(self):
        dns = _DnsServer(self.world)
        self.dns_address = "127.0.0.1:%d" % dns.server_address[1]
        self._serve(dns)

        self.anchor_file = os.path.join(self.workdir, "anchors.txt")
        with open(self.anchor_file, "w") as fh:
            fh.writelines(format_anchor(a) + "\n" for a in self.world.anchors)

        ca_key = _key()
        ca_name = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, "loopback test CA")])
        ca_cert = _cert("loopback test CA", ca_key, ca_name, ca_key, ca=True)
        self.ca_file = os.path.join(self.workdir, "ca.pem")
        with open(self.ca_file, "wb") as fh:
            fh.write(ca_cert.public_bytes(serialization.Encoding.PEM))

        if ServerKind.HTTP_ONLY in self.servers:
            server = ThreadingHTTPServer(("127.0.0.1", self.http_port), _handler(self, False))
            server.daemon_threads = True
            self._serve(server)
        if self.servers & {ServerKind.TRUSTED_HTTPS, ServerKind.UNTRUSTED_HTTPS}:
            key = _key()
            if ServerKind.TRUSTED_HTTPS in self.servers:
                cert = _cert(self.domain, key, ca_name, ca_key, ca=False)
            else:
                # self-signed: not chained to the CA the client trusts
                own = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, self.domain)])
                cert = _cert(self.domain, key, own, key, ca=False)
            cert_file = os.path.join(self.workdir, "server.pem")
            with open(cert_file, "wb") as fh:
                fh.write(cert.public_bytes(serialization.Encoding.PEM))
                fh.write(key.private_bytes(serialization.Encoding.PEM,
                                           serialization.PrivateFormat.PKCS8,
                                           serialization.NoEncryption()))
            ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
            ctx.load_cert_chain(cert_file)
            server = ThreadingHTTPServer(("127.0.0.1", self.https_port), _handler(self, True))
            server.daemon_threads = True
            server.socket = ctx.wrap_socket(server.socket, server_side=True)
            self._serve(server)

    def connect_to(self) -> list[str]:
        return [f"{self.domain}:80:127.0.0.1:{self.http_port}",
                f"{self.domain}:443:127.0.0.1:{self.https_port}"]

    def hsget_args(self) -> list[str]:
        args = ["--resolver", self.dns_address, "--anchor", self.anchor_file,
                "--ca-file", self.ca_file, "--timeout", "2"]
        for spec in self.connect_to():
            args += ["--connect-to", spec]
        return args

    def stop(self):
        for server in self._servers:
            server.shutdown()
            server.server_close()
        self._servers.clear()
        self._dir.cleanup()
