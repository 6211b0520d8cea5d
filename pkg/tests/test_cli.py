import json
import subprocess
import sys

import dns.dnssec
import dns.name
import dns.rdatatype
import dns.zone
import pytest

from hsts_enforced.cli import hreq_zone, hrpl, hsget, hsim
from hsts_enforced.cli.config import CliConfig, ConfigError, system_resolver
from hsts_enforced.cli.netenv import parse_connect_to
from hsts_enforced.cli.report import (BLOCKED_NO_INDICATOR, EXIT_BLOCKED, EXIT_OK, EXIT_USAGE,
                                      SCHEMA, parse_report)
from hsts_enforced.preload import DAY, PreloadEntry, build
from hsts_enforced.sim.clock import BASE_EPOCH
from hsts_enforced.sim.loopback import LoopbackSite
from hsts_enforced.sim.network import ServerKind

T0 = 1_760_000_000


@pytest.fixture
def source(tmp_path):
    path = tmp_path / "list.jsonl"
    path.write_text('{"domain": "legacy.example", "include_subdomains": false}\n'
                    '{"domain": "old.example", "include_subdomains": true}\n')
    return path


@pytest.fixture
def artifact(tmp_path, source, capsys):
    out = tmp_path / "list.hrpl"
    assert hrpl.main(["build", str(source), "-o", str(out), "--issued-at", str(T0)]) == 0
    capsys.readouterr()
    return out


class TestHrpl:
    def test_lookup_member(self, artifact, capsys):
        assert hrpl.main(["lookup", str(artifact), "legacy.example", "--now", str(T0)]) == 0
        assert capsys.readouterr().out == "HIT include_subdomains=false\n"

    def test_lookup_many(self, artifact, capsys):
        hrpl.main(["lookup", str(artifact), "a.old.example", "nope.example", "--now", str(T0)])
        assert capsys.readouterr().out == ("a.old.example HIT include_subdomains=true\n"
                                           "nope.example MISS\n")

    def test_lookup_after_expiry(self, artifact, capsys):
        hrpl.main(["lookup", str(artifact), "legacy.example", "--now", str(T0 + 42 * DAY)])
        assert capsys.readouterr().out == "EXPIRED\n"

    def test_inspect(self, artifact, capsys):
        assert hrpl.main(["inspect", str(artifact), "--entries"]) == 0
        out = capsys.readouterr().out
        assert "validity: 42 d" in out and "entries: 2" in out
        assert "  old.example (include_subdomains)" in out

    def test_build_error_has_line_context(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"domain": "a.example"}\n{"domain": 5}\n')
        assert hrpl.main(["build", str(bad), "-o", str(tmp_path / "x")]) == 2
        assert f"{bad}:2:" in capsys.readouterr().err

    def test_corrupt_file(self, artifact, capsys):
        data = bytearray(artifact.read_bytes())
        data[-1] ^= 1
        artifact.write_bytes(bytes(data))
        assert hrpl.main(["inspect", str(artifact)]) == 2
        assert "CRC" in capsys.readouterr().err


class TestHsim:
    def test_matrix_matches(self, capsys):
        assert hsim.main(["matrix"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[1].split()[2:] == ["Blocked"] * 4 + ["Trusted"] * 3
        assert lines[2].split()[1:] == ["Http", "Untrusted", "Http", "Untrusted", "Http",
                                        "Trusted", "Trusted"]

    def test_matrix_csv(self, capsys):
        assert hsim.main(["matrix", "--csv"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "row,servers,scheme,result" and len(out) == 31

    def test_run_block_https(self, tmp_path, capsys):
        path = tmp_path / "s.txt"
        path.write_text("servers = trusted-https\nattacker = block-https\nindicator = none\n")
        assert hsim.main(["run", str(path), "--json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["result"] == "blocked" and report["plaintext_requests"] == 0

    def test_unknown_key(self, tmp_path, capsys):
        path = tmp_path / "s.txt"
        path.write_text("servers = http-only\ncolour = blue\n")
        assert hsim.main(["run", str(path)]) == 2
        assert f"{path}:2: unknown key 'colour'" in capsys.readouterr().err


class TestHreqZone:
    def test_zone_parses_and_validates_with_dnspython(self, tmp_path, capsys):
        anchor = tmp_path / "anchor.txt"
        assert hreq_zone.main(["legacy.test", "--seed", "1", "--inception", str(T0),
                               "--anchor-out", str(anchor)]) == 0
        text = capsys.readouterr().out
        zone = dns.zone.from_text(text, origin="legacy.test.", relativize=False,
                                  check_origin=False)
        apex = dns.name.from_text("legacy.test.")
        node = zone.nodes[apex]
        keys = node.get_rdataset(dns.rdataclass.IN, dns.rdatatype.DNSKEY)
        httpreq = node.get_rdataset(dns.rdataclass.IN, 65280)
        sigs = node.get_rdataset(dns.rdataclass.IN, dns.rdatatype.RRSIG, 65280)
        assert httpreq is not None and httpreq[0].data == b"\x00"
        dns.dnssec.validate((apex, httpreq), (apex, sigs), {apex: keys}, now=T0 + 10)
        assert anchor.read_text().split()[-1] == "custom"

    def test_no_httpreq(self, capsys):
        hreq_zone.main(["legacy.test", "--no-httpreq", "--seed", "1"])
        assert "TYPE65280 \\#" not in capsys.readouterr().out

    def test_include_subdomains_flag(self, capsys):
        hreq_zone.main(["legacy.test", "--include-subdomains", "--seed", "1"])
        assert "TYPE65280 \\# 1 01" in capsys.readouterr().out


def world_file(tmp_path, **keys):
    path = tmp_path / "world.txt"
    path.write_text("".join(f"{k} = {v}\n" for k, v in keys.items()))
    return str(path)


class TestHsgetSimulated:
    def test_http_only_with_httpreq(self, tmp_path, capsys):
        world = world_file(tmp_path, servers="http-only", indicator="httpreq")
        assert hsget.main(["http://httponly.example/", "--world", world]) == EXIT_OK
        assert "fetched over http (allowed by httpreq-record)" in capsys.readouterr().err

    def test_http_only_without_indicator(self, tmp_path, capsys):
        world = world_file(tmp_path, servers="http-only")
        assert hsget.main(["http://httponly.example/", "--world", world]) == EXIT_BLOCKED
        assert BLOCKED_NO_INDICATOR in capsys.readouterr().err

    def test_trusted_zero_lookups(self, tmp_path, capsys):
        world = world_file(tmp_path, servers="trusted-https")
        assert hsget.main(["https://trusted.example/", "--world", world, "--explain"]) == 0
        err = capsys.readouterr().err
        assert "https-result trusted-ok" in err
        assert "preload-lookup" not in err and "httpreq-resolve" not in err

    def test_preload_time_advance(self, tmp_path, capsys):
        world = world_file(tmp_path, servers="http-only", indicator="preload")
        assert hsget.main(["httponly.example", "--world", world,
                           "--now", str(BASE_EPOCH + 41 * DAY)]) == EXIT_OK
        assert hsget.main(["httponly.example", "--world", world,
                           "--now", str(BASE_EPOCH + 43 * DAY)]) == EXIT_BLOCKED

    def test_explicit_preload_file(self, tmp_path, capsys):
        path = tmp_path / "p.hrpl"
        path.write_bytes(build([PreloadEntry("httponly.example")], BASE_EPOCH).encoded)
        world = world_file(tmp_path, servers="http-only")
        assert hsget.main(["httponly.example", "--world", world, "--preload", str(path)]) == 0

    def test_json_report_round_trip(self, tmp_path, capsys):
        world = world_file(tmp_path, servers="http-only", indicator="httpreq")
        assert hsget.main(["http://httponly.example/", "--world", world, "--json"]) == 0
        report = parse_report(capsys.readouterr().out)
        assert report["schema"] == SCHEMA and report["indicator"] == "httpreq-record"
        assert report["dns"]["round_trips"] == 6
        assert report["transcript"][0].kind == "navigate"

    def test_report_parser_rejects_other_schema(self):
        with pytest.raises(ValueError):
            parse_report('{"schema": "other/9"}')

    @pytest.mark.parametrize("argv", [["ftp://a.example/"], ["a.example", "--world", "/nope"],
                                      ["a.example", "--config", "/nope.json"]])
    def test_usage_errors(self, argv, capsys):
        assert hsget.main(argv) == EXIT_USAGE

    def test_corrupt_preload_is_usage_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.hrpl"
        bad.write_bytes(b"HRPL junk")
        world = world_file(tmp_path, servers="http-only")
        assert hsget.main(["a.example", "--world", world, "--preload", str(bad)]) == EXIT_USAGE

    def test_no_bypass_flag(self):
        flags = {a for action in hsget.build_parser()._actions for a in action.option_strings}
        assert not any("insecure" in f or "allow-http" in f or "force" in f for f in flags)


class TestConfig:
    def test_from_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"preload": "x.hrpl", "anchors": ["a.txt"],
                                    "resolver": "127.0.0.1:5300", "output": "json",
                                    "reserved": ["corp"]}))
        cfg = CliConfig.from_file(path)
        assert cfg.resolver() == "127.0.0.1:5300" and cfg.reserved_set() == {"corp"}
        assert cfg.load_preload() is None  # missing file behaves like an expired list

    @pytest.mark.parametrize("body", ["[]", '{"colour": 1}', '{"output": "xml"}', "{"])
    def test_bad_files(self, tmp_path, body):
        path = tmp_path / "c.json"
        path.write_text(body)
        with pytest.raises(ConfigError):
            CliConfig.from_file(path)

    def test_default_anchor_is_iana_root(self):
        anchors = CliConfig().load_anchors()
        assert len(anchors) == 1 and anchors[0].ds.key_tag == 20326

    def test_system_resolver(self, tmp_path):
        conf = tmp_path / "resolv.conf"
        conf.write_text("# x\nnameserver 2001:db8::53\n")
        assert system_resolver(str(conf)) == "[2001:db8::53]:53"
        assert system_resolver(str(tmp_path / "none")) == "127.0.0.1:53"

    def test_connect_to(self):
        assert parse_connect_to("a.example:443:127.0.0.1:8443") == \
            (("a.example", 443), ("127.0.0.1", 8443))
        with pytest.raises(ValueError):
            parse_connect_to("a.example:443")


class TestHsgetLoopback:
    """Real sockets on 127.0.0.1: DNS over UDP, HTTP, and TLS with a private CA."""

    def fetch(self, site, url, *extra):
        return hsget.main([url, *site.hsget_args(), *extra])

    def test_http_only_with_httpreq(self, capsys):
        with LoopbackSite("httponly.example", {ServerKind.HTTP_ONLY}, httpreq_flags=0) as site:
            assert self.fetch(site, "http://httponly.example/") == EXIT_OK
            assert len(site.plaintext_requests) == 1
        assert capsys.readouterr().out == "hello from http\n"

    def test_http_only_without_indicator_sends_nothing(self, capsys):
        with LoopbackSite("httponly.example", {ServerKind.HTTP_ONLY}) as site:
            assert self.fetch(site, "http://httponly.example/", "--json") == EXIT_BLOCKED
            assert site.plaintext_requests == []
        report = parse_report(capsys.readouterr().out)
        assert report["indicator"] is None and report["message"] == BLOCKED_NO_INDICATOR

    def test_trusted_https_zero_lookups(self, capsys):
        servers = {ServerKind.HTTP_ONLY, ServerKind.TRUSTED_HTTPS}
        with LoopbackSite("trusted.example", servers) as site:
            assert self.fetch(site, "https://trusted.example/", "--explain") == EXIT_OK
            assert site.plaintext_requests == [] and len(site.tls_requests) == 1
        err = capsys.readouterr().err
        assert "preload-lookup" not in err and "httpreq-resolve" not in err

    def test_untrusted_with_indicator(self, capsys):
        with LoopbackSite("selfsigned.example", {ServerKind.UNTRUSTED_HTTPS},
                          httpreq_flags=0) as site:
            assert self.fetch(site, "selfsigned.example") == EXIT_OK
            assert len(site.tls_requests) == 1

    def test_untrusted_without_indicator(self, capsys):
        with LoopbackSite("selfsigned.example", {ServerKind.UNTRUSTED_HTTPS}) as site:
            assert self.fetch(site, "selfsigned.example") == EXIT_BLOCKED
            assert site.tls_requests == []


def test_console_scripts_installed():
    out = subprocess.run([sys.executable, "-m", "hsts_enforced.cli.hsim", "matrix", "--csv"],
                         capture_output=True, text=True, check=True).stdout
    assert out.startswith("row,servers,scheme,result\n")
