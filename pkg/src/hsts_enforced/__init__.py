"""HSTS-Enforced: secure-by-default web connections with HTTP-Required opt-outs."""

__version__ = "0.1.0"
