"""REST front end for the registry and the ``hreg`` server entry point."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

from fastapi import BackgroundTasks, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, StrictBool

from ..preload import DAY
from .service import NothingPublished, RegistryError, RegistryService
from .store import Store
from .vantage import HttpVantage

PROBLEM = "application/problem+json"


class RegistrationRequest(BaseModel):
    domain: str
    include_subdomains: StrictBool = False


def problem(status: int, code: str, title: str, detail: str = "") -> JSONResponse:
    body = {"type": "about:blank", "title": title, "status": status, "code": code}
    if detail:
        body["detail"] = detail
    return JSONResponse(body, status_code=status, media_type=PROBLEM)


def create_app(service: RegistryService, verify_in_background: bool = True) -> FastAPI:
    app = FastAPI(title="HTTP-Required preload registry", version="1")
    app.state.service = service

    @app.exception_handler(RegistryError)
    async def registry_error(request: Request, exc: RegistryError):
        return problem(exc.status, exc.code, type(exc).__name__, exc.detail)

    @app.exception_handler(RequestValidationError)
    async def bad_request(request: Request, exc: RequestValidationError):
        return problem(422, "invalid-request", "Invalid request body", str(exc.errors()))

    @app.post("/v1/registrations", status_code=202)
    def submit(body: RegistrationRequest, tasks: BackgroundTasks):
        reg = service.submit(body.domain, body.include_subdomains)
        if verify_in_background and reg.status == "Pending":
            tasks.add_task(service.verify, reg.domain)
        return reg.to_json()

    @app.get("/v1/registrations/{domain}")
    def get_registration(domain: str):
        return service.get(domain).to_json()

    @app.delete("/v1/registrations/{domain}", status_code=204)
    def delete_registration(domain: str):
        service.remove(domain)
        return Response(status_code=204)

    @app.get("/v1/list/latest")
    def latest_list():
        artifact = service.latest
        if artifact is None:
            raise NothingPublished("no list has been published")
        return Response(artifact.encoded, media_type="application/octet-stream",
                        headers={"ETag": f'"{service.latest_version}"',
                                 "Content-Disposition": "attachment; filename=latest.hrpl"})

    @app.get("/v1/list/latest.jsonl")
    def latest_jsonl():
        return Response(service.latest_jsonl(), media_type="application/jsonl")

    @app.post("/v1/admin/reverify")
    def reverify():
        summary, artifact = service.scheduled_round()
        body = summary.to_json()
        body.update(version=service.latest_version, issued_at=artifact.issued_at,
                    expires_at=artifact.expires_at, entries=len(artifact.entries))
        return body

    return app


# --- configuration ---------------------------------------------------------------

@dataclass
class RegistryConfig:
    database: str = "registry.sqlite3"
    listen: str = "127.0.0.1:8080"
    validity_days: float = 42
    vantages: list = field(default_factory=list)

    @classmethod
    def load(cls, path: str) -> "RegistryConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        unknown = set(data) - {"database", "listen", "validity_days", "vantages"}
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def build_service(self) -> RegistryService:
        vantages = [HttpVantage(v["id"], v.get("proxy"), float(v.get("timeout", 10)))
                    for v in self.vantages]
        return RegistryService(Store(self.database), vantages,
                               validity=int(self.validity_days * DAY))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hreg", description="Run the preload registry service.")
    parser.add_argument("--config", required=True, help="JSON config file")
    args = parser.parse_args(argv)
    try:
        config = RegistryConfig.load(args.config)
        service = config.build_service()
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"hreg: {exc}", file=sys.stderr)
        return 2
    import uvicorn

    host, _, port = config.listen.rpartition(":")
    uvicorn.run(create_app(service), host=host or "127.0.0.1", port=int(port))
    return 0


if __name__ == "__main__":
    sys.exit(main())
