"""Serve the shim: bind address, mode, registry, fixtures via flags."""

from __future__ import annotations

import os
import sys

import click

from .app import Settings, create_app
from .fixtures import ChatFixtures
from .registry import InvalidRegistry, ModelRegistry

__all__ = ["main"]


@click.command()
@click.option("--host", default="127.0.0.1", show_default=True, help="Bind address.")
@click.option("--port", default=8100, show_default=True, help="Bind port.")
@click.option("--mock/--real", "mock", default=True, show_default=True, help="Mock mode: fixture-driven chat; real mode proxies chat upstream.")
@click.option("--registry", "registry_path", default=None, type=click.Path(), help="YAML model registry (the 'mock' model needs none).")
@click.option("--fixtures", "fixtures_path", default=None, type=click.Path(), help="JSON chat fixture scripts, keyed by prompt SHA-256.")
@click.option("--upstream-chat", default=None, help="Chat completion URL proxied to in real mode.")
@click.option("--token-env", default=None, help="Environment variable holding the shared bearer token.")
def main(
    host: str,
    port: int,
    mock: bool,
    registry_path: str | None,
    fixtures_path: str | None,
    upstream_chat: str | None,
    token_env: str | None,
) -> None:
    """Run the QE scoring shim."""
    try:
        registry = (
            ModelRegistry.from_file(registry_path) if registry_path else ModelRegistry()
        )
        fixtures = (
            ChatFixtures.from_file(fixtures_path) if fixtures_path else ChatFixtures()
        )
    except (InvalidRegistry, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    if not mock and not upstream_chat:
        click.echo("note: real mode without --upstream-chat serves scoring only", err=True)
    token = os.environ.get(token_env) if token_env else None
    if token_env and not token:
        click.echo(f"error: token environment variable {token_env} is not set", err=True)
        sys.exit(2)

    settings = Settings(
        mock=mock,
        registry=registry,
        fixtures=fixtures,
        upstream_chat=upstream_chat,
        auth_token=token,
    )
    try:
        import uvicorn
    except ImportError:
        click.echo("error: serving requires uvicorn (pip install 'qeshim[serve]')", err=True)
        sys.exit(2)
    uvicorn.run(create_app(settings), host=host, port=port)


if __name__ == "__main__":
    main()
