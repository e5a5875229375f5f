"""Command line interface: chat (a thin client over the HTTP API), simulate,
serve, and data generation."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .config import EngineConfig, load_config
from .datagen import demo_schema, generate_catalog, rows_to_csv, write_demo_data
from .simulator import (
    CONDITION_CONTROL,
    CONDITION_MODELING,
    ExperimentConfig,
    analyze,
    records_to_csv,
    run_experiment,
)


def _build_config(config_path, **overrides) -> EngineConfig:
    return load_config(config_path, **overrides)


def _resolve_catalog_dir(catalog_dir):
    """Accept a directory holding schema.json/items.csv, possibly under catalog/."""
    base = Path(catalog_dir)
    for candidate in (base, base / "catalog"):
        schema = candidate / "schema.json"
        items = candidate / "items.csv"
        if schema.exists() and items.exists():
            return str(schema), str(items)
    raise click.ClickException(
        f"no schema.json/items.csv found under {catalog_dir!r} (try 'advisor gen-data')"
    )



@click.group()
def cli():
    """Conversational restaurant advisor with a long-term user model."""


@cli.command()
@click.option("--user", "user_id", required=True, help="User id; the model persists per user.")
@click.option("--data", "data_dir", default=None, help="Data directory for user models.")
@click.option("--catalog", "catalog_dir", default=None, type=click.Path(exists=True),
              help="Directory holding schema.json and items.csv.")
@click.option("--schema", "schema_path", default=None, type=click.Path(exists=True))
@click.option("--items", "items_path", default=None, type=click.Path(exists=True))
@click.option("--server", default=None, help="Talk to a running service instead of in-process.")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--no-adapt", is_flag=True, help="Do not persist model updates (control behavior).")
def chat(user_id, data_dir, catalog_dir, schema_path, items_path, server, config_path, no_adapt):
    """Interactive terminal conversation; the model is persisted on exit."""
    if server is not None:
        import httpx

        client = httpx.Client(base_url=server)
    else:
        from fastapi.testclient import TestClient

        from .service import create_app

        if catalog_dir is not None:
            schema_path, items_path = _resolve_catalog_dir(catalog_dir)
            data_dir = data_dir or catalog_dir
        config = _build_config(
            config_path,
            data_dir=data_dir,
            schema_path=schema_path,
            items_path=items_path,
            adapt=(False if no_adapt else None),
        )
        client = TestClient(create_app(config=config))
    response = client.post("/api/sessions", json={"user_id": user_id})
    if response.status_code != 201:
        raise click.ClickException(f"could not create session: {response.text}")
    payload = response.json()
    session_id = payload["session_id"]
    click.echo(f"advisor: {payload['prompt']}")
    while True:
        try:
            text = click.prompt("you", prompt_suffix="> ")
        except (click.exceptions.Abort, EOFError):
            client.delete(f"/api/sessions/{session_id}")
            click.echo("\nadvisor: Done.")
            return
        response = client.post(
            f"/api/sessions/{session_id}/utterances", json={"text": text}
        )
        if response.status_code != 200:
            raise click.ClickException(f"service error: {response.text}")
        payload = response.json()
        if payload.get("item"):
            item = payload["item"]
            click.echo(f"         {item['name']} | {item['address']} | {item['phone']}")
        click.echo(f"advisor: {payload['prompt']}")
        if payload.get("terminal"):
            return


@cli.command()
@click.option("--users", default=20, show_default=True)
@click.option("--sessions", default=15, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path(), help="Metrics CSV path.")
@click.option("--condition", type=click.Choice([CONDITION_MODELING, CONDITION_CONTROL]),
              default=None, help="Run a single condition.")
@click.option("--both-conditions", is_flag=True, help="Run modeling and control.")
@click.option("--no-adapt", is_flag=True, help="Alias for --condition control.")
@click.option("--items", "n_items", default=1900, show_default=True,
              help="Synthetic catalog size.")
@click.option("--catalog-seed", default=7, show_default=True)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def simulate(users, sessions, seed, out_path, condition, both_conditions, no_adapt,
             n_items, catalog_seed, config_path):
    """Run the simulated-user experiment and print the summary table."""
    config = _build_config(config_path)
    catalog = generate_catalog(n_items=n_items, seed=catalog_seed)
    if no_adapt:
        condition = CONDITION_CONTROL
    if both_conditions:
        conditions = [CONDITION_MODELING, CONDITION_CONTROL]
    elif condition:
        conditions = [condition]
    else:
        conditions = [CONDITION_MODELING, CONDITION_CONTROL]
    records = []
    for cond in conditions:
        records.extend(
            run_experiment(
                ExperimentConfig(
                    n_users=users,
                    n_sessions=sessions,
                    condition=cond,
                    seed=seed,
                    params=config.similarity_params(),
                    policy=config.update_policy(),
                    constrain_strategy=config.constrain_strategy,
                    relax_strategy=config.relax_strategy,
                ),
                catalog,
            )
        )
    if out_path:
        Path(out_path).write_text(records_to_csv(records))
        click.echo(f"wrote {len(records)} records to {out_path}")
    click.echo(analyze(records).summary_table())


@cli.command()
@click.option("--port", default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data", "data_dir", default=None)
@click.option("--catalog", "catalog_dir", default=None, type=click.Path(exists=True),
              help="Directory holding schema.json and items.csv.")
@click.option("--schema", "schema_path", default=None, type=click.Path(exists=True))
@click.option("--items", "items_path", default=None, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--frontend", "frontend_dir", default=None, type=click.Path(exists=True),
              help="Serve a built web chat from this directory at /.")
def serve(port, host, data_dir, catalog_dir, schema_path, items_path, config_path, frontend_dir):
    """Run the HTTP session service."""
    import uvicorn

    from .service import create_app

    if catalog_dir is not None:
        schema_path, items_path = _resolve_catalog_dir(catalog_dir)
        data_dir = data_dir or catalog_dir
    config = _build_config(
        config_path, data_dir=data_dir, schema_path=schema_path, items_path=items_path
    )
    app = create_app(config=config)
    if frontend_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="webchat")
    uvicorn.run(app, host=host, port=port)


@cli.command("gen-data")
@click.option("--out", "out_dir", default="./data", show_default=True)
@click.option("--items", "n_items", default=0, show_default=True,
              help="If > 0, also write a synthetic catalog of this size.")
@click.option("--seed", default=7, show_default=True)
def gen_data(out_dir, n_items, seed):
    """Write the bundled demo schema and items (and optionally a larger catalog)."""
    schema_path, items_path = write_demo_data(out_dir)
    click.echo(f"wrote {schema_path} and {items_path}")
    if n_items > 0:
        catalog = generate_catalog(n_items=n_items, seed=seed)
        rows = []
        for item in catalog.items:
            row = {"id": item.id, "name": item.display.name,
                   "address": item.display.address, "phone": item.display.phone}
            row.update(item.values)
            rows.append(row)
        big = Path(out_dir) / "catalog" / f"items-{n_items}.csv"
        big.write_text(rows_to_csv(rows, demo_schema()))
        click.echo(f"wrote {big}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 2
    except (ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
