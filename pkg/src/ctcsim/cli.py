"""Command line interface.

Every subcommand accepts ``--config``; flags given on the command line
override fields from the file.
"""
import sys

import click

from ctcsim.config import ConfigError, load_config, n_list_from_max, run_config


def _common(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="JSON or YAML config document."),
        click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="Write a CSV report here."),
        click.option("--json", "json_path", type=click.Path(dir_okay=False), help="Write a JSON report here."),
        click.option("--seed", type=int, help="Seed for the 'random' gate."),
        click.option("--n-max", type=int, help="Use n = 1, 2, 4, ... up to this value."),
        click.option("--unitary", "-u", help="Interaction gate string, e.g. swap or 'h*i'."),
        click.option("--n-list", help="Comma-separated copy counts, e.g. 1,2,4,8."),
    ]
    for opt in reversed(options):
        fn = opt(fn)
    return fn


def _build(experiment, config_path, csv_path, json_path, seed, n_max, unitary, n_list, **fields):
    config = load_config(config_path) if config_path else {}
    if config.get("experiment", experiment) != experiment:
        raise ConfigError([f"experiment: config says {config['experiment']!r} but subcommand is {experiment!r}"])
    config["experiment"] = experiment
    if unitary is not None:
        config["unitary"] = unitary
    if seed is not None:
        config["seed"] = seed
    if n_list is not None:
        try:
            config["n_list"] = [int(x) for x in n_list.split(",") if x.strip()]
        except ValueError:
            raise ConfigError([f"n_list: not a comma-separated integer list: {n_list!r}"]) from None
    elif n_max is not None:
        config["n_list"] = n_list_from_max(n_max)
        config["n_max"] = n_max
    for key, value in fields.items():
        if value is not None:
            config[key] = value
    outputs = dict(config.get("outputs", {}))
    if csv_path:
        outputs["csv"] = csv_path
    if json_path:
        outputs["json"] = json_path
    if outputs:
        config["outputs"] = outputs
    return config


def _ensemble_option(fn):
    return click.option(
        "--ensemble", "ensemble_spec",
        help="Prepared ensemble as 'p:traveler:reference' items separated by ';', e.g. '0.5:0:0;0.5:1:1'.",
    )(fn)


def _parse_ensemble(spec):
    if spec is None:
        return None
    items = []
    for chunk in spec.split(";"):
        parts = chunk.strip().split(":")
        if len(parts) not in (2, 3):
            raise ConfigError([f"ensemble: bad item {chunk!r}, expected p:traveler[:reference]"])
        try:
            item = {"p": float(parts[0]), "traveler": parts[1]}
        except ValueError:
            raise ConfigError([f"ensemble: bad probability in {chunk!r}"]) from None
        if len(parts) == 3:
            item["reference"] = parts[2]
        items.append(item)
    return items


def _finish(experiment, kwargs):
    try:
        if "ensemble_spec" in kwargs:
            kwargs["ensemble"] = _parse_ensemble(kwargs.pop("ensemble_spec"))
        config = _build(experiment, **kwargs)
    except ConfigError as exc:
        for msg in exc.errors:
            click.echo(f"config error: {msg}", err=True)
        sys.exit(2)
    status, _ = run_config(config)
    sys.exit(status)


@click.group()
def cli():
    """Equivalent-circuit simulator for Deutsch closed timelike curves."""


@cli.command("fixed-point")
@_common
@click.option("--state", "system_state", help="System input state string, e.g. 0, +, amps:[...].")
def fixed_point(**kwargs):
    """Survey the consistent loop states of an interaction."""
    _finish("fixed-point", kwargs)


@cli.command("equiv")
@_common
@click.option("--state", "system_state", help="Pure system input state string.")
@_ensemble_option
@click.option("--entangled", help="Two-register (reference, traveler) source, e.g. bell:phi+.")
@click.option("--lift", type=click.Choice(["prepared", "density"]))
def equiv(**kwargs):
    """Equivalent-circuit output vs n, with distance to the Deutsch solution."""
    _finish("equiv", kwargs)


@cli.command("experiment")
@_common
@_ensemble_option
@click.option("--entangled", help="Two-register (reference, traveler) source, e.g. bell:phi+.")
@click.option("--lift", type=click.Choice(["prepared", "density", "both"]))
@click.option("--ordering", type=click.Choice(["before", "after", "both"]))
def experiment(**kwargs):
    """Reference-output correlations for a prepared or entangled source."""
    _finish("experiment", kwargs)


@cli.command("compare-semantics")
@_common
@_ensemble_option
def compare_semantics(**kwargs):
    """Shot-by-shot vs whole-ensemble Deutsch solutions."""
    _finish("compare-semantics", kwargs)


@cli.command("ordering-check")
@_common
@click.option("--entangled", help="Two-register (reference, traveler) source, e.g. bell:phi+.")
def ordering_check(**kwargs):
    """Compare measuring the partner before vs after the CTC."""
    _finish("ordering-check", kwargs)


@cli.command("run")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
def run(config_path):
    """Run a config document, dispatching on its 'experiment' field."""
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        for msg in exc.errors:
            click.echo(f"config error: {msg}", err=True)
        sys.exit(2)
    status, _ = run_config(config)
    sys.exit(status)


def main():
    cli()


if __name__ == "__main__":
    main()
