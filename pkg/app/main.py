"""Command line: ``python -m app.main --engine ado-iso --rho 5 --out profile.csv``.

Exit statuses: 0 success, 1 computational failure, 2 usage error.
"""
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import click
import typer
from dotenv import dotenv_values
from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import InvalidInputError, TransportError
from app.core.logger import configure_logging, logger
from app.schemas.hankel import DEConfig
from app.schemas.mc import McBoundary
from app.schemas.medium import MediumParams
from app.schemas.run import Engine, RunConfig
from app.schemas.source import Incidence
from app.services.profile_service import compute_profile
from app.utils.helpers import save_profile

PROG = "transport"

CONFIG_KEYS = (
    "engine", "mua", "mus", "g", "lmax", "N", "rho", "zmin", "zmax", "nz",
    "photons", "seed", "out", "pair", "de_h", "de_nk", "incidence", "mc_boundary",
)

cli = typer.Typer(add_completion=False, help=settings.PROJECT_NAME)


def _read_config_file(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    values = {key: value for key, value in dotenv_values(path).items() if value not in (None, "")}
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise InvalidInputError(f"unknown key(s) in {path}: {', '.join(unknown)}")
    if "rho" in values:
        values["rho"] = [item.strip() for item in values["rho"].split(",")]
    return values


def build_config(options: Dict[str, Any]) -> RunConfig:
    """Merge flags over the config file over settings defaults and validate."""
    merged: Dict[str, Any] = {
        "mua": settings.DEFAULT_MUA,
        "mus": settings.DEFAULT_MUS,
        "g": settings.DEFAULT_G,
        "lmax": settings.DEFAULT_LMAX,
        "N": settings.DEFAULT_N,
    }
    merged.update(_read_config_file(options.get("config")))
    merged.update({key: value for key, value in options.items() if key in CONFIG_KEYS and value not in (None, [], ())})

    if "engine" not in merged:
        raise InvalidInputError("missing --engine (one of: " + ", ".join(e.value for e in Engine) + ")")

    run: Dict[str, Any] = {
        "engine": merged["engine"],
        "medium": MediumParams(mu_a=merged["mua"], mu_s=merged["mus"], g=merged["g"], l_max=merged["lmax"], N=merged["N"]),
    }
    for flag, field in (("rho", "rho_mm"), ("zmin", "z_min"), ("zmax", "z_max"), ("nz", "nz"),
                        ("photons", "photons"), ("seed", "seed"), ("out", "out"),
                        ("incidence", "incidence"), ("mc_boundary", "mc_boundary")):
        if flag in merged:
            run[field] = merged[flag]
    if "pair" in merged:
        run["pair"] = tuple(part.strip() for part in str(merged["pair"]).split(","))
    de = {field: merged[flag] for flag, field in (("de_h", "h"), ("de_nk", "N_k")) if flag in merged}
    if de:
        run["de"] = DEConfig(**de)
    return RunConfig(**run)


def run(cfg: RunConfig) -> int:
    """Compute the profile and write the CSV (stdout when no --out)."""
    profile = compute_profile(cfg)
    text = save_profile(profile, cfg.out)
    if cfg.out:
        logger.info(f"wrote {len(profile.frame)} rows to {cfg.out}")
    else:
        typer.echo(text, nl=False)
    return 0


@cli.command()
def transport(
    engine: Optional[Engine] = typer.Option(None, "--engine", help="ado-pencil | ado-iso | analytic | mc | compare"),
    mua: Optional[float] = typer.Option(None, "--mua", help="Absorption coefficient (1/mm)"),
    mus: Optional[float] = typer.Option(None, "--mus", help="Scattering coefficient (1/mm)"),
    g: Optional[float] = typer.Option(None, "--g", help="Anisotropy factor"),
    lmax: Optional[int] = typer.Option(None, "--lmax", help="Phase-function truncation order"),
    N: Optional[int] = typer.Option(None, "--N", help="Quadrature half-order"),
    rho: Optional[List[float]] = typer.Option(None, "--rho", help="Radial distance in mm (repeatable)"),
    zmin: Optional[float] = typer.Option(None, "--zmin", help="First depth (mm)"),
    zmax: Optional[float] = typer.Option(None, "--zmax", help="Last depth (mm)"),
    nz: Optional[int] = typer.Option(None, "--nz", help="Number of depths"),
    photons: Optional[int] = typer.Option(None, "--photons", help="Monte Carlo photons"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Monte Carlo seed"),
    out: Optional[str] = typer.Option(None, "--out", help="CSV output path"),
    pair: Optional[str] = typer.Option(None, "--pair", help="Engines of compare, e.g. ado-iso,analytic"),
    de_h: Optional[float] = typer.Option(None, "--de-h", help="Double-exponential mesh size"),
    de_nk: Optional[int] = typer.Option(None, "--de-nk", help="Double-exponential half-width"),
    incidence: Optional[Incidence] = typer.Option(None, "--incidence", help="ado-pencil incident factor: normal | averaged"),
    mc_boundary: Optional[McBoundary] = typer.Option(None, "--mc-boundary", help="mc boundary: mirrored | vacuum"),
    config: Optional[Path] = typer.Option(None, "--config", exists=True, dir_okay=False, help="key=value defaults file"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
) -> int:
    options = dict(locals())
    configure_logging("DEBUG" if verbose else settings.LOG_LEVEL)
    return run(build_config(options))


def parse_config(argv: Sequence[str]) -> RunConfig:
    """Parse flags (and --config) into a validated RunConfig without running."""
    command = typer.main.get_command(cli)
    with command.make_context(PROG, list(argv)) as ctx:
        return build_config(ctx.params)


def _validation_message(error: ValidationError) -> str:
    first = error.errors()[0]
    where = ".".join(str(part) for part in first.get("loc", ()))
    message = first["msg"].removeprefix("Value error, ")
    return f"{where}: {message}" if where else message


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    command = typer.main.get_command(cli)
    if not argv:
        typer.echo(command.get_usage(click.Context(command, info_name=PROG)), err=True)
        typer.echo(f"Try '{PROG} --help' for help.", err=True)
        return 2
    try:
        status = command.main(args=argv, prog_name=PROG, standalone_mode=False)
    except click.ClickException as e:
        typer.echo(f"error: {e.format_message()}", err=True)
        return 2
    except ValidationError as e:
        typer.echo(f"error: {_validation_message(e)}", err=True)
        return 2
    except TransportError as e:
        logger.error(e.detail)
        typer.echo(f"error: {e.detail}", err=True)
        return e.exit_code
    return status if isinstance(status, int) else 0


if __name__ == "__main__":
    sys.exit(main())
