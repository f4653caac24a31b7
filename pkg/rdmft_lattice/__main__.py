"""
Command line entry point: sector bases, polytopes, functional scans,
ground states and the Hubbard-square tables.
"""

from __future__ import annotations

import concurrent.futures
import itertools
import logging
import sys
from functools import wraps
from pathlib import Path
from typing import Optional

import click
import click_log
import numpy as np
import pandas as pd
from pydantic import ValidationError
from tqdm import tqdm

from .config import GridAxis, RunConfig
from .core_model import LatticeSpec, build_interaction_matrix
from .emit import emit_csv
from .errors import ConfigError, RdmftError, StepTooLargeError
from .hubbard_square import figure_data, scan_functional
from .levy_functional import (
    ConstrainedSearchProblem,
    boundary_expansion,
    exchange_force,
    functional_ensemble,
    functional_general,
    functional_simplex,
)
from .oracle_ed import ground_state, sector_hamiltonian
from .polytope import build_polytope
from .settings import settings
from .symmetry_basis import SectorLabel, adapt_symmetry, all_sectors, enumerate_sector

logger = logging.getLogger("rdmft_lattice")
click_log.basic_config(logger)

NULL_EIGENVALUE = 1e-10


def common_options(f):
    @click.option("--config", "config_path", type=click.Path(path_type=Path), help="JSON run configuration")
    @click.option("--sector", type=str, help="Sector as K components then Mz, e.g. 2,0")
    @click.option("--csv", "csv_path", type=click.Path(path_type=Path), help="Write results as CSV")
    @click.option("--dry-run", is_flag=True, help="Validate the configuration and stop")
    @click.option("--quiet", is_flag=True)
    @click.option("--no-progress", is_flag=True)
    @wraps(f)
    def wrapper(*args, **kwargs):
        return f(*args, **kwargs)

    return wrapper


def load_config(config_path: Optional[Path]) -> RunConfig:
    if config_path is None:
        return RunConfig()
    logger.debug("Reading config %s", config_path)
    return RunConfig.from_path(config_path)


def parse_sector(text: str, lattice: LatticeSpec, config: RunConfig) -> SectorLabel:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise click.BadParameter(f"Cannot parse sector {text!r}", param_hint="--sector")
    n_k = lattice.dimension
    expected = n_k + (1 if lattice.spinful else 0)
    if len(values) != expected:
        raise click.BadParameter(
            f"Expected {expected} comma separated values", param_hint="--sector"
        )
    S = config.sector.S if config.sector else None
    parity = config.sector.parity if config.sector else None
    try:
        return SectorLabel(
            K=tuple(int(v) for v in values[:n_k]),
            Mz=values[n_k] if lattice.spinful else None,
            S=S,
            parity=parity,
        )
    except ValidationError as e:
        raise click.BadParameter(e.errors()[0]["msg"], param_hint="--sector")


def resolve_sector(sector: Optional[str], lattice: LatticeSpec, config: RunConfig) -> SectorLabel:
    if sector:
        return parse_sector(sector, lattice, config)
    if config.sector is None:
        raise ConfigError("No sector given on the command line or in the config", "/sector")
    return config.sector.label()


def sector_basis(config: RunConfig, label: SectorLabel):
    """
    The determinant basis, recombined when the label asks for S or parity.
    """
    model = config.require_model()
    basis = enumerate_sector(model.lattice, model.particles, label)
    if label.S is None and label.parity is None:
        return basis, basis
    return basis, adapt_symmetry(basis, label.S, label.parity)


def orbital_names(lattice: LatticeSpec, indices) -> list[str]:
    orbitals = lattice.orbitals()
    return ["n" + orbitals[q].label() for q in indices]


def write_table(table, csv_path: Optional[Path], columns=None):
    if csv_path is None:
        return
    emit_csv(table, csv_path, columns)
    logger.info("Wrote %s", csv_path)


@click.group()
@click_log.simple_verbosity_option(logger, default=settings.log_level)
def cli():
    pass


@cli.command()
@common_options
def basis(config_path, sector, csv_path, dry_run, quiet, no_progress):
    """
    Print the determinants of a sector.
    """
    config = load_config(config_path)
    model = config.require_model()
    label = resolve_sector(sector, model.lattice, config)
    if dry_run:
        click.echo("config ok")
        return
    determinants, adapted = sector_basis(config, label)
    click.echo(f"R={determinants.size}")
    if not quiet:
        for r in range(determinants.size):
            click.echo(f"  {r}: {' '.join(determinants.orbital_labels(r))}")
    if adapted is not determinants:
        click.echo(f"adapted R={adapted.size} (S={label.S}, p={label.parity})")

    rows = [
        {
            "sector": label.short(),
            "r": r,
            "orbitals": " ".join(determinants.orbital_labels(r)),
            "vertex": "".join(str(v) for v in determinants.vertices[r]),
        }
        for r in range(determinants.size)
    ]
    write_table(rows, csv_path, ["sector", "r", "orbitals", "vertex"])


@cli.command()
@common_options
def polytope(config_path, sector, csv_path, dry_run, quiet, no_progress):
    """
    Print the affine chart, facets and incidence data of a sector polytope.
    """
    config = load_config(config_path)
    model = config.require_model()
    label = resolve_sector(sector, model.lattice, config)
    if dry_run:
        click.echo("config ok")
        return
    _, basis = sector_basis(config, label)
    poly = build_polytope(basis, order=config.chart_order)
    names = orbital_names(model.lattice, poly.chart.independent)
    click.echo(f"vertices={poly.n_vertices} d_ind={poly.dimension} simplex={poly.is_simplex}")
    click.echo("independent: " + ", ".join(names))
    all_names = orbital_names(model.lattice, range(poly.chart.n_orbitals))
    for q, constant, coefficients in poly.chart.relations():
        terms = " ".join(
            f"{'-' if c < 0 else '+'} {abs(c)}*{n}" for c, n in zip(coefficients, names) if c != 0
        )
        click.echo(f"  {all_names[q]} = {constant} {terms}".rstrip())
    for facet in poly.facets:
        row = ",".join(str(v) for v in facet.row())
        click.echo(f"facet {facet.label}: {row}    {facet.describe(names)}")
    eigenvalues, eigenvectors = poly.gram
    click.echo("C eigenvalues: " + " ".join(f"{c:.12g}" for c in eigenvalues))
    for k in np.flatnonzero(np.abs(eigenvalues) < NULL_EIGENVALUE):
        click.echo("  null w: " + " ".join(f"{w:.12g}" for w in eigenvectors[:, k]))

    rows = []
    for r, vertex in enumerate(poly.chart_vertices):
        rows.append({"kind": "vertex", "index": r, "constant": "", **dict(zip(names, vertex))})
    for facet in poly.facets:
        rows.append(
            {
                "kind": "facet",
                "index": facet.label,
                "constant": facet.constant,
                **dict(zip(names, facet.coefficients)),
            }
        )
    write_table(rows, csv_path, ["kind", "index", "constant", *names])


def parse_grid(text: str) -> GridAxis:
    try:
        start, stop, num = text.split(":")
        return GridAxis(start=float(start), stop=float(stop), num=int(num))
    except ValueError:
        raise click.BadParameter(f"Grid axis {text!r} is not start:stop:num", param_hint="--grid")


def parse_point(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise click.BadParameter(f"Cannot parse point {text!r}", param_hint="--point")


@cli.command()
@common_options
@click.option("--grid", "grid", multiple=True, help="One start:stop:num axis per chart coordinate")
@click.option("--point", "points", multiple=True, help="Comma separated chart coordinates")
@click.option("--facet", type=int, help="Facet index for a boundary study")
@click.option("--ray", is_flag=True, help="Fit the boundary expansion along a ray")
@click.option("--ensemble", is_flag=True, help="Evaluate the ensemble functional")
@click.option("--force", is_flag=True, help="Add finite-difference gradients")
def functional(
    config_path,
    sector,
    csv_path,
    dry_run,
    quiet,
    no_progress,
    grid,
    points,
    facet,
    ray,
    ensemble,
    force,
):
    """
    Evaluate the interaction functional on a grid or along a boundary ray.
    """
    config = load_config(config_path)
    model = config.require_model()
    label = resolve_sector(sector, model.lattice, config)
    settings_ = config.functional
    axes = [parse_grid(g) for g in grid] or settings_.grid
    chosen = [parse_point(p) for p in points] + [list(p) for p in settings_.points]
    facet = facet if facet is not None else settings_.facet
    ray = ray or settings_.ray
    ensemble = ensemble or settings_.ensemble
    force = force or settings_.force
    if dry_run:
        click.echo("config ok")
        return

    _, basis = sector_basis(config, label)
    poly = build_polytope(basis, order=config.chart_order)
    V = build_interaction_matrix(model.interaction, basis)
    problem = ConstrainedSearchProblem.build(poly, V)
    options = config.search_options()
    names = orbital_names(model.lattice, poly.chart.independent)

    if ray:
        if facet is None:
            raise click.UsageError("--ray needs --facet")
        expansion = boundary_expansion(problem, facet, options=options)
        click.echo(
            f"facet {facet}: F0={expansion.value:.12g} G={expansion.coefficient:.12g} "
            f"beta={expansion.exponent:.6f} poor_fit={expansion.poor_fit}"
        )
        rows = [
            {"facet": facet, "eps": eps, "F": value}
            for eps, value in zip(expansion.distances, expansion.values)
        ]
        write_table(rows, csv_path, ["facet", "eps", "F"])
        return

    if axes:
        if len(axes) != poly.dimension:
            raise click.UsageError(
                f"Need {poly.dimension} grid axes, got {len(axes)}"
            )
        chosen += [
            list(p)
            for p in itertools.product(*[np.linspace(a.start, a.stop, a.num) for a in axes])
        ]
    if not chosen:
        raise click.UsageError("Give --grid or --point, or list points in the config")

    inside = []
    for point in chosen:
        if len(point) != poly.dimension:
            raise click.UsageError(f"Point {point} needs {poly.dimension} coordinates")
        ok, margin = poly.contains(point)
        if ok:
            inside.append(np.array(point))
        else:
            logger.warning("Skipping %s outside the polytope (margin %.3g)", point, margin)

    step = settings_.step or config.tolerances.step_scale * poly.diameter

    def evaluate(point):
        if ensemble:
            evaluation = functional_ensemble(problem, n=point, options=options)
        elif poly.is_simplex:
            evaluation = functional_simplex(poly, V, point, options)
        else:
            evaluation = functional_general(problem, n=point, options=options)
        if force:
            try:
                evaluation.gradient = exchange_force(problem, point, step, options)
            except StepTooLargeError as e:
                logger.warning("No gradient at %s: %s", point, e)
                evaluation.gradient = np.full(poly.dimension, np.nan)
        return evaluation

    with concurrent.futures.ThreadPoolExecutor(max_workers=config.workers) as ex:
        evaluations = list(
            tqdm(
                ex.map(evaluate, inside),
                total=len(inside),
                desc="functional",
                disable=quiet or no_progress,
            )
        )

    rows = []
    for point, evaluation in zip(inside, evaluations):
        row = dict(zip(names, point))
        row.update(
            {
                "F": evaluation.value,
                "converged": evaluation.converged,
                "margin": evaluation.margin,
            }
        )
        if evaluation.gradient is not None:
            row.update({f"dF/d{n}": g for n, g in zip(names, evaluation.gradient)})
        rows.append(row)
        if not quiet:
            coordinates = " ".join(f"{v:.6g}" for v in point)
            click.echo(f"{coordinates}  F={evaluation.value:.12g}")
    click.echo(f"evaluated {len(rows)} of {len(chosen)} points")
    columns = [*names, "F", "converged", "margin"]
    if force:
        columns += [f"dF/d{n}" for n in names]
    write_table(rows, csv_path, columns)


@cli.command("ground-state")
@common_options
def ground_state_command(config_path, sector, csv_path, dry_run, quiet, no_progress):
    """
    Exact ground energy of one sector, or of every sector with --sector all.
    """
    config = load_config(config_path)
    model = config.require_model()
    scan_all = sector == "all"
    label = None if scan_all else resolve_sector(sector, model.lattice, config)
    if dry_run:
        click.echo("config ok")
        return

    if scan_all:
        bases = all_sectors(model.lattice, model.particles)
    else:
        bases = [sector_basis(config, label)[1]]

    names = orbital_names(model.lattice, range(model.lattice.n_orbitals))
    rows = []
    for basis in tqdm(bases, desc="sectors", disable=quiet or no_progress):
        result = ground_state(sector_hamiltonian(basis, model.interaction))
        click.echo(f"{basis.sector.short()}  R={basis.size}  E0={result.energy:.12g}")
        rows.append(
            {
                "sector": basis.sector.short(),
                "R": basis.size,
                "E0": result.energy,
                **dict(zip(names, result.occupations)),
            }
        )
    write_table(rows, csv_path, ["sector", "R", "E0", *names])


@cli.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path), help="JSON run configuration")
@click.option("--u", "u_values", type=float, multiple=True, help="Coupling U/t, repeatable")
@click.option("--grid-n2", type=int, help="Number of interior n2 grid points")
@click.option("--figure", type=click.Choice(["1", "2"]), help="1: functional curves, 2: energies")
@click.option("--u-max", type=float, help="Largest coupling of the energy table")
@click.option("--u-points", type=int, help="Number of couplings of the energy table")
@click.option("--csv", "csv_path", type=click.Path(path_type=Path), help="Write results as CSV")
@click.option("--dry-run", is_flag=True, help="Validate the configuration and stop")
@click.option("--quiet", is_flag=True)
@click.option("--no-progress", is_flag=True)
def square(
    config_path,
    u_values,
    grid_n2,
    figure,
    u_max,
    u_points,
    csv_path,
    dry_run,
    quiet,
    no_progress,
):
    """
    Functional curves and energy asymptotics of the Hubbard square.
    """
    config = load_config(config_path)
    section = config.square
    u_values = list(u_values) or section.u
    grid_n2 = grid_n2 or section.n2_points
    figure = int(figure) if figure else section.figure
    u_max = u_max or section.u_max
    u_points = u_points or section.u_points
    if dry_run:
        click.echo("config ok")
        return

    n2_grid = np.linspace(0.0, 1.0, grid_n2 + 2)[1:-1]
    if figure == 2:
        couplings = np.geomspace(0.01, u_max, u_points)
        energy = figure_data(couplings, [0.5], quiet=quiet or no_progress)["energy"]
        for _, row in energy.iterrows():
            click.echo(
                f"u={row.u:.6g}  E0={row.E0_exact:.12g}  rel_err_strong={row.rel_err_strong:.3g}"
            )
        write_table(energy, csv_path)
        return

    if figure == 1:
        functional_table = pd.concat(
            [scan_functional(u, n2_grid).to_frame() for u in u_values], ignore_index=True
        )
        if not quiet:
            click.echo(functional_table.to_string(index=False))
        write_table(functional_table, csv_path)
        return

    tables = figure_data(u_values, n2_grid, quiet=quiet or no_progress)
    for _, row in tables["energy"].iterrows():
        click.echo(
            f"u={row.u:.6g}  E0={row.E0_exact:.12g}  E0_rdmft={row.E0_rdmft:.12g}  n2={row.n2_exact:.6g}"
        )
    if csv_path is not None:
        stem = csv_path.with_suffix("")
        write_table(tables["functional"], stem.with_name(stem.name + "-functional.csv"))
        write_table(tables["energy"], stem.with_name(stem.name + "-energy.csv"))


@cli.command()
def schema():
    """
    Print the JSON schema of the run configuration.
    """
    click.echo(RunConfig.schema_json())


def run(argv=None) -> int:
    """
    Run the command line and map failures to exit codes: 2 for usage and
    configuration errors, 1 for other domain errors.
    """
    try:
        result = cli.main(args=argv, prog_name="rdmft-lattice", standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return 2
    except ConfigError as e:
        click.echo(f"Error: {e}", err=True)
        return 2
    except RdmftError as e:
        click.echo(f"Error: {e}", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        return 1
    return result if isinstance(result, int) else 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
