import logging
from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError
from rich.console import Console

from app.config import Band, band_config, configure_logging
from app.errors import SimulationError
from app.hall import generate_synthetic_hall
from app.scenario import load_scene, save_scene, save_schema
from app.services.emulate import Aggregation, RunConfig, Setup, run_detailed
from app.services.exporter import read_summary, write_outputs
from app.services.measure import JitterDistribution, SyncModel, TransmissionSchedule
from app.services.report import build_report
from app.ui.tables import error_table, mpc_table

log = logging.getLogger("raypos.cli")


def _choices(enum):
    return click.Choice([e.value for e in enum], case_sensitive=False)


class _Command(click.Command):
    """Reports SimulationError as a one-line diagnostic with exit code 1."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except SimulationError as e:
            log.debug("command failed", exc_info=True)
            raise click.ClickException(str(e)) from e


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
@click.option("--log-file", type=click.Path(dir_okay=False), default=None, help="Also log to this file.")
def cli(verbose: bool, log_file: Optional[str]):
    """Ray-traced OTDoA positioning emulator for an indoor production hall."""
    configure_logging(logging.DEBUG if verbose else logging.INFO, log_file)


@cli.command("run", cls=_Command)
@click.option("--scenario", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--band", required=True, type=_choices(Band))
@click.option("--setup", required=True, type=_choices(Setup))
@click.option("--seed", required=True, type=click.IntRange(min=0))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--duration-s", type=float, default=None, help="Emulation time [s].")
@click.option("--interval-s", type=float, default=None, help="Snapshot interval [s].")
@click.option("--sync-ns", type=float, default=None, help="BS synchronization precision [ns]; 0 disables jitter.")
@click.option("--jitter", type=_choices(JitterDistribution), default=JitterDistribution.UNIFORM.value)
@click.option("--delta-ms", type=float, default=None, help="Time between BS transmissions [ms].")
@click.option("--reference-bs", type=int, default=None, help="Reference BS id (default: lowest).")
@click.option("--aggregate", type=_choices(Aggregation), default=Aggregation.POSITIONS.value)
@click.option("--rx-sensitivity-dbm", type=float, default=None)
@click.option("--workers", type=click.IntRange(min=1), default=1)
@click.option("--per-snapshot-cdf", is_flag=True)
@click.option("--dump-paths", is_flag=True)
@click.option("--dump-measurements", is_flag=True)
@click.option("--no-progress", is_flag=True)
def run_command(scenario, band, setup, seed, out, duration_s, interval_s, sync_ns, jitter, delta_ms,
                reference_bs, aggregate, rx_sensitivity_dbm, workers, per_snapshot_cdf,
                dump_paths, dump_measurements, no_progress):
    """Emulate one band/setup over a scenario and write the evaluation files."""
    scene = load_scene(scenario)
    fields = {
        "band": band_config(band, rx_sensitivity_dbm),
        "setup": Setup(setup.lower()),
        "run_seed": seed,
        "aggregation": Aggregation(aggregate.lower()),
        "reference_bs": reference_bs,
        "workers": workers,
    }
    if duration_s is not None:
        fields["duration_s"] = duration_s
    if interval_s is not None:
        fields["snapshot_interval_s"] = interval_s
    sync = {"distribution": JitterDistribution(jitter.lower())}
    if sync_ns is not None:
        sync["precision_ns"] = sync_ns
    try:
        fields["sync"] = SyncModel(**sync)
        if delta_ms is not None:
            fields["sched"] = TransmissionSchedule(delta_ms=delta_ms)
        config = RunConfig(**fields)
    except ValidationError as e:
        first = e.errors()[0]
        raise click.BadParameter(f"{'.'.join(str(x) for x in first['loc'])}: {first['msg']}") from e
    if reference_bs is not None and reference_bs not in {b.id for b in scene.base_stations}:
        raise click.BadParameter(f"no base station with id {reference_bs}", param_hint="--reference-bs")

    output = run_detailed(
        scene, config, progress=not no_progress, detailed=dump_paths or dump_measurements
    )
    report = build_report(output.results, config, per_snapshot_cdf=per_snapshot_cdf)
    write_outputs(report, out, output, dump_paths=dump_paths, dump_measurements=dump_measurements)
    click.echo(
        f"average {report.average_error_m:.3f} m, 90th percentile {report.percentiles['90']:.3f} m -> {out}"
    )


@cli.command("gen-hall", cls=_Command)
@click.option("--seed", required=True, type=click.IntRange(min=0))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def gen_hall_command(seed: int, out: str):
    """Write the synthetic production hall as a scenario file."""
    path = save_scene(generate_synthetic_hall(seed), Path(out))
    click.echo(str(path))


@cli.command("schema", cls=_Command)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def schema_command(out: str):
    """Write the JSON Schema of the scenario file."""
    click.echo(str(save_schema(Path(out))))


@cli.command("compare", cls=_Command)
@click.option("--a", "dir_a", required=True, type=click.Path(exists=True))
@click.option("--b", "dir_b", required=True, type=click.Path(exists=True))
def compare_command(dir_a: str, dir_b: str):
    """Print the error summary and MPC histograms of two run directories."""
    a, b = read_summary(dir_a), read_summary(dir_b)
    console = Console()
    console.print(error_table(a, b))
    console.print(mpc_table(a, b))
