"""
Command-line interface for usctec.

This module exposes the schedulers, the coded-round simulator and the
reproduction checks as a single executable.

The CLI supports the following commands:
- solve-lp: Solve a capped min-max load problem
- divide: Divide a load vector into blocks stored on L+S machines
- assign: Split one block's columns into decoding groups
- place: Overflow-aware storage placement for a system
- cyclic: Cyclic baseline placement for a system
- simulate: Evaluate a strategy and verify coded rounds
- compare: Cyclic against overflow-aware placement over a storage ladder
- export-fig: Storage geometry as CSV, optionally rendered to PNG
- repro: Reproduce the reference examples and sweep
- init: Generate a configuration file with default settings

Systems are given either as a JSON/YAML file or by the name of a built-in
scenario (example1, example2, table1, or table1:Q for a storage level Q).
All numbers cross this boundary as exact ``p/q`` strings; machines are labelled
from 1.
"""

import json
import logging
from typing import Any
from typing import Dict
from typing import List
from typing import Tuple
from typing import Optional
from pathlib import Path
from fractions import Fraction
from contextlib import contextmanager
from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as get_version

import tomli
import typer
import tomli_w
import numpy as np
from rich.table import Table
from rich.markup import escape
from rich.console import Console
from rich.logging import RichHandler
from pydantic import ValidationError

from .load import LoadProblem
from .load import solve_lp
from .model import Scheme
from .model import SystemParams
from .model import UsctecError
from .model import InfeasibleError
from .model import SpeedDistribution
from .model import ModelValidationError
from .model import parse_rational
from .model import format_rational
from .repro import FAIL
from .repro import NOTE
from .repro import PASS
from .repro import run_repro
from .coding import FiniteField
from .coding import NotDecodableError
from .config import Settings
from .config import SystemConfig
from .config import load_system
from .config import load_settings
from .config import get_default_settings
from .division import DivisionProblem
from .division import divide as divide_load
from .division import realize_columns
from .division import build_assignment
from .simulator import SCENARIOS
from .simulator import table1
from .simulator import render
from .simulator import verify_round
from .simulator import compare_csv
from .simulator import geometry_csv
from .simulator import compare_table
from .simulator import evaluate_system
from .simulator import load_matrix_csv
from .simulator import parse_stragglers
from .strategies import StrategyResult
from .strategies import get_strategy
from .strategies.placement import PlacementResult
from .strategies.placement import place as place_system
from .strategies.placement import export_geometry

# Get version from package metadata
try:
    __version__ = get_version("usctec")
except (ImportError, PackageNotFoundError):
    # During development, fallback to a default version
    __version__ = "0.1.0.dev0"

EXIT_INVALID = 1
EXIT_INFEASIBLE = 2
EXIT_FAILED = 3

app = typer.Typer(
    help="""Storage placement and coded computation for elastic clusters with stragglers.

Strategies:
- usctec: overflow-aware placement under per-machine storage constraints
- cyclic: each machine stores Q consecutive blocks of N equal row blocks
"""
)
console = Console()
err_console = Console(stderr=True)


def version_callback(value: bool):
    if value:
        console.print(f"usctec version: {__version__}")
        raise typer.Exit()


@app.callback()
def main(
    version: bool = typer.Option(
        False,
        "--version",
        "-v",
        help="Show the application version and exit.",
        callback=version_callback,
        is_eager=True,
    ),
    verbose: bool = typer.Option(False, "--verbose", help="Log scheduling passes and solver steps."),
):
    """
    Schedule, place and simulate coded matrix multiplication on elastic clusters.
    """
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_time=False, show_path=False)],
        force=True,
    )


def _fail(kind: str, message: str, details: Optional[List[str]] = None, code: int = EXIT_INVALID):
    """Report an error as JSON on stderr plus a readable line, then exit."""
    err_console.print(f"[bold red]{escape(kind)}:[/bold red] {escape(message)}")
    payload = {"error": kind, "message": message, "details": details or []}
    typer.echo(json.dumps(payload), err=True)
    raise typer.Exit(code=code)


def _pydantic_details(error: ValidationError) -> List[str]:
    return [".".join(str(part) for part in item["loc"]) + f": {item['msg']}" for item in error.errors()]


@contextmanager
def _handled():
    """Map library errors to exit codes."""
    try:
        yield
    except ValidationError as e:
        _fail("validation", "invalid input", _pydantic_details(e))
    except ModelValidationError as e:
        _fail("validation", "system violates model invariants", e.errors)
    except InfeasibleError as e:
        _fail("infeasible", str(e), code=EXIT_INFEASIBLE)
    except NotDecodableError as e:
        _fail("not_decodable", str(e), code=EXIT_FAILED)
    except (FileNotFoundError, ValueError) as e:
        _fail("input", str(e))
    except UsctecError as e:
        _fail(type(e).__name__, str(e))


def _vector(text: str) -> Tuple[Fraction, ...]:
    """Parse a comma-separated list of rationals."""
    return tuple(parse_rational(item) for item in text.split(",") if item.strip())


def _integers(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise ValueError(f"expected comma-separated integers, got {text!r}")


def _rationals(values) -> List[str]:
    return [format_rational(Fraction(value)) for value in values]


def _machines(indices) -> List[int]:
    return [n + 1 for n in indices]


def _emit(text: str, output: Optional[Path] = None):
    """Write machine-readable output to a file or stdout."""
    if output:
        output.write_text(text)
        err_console.print(f"[green]Written to {output}[/green]")
    else:
        typer.echo(text, nl=not text.endswith("\n"))


def _emit_json(payload: Any, output: Optional[Path] = None):
    _emit(json.dumps(payload, indent=2), output)


def _load_settings(config_file: Optional[str]) -> Settings:
    try:
        return load_settings(Path(config_file) if config_file else None)
    except (FileNotFoundError, ValueError) as e:
        _fail("config", f"Error loading config: {e}")


def _load_system(system: str) -> Tuple[SystemParams, SpeedDistribution, Optional[SystemConfig]]:
    """A built-in scenario by name, or a system description file."""
    name, _, level = system.partition(":")
    if name in SCENARIOS and not Path(system).exists():
        if level:
            if name != "table1":
                raise ValueError(f"scenario {name} takes no storage level")
            params, dist = table1(int(level))
        else:
            params, dist = SCENARIOS[name]()
        return params, dist, None
    config = load_system(Path(system))
    params, dist = config.to_model()
    return params, dist, config


def _scheme_payload(index: int, scheme: Scheme) -> Dict[str, Any]:
    return {
        "realization": index + 1,
        "gamma": _rationals(scheme.gamma),
        "supports": [_machines(support) for support in scheme.supports],
        "mu": [_rationals(row) for row in scheme.mu],
    }


def _result_payload(result: StrategyResult, places: int) -> Dict[str, Any]:
    payload = {
        "expected_time": format_rational(result.expected_time),
        "expected_time_5dp": render(result.expected_time, places),
        "times": _rationals(result.times),
        "storage_size": format_rational(result.storage_size),
        "storage": [
            {
                "machine": n + 1,
                "measure": format_rational(interval_set.measure),
                "intervals": [_rationals(interval) for interval in interval_set],
            }
            for n, interval_set in enumerate(result.storage)
        ],
        "schemes": [_scheme_payload(i, scheme) for i, scheme in enumerate(result.schemes)],
    }
    if isinstance(result, PlacementResult):
        payload["disabled"] = _machines(result.disabled)
        payload["passes"] = [
            {
                "number": trace.number,
                "origin": format_rational(trace.origin),
                "loads": [_rationals(theta) for theta in trace.loads],
                "overflow": None
                if trace.overflow is None
                else {
                    "rho_hat": format_rational(trace.overflow.rho_hat),
                    "machines": _machines(trace.overflow.machines),
                },
            }
            for trace in result.passes
        ]
    return payload


@app.command("solve-lp")
def solve_lp_command(
    load: str = typer.Option(..., "--l", help="Total load l, e.g. 3 or 6/5"),
    speeds: str = typer.Option(..., "--s", help="Comma-separated speeds; 0 marks a preempted machine"),
    sigma: Optional[str] = typer.Option(None, "--sigma", help="Comma-separated per-machine caps (default all 1)"),
):
    """Solve the capped min-max load problem exactly."""
    with _handled():
        s = _vector(speeds)
        caps = _vector(sigma) if sigma else (Fraction(1),) * len(s)
        solution = solve_lp(LoadProblem(l=parse_rational(load), s=s, sigma=caps))
        _emit_json(
            {
                "theta": _rationals(solution.theta),
                "c": format_rational(solution.c),
                "clamped": _machines(solution.clamped),
            }
        )


@app.command("divide")
def divide_command(
    theta: str = typer.Option(..., "--theta", help="Comma-separated load vector"),
    k: int = typer.Option(..., "--k", help="Replication degree L+S"),
    rho: Optional[str] = typer.Option(None, "--rho", help="Total block mass (default sum(theta)/k)"),
):
    """Divide a load vector into blocks, each selected by exactly k machines."""
    with _handled():
        load = _vector(theta)
        problem = (
            DivisionProblem(theta=load, rho=parse_rational(rho), k=k) if rho else DivisionProblem.for_load(load, k)
        )
        result = divide_load(problem)
        _emit_json(
            {
                "gamma": _rationals(result.gamma),
                "supports": [_machines(support) for support in result.supports],
                "mu": [_rationals(row) for row in result.mu],
            }
        )


@app.command("assign")
def assign_command(
    mu_row: str = typer.Option(..., "--mu-row", help="Comma-separated load-division row of one block"),
    k: int = typer.Option(..., "--k", help="Replication degree L+S"),
    r: Optional[int] = typer.Option(None, "--r", help="Columns of B; realizes column ranges when given"),
    recovery: Optional[int] = typer.Option(None, "--L", help="Recovery threshold (required with --r)"),
):
    """Split one block's columns into decoding groups of k machines."""
    with _handled():
        assignment = build_assignment(_vector(mu_row), k)
        groups = [{"mass": format_rational(group.mass), "machines": _machines(group.machines)} for group in assignment.groups]
        if r is not None:
            if recovery is None:
                raise ValueError("--L is required together with --r")
            for group, columns in zip(groups, realize_columns(assignment, r, recovery)):
                group["columns"] = [columns.start, columns.stop]
        _emit_json({"groups": groups})


@app.command()
def place(
    system: str = typer.Argument(..., help="System file (JSON/YAML) or scenario name"),
    geometry: bool = typer.Option(False, "--geometry", help="Print the storage geometry CSV instead of JSON"),
    config_file: Optional[str] = typer.Option(None, "--config", "-c", help="Path to config file"),
):
    """Overflow-aware storage placement under per-machine storage constraints."""
    settings = _load_settings(config_file)
    with _handled():
        params, dist, _ = _load_system(system)
        result = place_system(params, dist, threads=settings.threads)
        if geometry:
            _emit(geometry_csv(export_geometry(result)))
        else:
            _emit_json(_result_payload(result, settings.decimals))


@app.command()
def cyclic(
    system: str = typer.Argument(..., help="System file (JSON/YAML) or scenario name"),
    q: Optional[int] = typer.Option(None, "--q", help="Blocks stored per machine (default N)"),
    config_file: Optional[str] = typer.Option(None, "--config", "-c", help="Path to config file"),
):
    """Cyclic baseline placement."""
    settings = _load_settings(config_file)
    with _handled():
        params, dist, _ = _load_system(system)
        result = get_strategy({"strategy": "cyclic", "Q": q}).schedule(params, dist)
        _emit_json(_result_payload(result, settings.decimals))


def _fixed_matrices(
    settings: Settings, system: Optional[SystemConfig], a_csv, b_csv, q, r, seed
) -> Optional[Tuple[Any, Any]]:
    """Matrices from CSV files or of a requested size; None lets the simulator pick exact sizes."""
    matrices = system.matrices if system else None
    a_csv = a_csv or (matrices.a_csv if matrices else None)
    b_csv = b_csv or (matrices.b_csv if matrices else None)
    if a_csv or b_csv:
        if not (a_csv and b_csv):
            raise ValueError("both A and B CSV files are required")
        return load_matrix_csv(a_csv), load_matrix_csv(b_csv)
    q = q or (matrices.q if matrices else None)
    r = r or (matrices.r if matrices else None)
    if q is None and r is None:
        return None
    if q is None or r is None:
        raise ValueError("q and r must be given together")
    field = FiniteField(settings.prime)
    rng = np.random.default_rng(seed)
    return field.random_matrix(rng, q, settings.v), field.random_matrix(rng, settings.v, r)


@app.command()
def simulate(
    system: str = typer.Argument(..., help="System file (JSON/YAML) or scenario name"),
    strategy: str = typer.Option("usctec", "--strategy", help="Placement strategy (usctec, cyclic)"),
    cyclic_q: Optional[int] = typer.Option(None, "--cyclic-q", help="Blocks per machine for the cyclic strategy"),
    prime: Optional[int] = typer.Option(None, "--prime", help="Field prime (overrides config)"),
    q: Optional[int] = typer.Option(None, "--q", help="Rows of A (default: exact scale)"),
    v: Optional[int] = typer.Option(None, "--v", help="Columns of A and rows of B"),
    r: Optional[int] = typer.Option(None, "--r", help="Columns of B (default: exact scale)"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed for matrices and stragglers"),
    stragglers: Optional[str] = typer.Option(
        None, "--stragglers", help="Results withheld per group (default S), or block:group=machines;... from 1"
    ),
    a_csv: Optional[Path] = typer.Option(None, "--a-csv", help="Integer CSV for A"),
    b_csv: Optional[Path] = typer.Option(None, "--b-csv", help="Integer CSV for B"),
    config_file: Optional[str] = typer.Option(None, "--config", "-c", help="Path to config file"),
):
    """Evaluate a strategy and verify one coded round per realization."""
    settings = _load_settings(config_file)
    with _handled():
        params, dist, config = _load_system(system)
        overrides = {
            "prime": prime or (config.field.prime if config else None),
            "v": v or (config.matrices.v if config else None),
            "seed": seed if seed is not None else (config.matrices.seed if config else None),
        }
        settings = settings.model_copy(update={key: value for key, value in overrides.items() if value is not None})
        report = evaluate_system(
            params, dist, strategy, Q=cyclic_q, places=settings.decimals, threads=settings.threads
        )
        matrices = _fixed_matrices(settings, config, a_csv, b_csv, q, r, settings.seed)
        choice = parse_stragglers(stragglers) if stragglers else None
        verification = verify_round(
            params, dist, strategy, settings.seed, settings, choice, Q=cyclic_q, matrices=matrices
        )
        _emit_json(
            {
                "strategy": report.strategy,
                "expected_time": format_rational(report.expected_time),
                "expected_time_5dp": report.expected_time_decimal,
                "times": _rationals(report.times),
                "storage_size": format_rational(report.storage_size),
                "verification": verification.model_dump(mode="json"),
            }
        )
    if not verification.passed:
        failed = [check.realization for check in verification.rounds if not check.passed]
        _fail("verification", "coded round did not reproduce the direct product", [str(i) for i in failed], EXIT_FAILED)


def _compare_rich_table(rows) -> Table:
    table = Table(show_header=True, header_style="bold")
    for column in ("Q/N", "strategy", "storage size", "expected time", "5dp"):
        table.add_column(column)
    for row in rows:
        storage = format_rational(row.storage_size) if row.feasible else "infeasible"
        time = format_rational(row.expected_time) if row.feasible else "infeasible"
        table.add_row(row.q_over_n, row.strategy, storage, time, row.expected_time_5dp)
    return table


@app.command()
def compare(
    system: Optional[str] = typer.Argument(None, help="System file (JSON/YAML) or scenario name"),
    table1_flag: bool = typer.Option(False, "--table1", help="Use the twelve-machine reference system"),
    qs: Optional[str] = typer.Option(None, "--q", help="Comma-separated storage levels Q (default L+S..N)"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="File to write the CSV to"),
    pretty: bool = typer.Option(False, "--pretty", help="Also print a table"),
    config_file: Optional[str] = typer.Option(None, "--config", "-c", help="Path to config file"),
):
    """Cyclic against overflow-aware placement with every machine storing Q/N of the rows."""
    settings = _load_settings(config_file)
    if not system and not table1_flag:
        _fail("input", "Give a system or --table1")
    with _handled():
        params, dist, _ = _load_system("table1" if table1_flag else system)
        levels = _integers(qs) if qs else list(range(6 if table1_flag else params.k, params.N + 1))
        rows = compare_table(params, dist, levels, threads=settings.threads)
        _emit(compare_csv(rows), output)
    if pretty:
        err_console.print(_compare_rich_table(rows))


def _plot_geometry(result: PlacementResult, path: Path):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ValueError("PNG export needs matplotlib: pip install 'usctec[plot]'")

    rows = export_geometry(result)
    tags = sorted({row.tags for row in rows})
    colors = {tag: plt.cm.tab10(i % 10) for i, tag in enumerate(tags)}
    fig, ax = plt.subplots(figsize=(8, 0.5 * len(result.storage) + 1))
    for row in rows:
        ax.barh(row.machine, float(row.end - row.start), left=float(row.start), color=colors[row.tags])
    for trace in result.passes:
        if trace.overflow is not None:
            ax.axvline(float(trace.overflow.rho_hat), color="black", linestyle="--", linewidth=1)
    handles = [plt.Rectangle((0, 0), 1, 1, color=colors[tag]) for tag in tags]
    ax.legend(handles, tags, loc="lower right")
    ax.set_xlim(0, 1)
    ax.set_xlabel("row")
    ax.set_ylabel("machine")
    ax.set_yticks(range(1, len(result.storage) + 1))
    ax.invert_yaxis()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


@app.command("export-fig")
def export_fig(
    system: str = typer.Argument(..., help="System file (JSON/YAML) or scenario name"),
    csv_path: Optional[Path] = typer.Option(None, "--csv", help="File to write the geometry CSV to"),
    png_path: Optional[Path] = typer.Option(None, "--png", help="Render the geometry to a PNG"),
    config_file: Optional[str] = typer.Option(None, "--config", "-c", help="Path to config file"),
):
    """Storage geometry of overflow-aware placement (machine, start, end, tags)."""
    settings = _load_settings(config_file)
    with _handled():
        params, dist, _ = _load_system(system)
        result = place_system(params, dist, threads=settings.threads)
        _emit(geometry_csv(export_geometry(result)), csv_path)
        if png_path:
            _plot_geometry(result, png_path)
            err_console.print(f"[green]Figure saved to {png_path}[/green]")


STATUS_STYLE = {PASS: "green", FAIL: "bold red", NOTE: "yellow"}


@app.command()
def repro(
    as_json: bool = typer.Option(False, "--json", help="Print the checks as JSON"),
    config_file: Optional[str] = typer.Option(None, "--config", "-c", help="Path to config file"),
):
    """Reproduce the reference examples and the twelve-machine sweep."""
    settings = _load_settings(config_file)
    with _handled():
        checks = run_repro(settings)

    if as_json:
        _emit_json([check.model_dump() for check in checks])
    else:
        for check in checks:
            style = STATUS_STYLE[check.status]
            console.print(f"[{style}]{check.status}[/{style}] {escape(check.name)}  {escape(check.detail)}")

    failed = [check.name for check in checks if check.status == FAIL]
    if failed:
        _fail("acceptance", f"{len(failed)} check(s) failed", failed, EXIT_FAILED)
    if not as_json:
        console.print("\n[bold green]✓ All gating checks passed![/bold green]")


def _write_to_pyproject(pyproject_path: Path, settings: Dict[str, Any], force: bool):
    """Write settings to the [tool.usctec] table of a pyproject.toml file."""
    existing: Dict[str, Any] = {}
    if pyproject_path.exists():
        with open(pyproject_path, "rb") as f:
            try:
                existing = tomli.load(f)
            except Exception as e:
                console.print(f"[bold red]Error reading existing pyproject.toml: {escape(str(e))}[/bold red]")
                raise typer.Exit(code=EXIT_INVALID)
    tool = existing.setdefault("tool", {})
    if "usctec" in tool and not force:
        console.print(f"[bold red]{escape('[tool.usctec]')} already exists; use --force to overwrite[/bold red]")
        raise typer.Exit(code=EXIT_INVALID)
    tool["usctec"] = settings
    with open(pyproject_path, "wb") as f:
        tomli_w.dump(existing, f)


@app.command()
def init(
    path: Optional[Path] = typer.Option(None, "--path", help="Output config file path (default usctec.toml)"),
    pyproject: bool = typer.Option(False, "--pyproject", help="Write to [tool.usctec] in pyproject.toml"),
    force: bool = typer.Option(False, "--force", help="Overwrite existing settings"),
):
    """Create a configuration file with default settings."""
    settings = get_default_settings()
    output_file = path or Path("pyproject.toml" if pyproject else "usctec.toml")
    try:
        if pyproject or output_file.name == "pyproject.toml":
            _write_to_pyproject(output_file, settings, force)
        else:
            if output_file.exists() and not force:
                console.print(f"[bold red]{output_file} already exists; use --force to overwrite[/bold red]")
                raise typer.Exit(code=EXIT_INVALID)
            with open(output_file, "wb") as f:
                tomli_w.dump(settings, f)
    except OSError as e:
        console.print(f"[bold red]Failed to write configuration:[/bold red] {escape(str(e))}")
        raise typer.Exit(code=EXIT_INVALID)
    console.print(f"[bold green]Configuration created at {output_file}[/bold green]")


if __name__ == "__main__":
    app()
