from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.markdown import Markdown
from rich import box

console = Console()


def display_help():
    """Display commands, options and environment variables."""

    console.print(Panel.fit(
        "[bold cyan]VibraCav Usage Guide[/]",
        border_style="cyan"
    ))

    # Commands
    commands_table = Table(show_header=True, box=box.ROUNDED)
    commands_table.add_column("Command", style="yellow")
    commands_table.add_column("Output", style="white")

    commands = [
        ("coeffs", "Bogoliubov coefficients rho_m^(n) as (tau, kappa, n, m, re, im)"),
        ("variances", "U, V, Y, invariant variances, purity, N and Q for --modes"),
        ("pdf", "Photon distribution of the first mode in --modes with the Planck reference"),
        ("figure1", "u1, v1, purity, N1, Q1 of the fundamental principal mode versus kappa"),
        ("figure2", "Cavity versus Planck photon distribution (default tau = 5, gamma = 0, p = 2)"),
        ("audit", "Unitarity, recurrence and integration cross-checks; exit code 1 on failure"),
        ("sweep", "(2m+1) Delta_m at strict resonance for m in --modes (default 1..5)"),
    ]
    for name, desc in commands:
        commands_table.add_row(name, desc)

    console.print(Panel(
        commands_table,
        title="[bold green]1. Commands",
        border_style="green"
    ))

    # Environment Variables Section
    env_table = Table(show_header=True, box=box.ROUNDED)
    env_table.add_column("Variable", style="yellow")
    env_table.add_column("Description", style="white")
    env_table.add_column("Example", style="blue")

    env_vars = [
        ("VIBRACAV_TOL", "Truncation tolerance of coefficient tables (default: 1e-12)", "1e-10"),
        ("VIBRACAV_FORMAT", "Output format for --out (default: csv)", "json"),
        ("VIBRACAV_MAX_M", "Coefficient table width (default: 15)", "20"),
    ]
    for var, desc, example in env_vars:
        env_table.add_row(var, desc, example)

    console.print(Panel(
        env_table,
        title="[bold green]2. Environment Variables (.env file)",
        border_style="green"
    ))

    # Command Line Arguments Section
    cli_table = Table(show_header=True, box=box.ROUNDED)
    cli_table.add_column("Action", style="yellow")
    cli_table.add_column("Command", style="blue")

    cli_examples = [
        ("Coefficients at one time", "vibracav coeffs --p 2 --gamma 0.5 --tau 1"),
        ("Variances over a time grid", "vibracav variances --tau-range 0:3:31 --modes 1,3,5"),
        ("Figure 1 data as JSON", "vibracav figure1 --kappa-range 0:0.999:200 --format json --out fig1.json"),
        ("Figure 2 data", "vibracav figure2 --nmax 80 --out fig2.csv"),
        ("Audit identities", "vibracav audit --p 3 --gamma 0.9 --tau-range 0.25:1:4"),
        ("Show this help", "vibracav --help"),
    ]
    for desc, cmd in cli_examples:
        cli_table.add_row(desc, cmd)

    console.print(Panel(
        cli_table,
        title="[bold green]3. Command Line Arguments",
        border_style="green"
    ))

    grid_md = """
    ## Grids
    - `--tau 1.5` evaluates a single slow time
    - `--tau-range a:b:n` and `--kappa-range a:b:n` give n inclusive, evenly spaced points
    - a tau grid and a kappa grid cannot be combined; kappa grids need |gamma| <= 1
    """
    console.print(Panel(
        Markdown(grid_md),
        title="[bold green]4. Grids",
        border_style="green"
    ))

    priorities_md = """
    ## Configuration Priority
    1. Command line arguments (highest priority)
    2. Environment variables from .env file
    3. Default values (lowest priority)
    """
    console.print(Panel(
        Markdown(priorities_md),
        title="[bold green]5. Configuration Priority",
        border_style="green"
    ))
