from rich.console import Console, Group
from rich.panel import Panel
from rich import box
from rich.text import Text
from rich.align import Align

from . import __version__


def display_banner():
    """Display the start-up banner."""
    console = Console()

    title = Text()
    title.append("VibraCav", style="bold yellow")
    title.append(" - resonantly vibrating cavity calculator", style="yellow")

    topics = Text("Bogoliubov coefficients · squeezing · photon numbers · photon statistics", style="orange1")
    hint = Text("Run with --help for commands and options", style="blue")

    content = Group(
        Align.center(title),
        Align.center(topics),
        Align.center(hint),
    )

    panel = Panel(
        content,
        box=box.HEAVY,
        border_style="green",
        padding=(1, 2),
        title="[bold green]VibraCav[/]",
        subtitle=f"[bold green]v{__version__}[/]"
    )

    console.print("\n")
    console.print(panel)
    console.print("\n")


if __name__ == "__main__":
    display_banner()
