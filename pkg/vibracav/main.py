import sys
import logging
from colorama import init
from rich.console import Console

from .config import load_config
from .banner import display_banner
from .help import display_help
from . import set_logging
from .commands import CommandRunner
from .errors import VibracavError
from .exporters import print_table, write_table

# Initialize colorama and logging
init(autoreset=True)
set_logging.setup_logging()
logger = logging.getLogger(__name__)
console = Console()


def main(argv=None, exit_fn=sys.exit):
    """Main entry point with injectable dependencies for testing."""
    if argv is None:
        argv = sys.argv

    display_banner()

    if len(argv) < 2 or (len(argv) == 2 and argv[1] in ['/?', '--help', '-h']):
        display_help()
        return 0

    try:
        try:
            request = load_config(argv[1:])
        except SystemExit as e:
            # argparse already printed the usage message
            code = e.code if isinstance(e.code, int) else 2
            exit_fn(code)
            return code

        runner = CommandRunner(console=console)
        result = runner.run(request)

        if request.out:
            target = write_table(result.frame, request.as_dict(), result.diagnostics,
                                 request.out, request.output_format)
            console.print(f"💾 Saved {len(result.frame)} rows to [blue]{target}[/blue].")
        else:
            print_table(result.frame, f"{request.command} (p={request.p}, gamma={request.gamma})",
                        console=console, diagnostics=result.diagnostics)

        if not result.passed:
            logger.error(f"{request.command} reported failures")
            console.print(f"[red]{request.command} failed: see the table for the failing points.[/red]")
            return 1
        return 0

    except KeyboardInterrupt:
        console.print("\n[yellow]Program terminated by user.[/yellow]")
        return 0
    except VibracavError as e:
        logger.exception("Computation failed")
        console.print(f"[red]Error: {str(e)}[/red]")
        for key, value in sorted(e.diagnostics.items()):
            console.print(f"  [yellow]{key}[/yellow]: {value}")
        return 1
    except Exception as e:
        logger.exception("An unexpected error occurred")
        console.print(f"[red]Error: {str(e)}[/red]")
        return 1


if __name__ == "__main__":
    exit_code = main()
    sys.exit(exit_code)
