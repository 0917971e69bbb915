"""Byte-stable CSV/JSON export of result tables and console rendering."""

import json
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from . import __version__
from .errors import InputError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
MAX_CONSOLE_ROWS = 200


def _native(value):
    """JSON-ready copy; non-finite floats become null."""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, complex):
        return {"re": _native(value.real), "im": _native(value.imag)}
    if isinstance(value, (list, tuple)):
        return [_native(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _native(v) for k, v in value.items()}
    return value


def render_csv(frame: pd.DataFrame, request: dict) -> str:
    header = [f"# {key}: {request[key]}" for key in sorted(request)]
    header.append(f"# version: {__version__}")
    body = frame.to_csv(float_format=FLOAT_FORMAT, index=False, lineterminator="\n")
    return "\n".join(header) + "\n" + body


def render_json(frame: pd.DataFrame, request: dict, diagnostics: dict) -> str:
    payload = {
        "request": _native({**request, "version": __version__}),
        "rows": _native(frame.to_dict(orient="records")),
        "diagnostics": _native(diagnostics),
    }
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_table(frame, request, diagnostics, path, fmt):
    """Write ``frame`` with the request echo to ``path`` in ``fmt`` (csv or json)."""
    if fmt == "csv":
        text = render_csv(frame, request)
    elif fmt == "json":
        text = render_json(frame, request, diagnostics)
    else:
        raise InputError(f"unsupported output format '{fmt}'")
    target = Path(path)
    try:
        target.write_text(text, encoding="utf-8", newline="\n")
    except OSError as e:
        raise InputError(f"cannot write {target}: {e.strerror or e}", {"path": str(target)})
    logger.info(f"Wrote {len(frame)} rows to {target}")
    return target


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return f"{value:.10g}"
    return str(value)


def print_table(frame, title, console=None, diagnostics=None):
    """Render a result frame as a rich table."""
    console = console or Console()
    table = Table(title=title, title_style="bold blue", header_style="bold cyan")
    for name in frame.columns:
        table.add_column(str(name), justify="right", style="green")
    for row in frame.head(MAX_CONSOLE_ROWS).itertuples(index=False):
        table.add_row(*(_cell(v) for v in row))
    console.print(table)
    if len(frame) > MAX_CONSOLE_ROWS:
        console.print(f"[yellow]... {len(frame) - MAX_CONSOLE_ROWS} more rows, use --out to save all[/yellow]")
    for key, value in sorted((diagnostics or {}).items()):
        console.print(f"[cyan]{key}[/cyan]: {_native(value)}")
