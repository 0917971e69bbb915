import os
import argparse
import logging
from dataclasses import dataclass

import numpy as np
from dotenv import load_dotenv

from .errors import InputError

logger = logging.getLogger(__name__)

COMMANDS = ("coeffs", "variances", "pdf", "figure1", "figure2", "audit", "sweep")
FORMATS = ("csv", "json")

DEFAULT_TOL = "1e-12"
DEFAULT_FORMAT = "csv"
DEFAULT_MAX_M = "15"
DEFAULT_FIGURE1_KAPPA = "0:0.99:100"
DEFAULT_FIGURE2_TAU = 5.0
DEFAULT_TAU = 1.0


@dataclass(frozen=True)
class RangeSpec:
    start: float
    stop: float
    count: int

    def values(self):
        return np.linspace(self.start, self.stop, self.count)

    def __str__(self):
        return f"{self.start!r}:{self.stop!r}:{self.count}"


def parse_range(spec: str) -> RangeSpec:
    """Parse an inclusive ``a:b:n`` range."""
    parts = str(spec).split(":")
    if len(parts) != 3:
        raise InputError(f"range '{spec}' must have the form a:b:n")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InputError(f"range '{spec}' must contain two numbers and an integer count")
    if count < 1:
        raise InputError(f"range '{spec}' needs at least one point")
    if count > 1 and start == stop:
        raise InputError(f"range '{spec}' repeats a single value")
    if not (np.isfinite(start) and np.isfinite(stop)):
        raise InputError(f"range '{spec}' must be finite")
    return RangeSpec(start=start, stop=stop, count=count)


def parse_modes(spec: str) -> list[int]:
    try:
        modes = [int(item) for item in str(spec).split(",") if item.strip()]
    except ValueError:
        raise InputError(f"modes '{spec}' must be a comma separated list of integers")
    if not modes or any(m < 1 for m in modes):
        raise InputError(f"modes '{spec}' must be positive integers")
    return modes


@dataclass
class SweepRequest:
    command: str
    p: int = 2
    gamma: float = 0.0
    tau: float | None = None                # single slow time
    tau_grid: RangeSpec | None = None
    kappa_grid: RangeSpec | None = None
    modes: list[int] | None = None        # command default when omitted
    n_max: int | None = None
    tol: float = 1e-12
    output_format: str = "csv"
    out: str | None = None
    max_m: int = 15

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command '{self.command}', expected one of {', '.join(COMMANDS)}")
        if self.p < 1:
            raise InputError(f"--p must be a positive integer, got {self.p}")
        if self.output_format not in FORMATS:
            raise InputError(f"--format must be csv or json, got {self.output_format}")
        if not self.tol > 0:
            raise InputError(f"--tol must be positive, got {self.tol}")
        if self.max_m < 1:
            raise InputError(f"--max-m must be at least 1, got {self.max_m}")
        if self.n_max is not None and self.n_max < 0:
            raise InputError(f"--nmax must be non-negative, got {self.n_max}")
        if self.kappa_grid is not None and (self.tau_grid is not None or self.tau is not None):
            raise InputError("give either a tau grid or a kappa grid, not both")
        if self.tau is not None and self.tau_grid is not None:
            raise InputError("--tau and --tau-range are mutually exclusive")
        if self.tau is not None and self.tau < 0:
            raise InputError(f"--tau must be non-negative, got {self.tau}")
        if self.tau_grid is not None and min(self.tau_grid.start, self.tau_grid.stop) < 0:
            raise InputError(f"tau range {self.tau_grid} contains negative times")
        if self.kappa_grid is not None and not (0 <= self.kappa_grid.start < 1 and 0 <= self.kappa_grid.stop < 1):
            raise InputError(f"kappa range {self.kappa_grid} must lie in [0, 1)")

    def grid(self):
        """(axis, values) with axis 'tau' or 'kappa'."""
        if self.kappa_grid is not None:
            return "kappa", self.kappa_grid.values()
        if self.tau_grid is not None:
            return "tau", self.tau_grid.values()
        if self.tau is not None:
            return "tau", np.array([self.tau])
        if self.command == "figure1":
            return "kappa", parse_range(DEFAULT_FIGURE1_KAPPA).values()
        if self.command == "figure2":
            return "tau", np.array([DEFAULT_FIGURE2_TAU])
        return "tau", np.array([DEFAULT_TAU])

    def selected_modes(self, default):
        return list(self.modes) if self.modes else list(default)

    def as_dict(self):
        """Request echo used in output headers."""
        return {
            "command": self.command,
            "p": self.p,
            "gamma": self.gamma,
            "tau": self.tau,
            "tau_grid": str(self.tau_grid) if self.tau_grid else None,
            "kappa_grid": str(self.kappa_grid) if self.kappa_grid else None,
            "modes": ",".join(str(m) for m in self.modes) if self.modes else None,
            "n_max": self.n_max,
            "tol": self.tol,
            "format": self.output_format,
            "max_m": self.max_m,
        }

    def copy(self) -> 'SweepRequest':
        return SweepRequest(
            command=self.command, p=self.p, gamma=self.gamma, tau=self.tau,
            tau_grid=self.tau_grid, kappa_grid=self.kappa_grid,
            modes=list(self.modes) if self.modes else None,
            n_max=self.n_max, tol=self.tol, output_format=self.output_format,
            out=self.out, max_m=self.max_m,
        )


def setup_argument_parser():
    """Set up and return the argument parser."""
    parser = argparse.ArgumentParser(prog='vibracav',
                                     description='Resonantly vibrating cavity calculator')
    parser.add_argument('command', choices=COMMANDS, help='What to compute')
    parser.add_argument('--p', type=int, help='Resonance order: wall frequency ~ p * omega_1 (default: 2)')
    parser.add_argument('--gamma', type=float, help='Detuning ratio delta / epsilon (default: 0)')
    parser.add_argument('--tau', type=float, help='Single slow time')
    parser.add_argument('--tau-range', type=str, help='Slow-time grid a:b:n')
    parser.add_argument('--kappa-range', type=str, help='Grid of the universal variable a:b:n')
    parser.add_argument('--modes', type=str, help="Comma separated mode numbers (coefficient index m for sweep)")
    parser.add_argument('--nmax', type=int, help='Largest photon number in distributions')
    parser.add_argument('--tol', type=float, help='Truncation tolerance (default: VIBRACAV_TOL or 1e-12)')
    parser.add_argument('--format', type=str, choices=FORMATS, help='Output format (default: VIBRACAV_FORMAT or csv)')
    parser.add_argument('--out', type=str, help='Output file; the table is printed when omitted')
    parser.add_argument('--max-m', type=int, help='Coefficient table width (default: VIBRACAV_MAX_M or 15)')
    return parser


def _env(name, default, convert):
    raw = os.getenv(name, default)
    try:
        return convert(raw)
    except ValueError:
        raise InputError(f"environment variable {name}={raw!r} is not valid")


def get_base_config(args_dict):
    """Create base configuration from env vars and command line args."""
    config = {
        "tol": _env('VIBRACAV_TOL', DEFAULT_TOL, float),
        "format": _env('VIBRACAV_FORMAT', DEFAULT_FORMAT, str),
        "maxM": _env('VIBRACAV_MAX_M', DEFAULT_MAX_M, int),
        "p": 2,
        "gamma": 0.0,
    }

    # command line wins over the environment
    if args_dict.get('tol') is not None:
        config['tol'] = args_dict['tol']
    if args_dict.get('format') is not None:
        config['format'] = args_dict['format']
    if args_dict.get('max_m') is not None:
        config['maxM'] = args_dict['max_m']
    if args_dict.get('p') is not None:
        config['p'] = args_dict['p']
    if args_dict.get('gamma') is not None:
        config['gamma'] = args_dict['gamma']

    return config


def create_request(config, args_dict) -> SweepRequest:
    """Convert the merged settings into a SweepRequest."""
    tau_range = args_dict.get('tau_range')
    kappa_range = args_dict.get('kappa_range')
    modes = args_dict.get('modes')
    return SweepRequest(
        command=args_dict['command'],
        p=config['p'],
        gamma=config['gamma'],
        tau=args_dict.get('tau'),
        tau_grid=parse_range(tau_range) if tau_range is not None else None,
        kappa_grid=parse_range(kappa_range) if kappa_range is not None else None,
        modes=parse_modes(modes) if modes is not None else None,
        n_max=args_dict.get('nmax'),
        tol=config['tol'],
        output_format=config['format'],
        out=args_dict.get('out'),
        max_m=config['maxM'],
    )


def load_config(argv=None) -> SweepRequest:
    """
    Load the request from the .env file and command line arguments.
    Command line arguments override .env values.
    Raises InputError for malformed values.
    """
    load_dotenv()

    parser = setup_argument_parser()
    args, unknown = parser.parse_known_args(argv)
    if unknown:
        logger.warning(f"Ignoring unknown arguments: {unknown}")
    args_dict = {k: v for k, v in vars(args).items() if v is not None}

    config = get_base_config(args_dict)
    request = create_request(config, args_dict)
    logger.info(f"Request: {request.as_dict()}")
    return request
