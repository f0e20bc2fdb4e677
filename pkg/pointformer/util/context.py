"""Invoke context with colored command output, artifact writing and error-to-exit mapping."""

import csv
import json
import logging
import os
import sys
from functools import wraps
from typing import Any, Callable, Iterable, List, Optional, Sequence

from colorama import Fore, Style
from invoke import Context
from invoke.exceptions import Exit

from pointformer.util.errors import ConfigError, PointformerError

logger = logging.getLogger("pointformer-commands")
logger.setLevel(logging.INFO)

handler = logging.StreamHandler(sys.stdout)
handler.setFormatter(logging.Formatter("%(message)s"))
logger.handlers = [handler]
logger.propagate = False

EXIT_FAILURE = 1
EXIT_USAGE = 2


class RunContext(Context):
    """
    Invoke Context used by every pointformer command.

    Prints section headers and status markers, writes CSV/JSON/text artifacts into the
    command's output directory and turns library errors into exit codes.
    """

    out_dir: str = "."

    @property
    def verbose(self) -> bool:
        """Check if verbose output is enabled via environment variable or config."""
        if os.environ.get("POINTFORMER_VERBOSE", "").lower() in ("1", "true", "yes"):
            return True
        return bool(getattr(self.config, "pointformer_verbose", False))

    def section(self, title: str) -> None:
        logger.info(f"\n{Fore.CYAN}### {title}\n-----------{Style.RESET_ALL}")

    def note(self, message: str) -> None:
        logger.info(message)

    def warn(self, message: str) -> None:
        logger.info(f"{Fore.YELLOW}⚠ {message}{Style.RESET_ALL}")

    def status(self, ok: bool, message: str = "") -> None:
        if ok:
            logger.info(f"{Fore.GREEN}✅ SUCCESS{Style.RESET_ALL} {message}".rstrip())
        else:
            logger.info(f"{Fore.RED}❌ FAILED{Style.RESET_ALL} {message}".rstrip())

    def use_out_dir(self, path: str) -> str:
        """Create (if needed) and remember the output directory."""
        path = os.path.abspath(os.path.expanduser(path))
        try:
            os.makedirs(path, exist_ok=True)
        except OSError as e:
            raise Exit(f"Output directory not writable: {path} ({e})", code=EXIT_USAGE)
        self.out_dir = path
        return path

    def artifact(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write_text(self, name: str, text: str) -> str:
        path = self.artifact(name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        logger.info(f"{Fore.BLUE}→ {path}{Style.RESET_ALL}")
        return path

    def write_json(self, name: str, payload: Any) -> str:
        return self.write_text(name, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        path = self.artifact(name)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow(row)
        logger.info(f"{Fore.BLUE}→ {path}{Style.RESET_ALL}")
        return path

    def table(self, header: Sequence[str], rows: List[Sequence[Any]]) -> None:
        """Print a plain aligned table to the command logger."""
        cells = [[str(h) for h in header]] + [[_cell(v) for v in row] for row in rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
        for n, row in enumerate(cells):
            logger.info("  ".join(v.rjust(w) for v, w in zip(row, widths)))
            if n == 0:
                logger.info("  ".join("-" * w for w in widths))

    @staticmethod
    def wrap_context(func: Callable):
        """Decorator to run invoke tasks with a RunContext and map errors to exit codes."""

        @wraps(func)
        def wrapper(c: Context, *args, **kwargs):
            ctx = RunContext(config=c.config)
            if ctx.verbose:
                logging.getLogger("pointformer").setLevel(logging.DEBUG)
            try:
                return func(ctx, *args, **kwargs)
            except (ConfigError, FileNotFoundError) as e:
                raise Exit(f"{Fore.RED}✗{Style.RESET_ALL} {e}", code=EXIT_USAGE)
            except PointformerError as e:
                message = f"{Fore.RED}✗{Style.RESET_ALL} {type(e).__name__}: {e}"
                raise Exit(message, code=EXIT_FAILURE)

        return wrapper


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if value is None:
        return ""
    return str(value)


def parse_seed(seed: str) -> Optional[int]:
    """CLI seed strings: empty means 'use the config value'."""
    if seed in ("", None):
        return None
    try:
        return int(seed)
    except ValueError as exc:
        raise ConfigError("run.seed", f"must be an integer, got: {seed}") from exc
