import configparser
import io
import logging
import os
from typing import Any, Dict, Iterable, List, Optional

from pointformer.util.errors import ConfigError

LOG_LEVEL = logging.INFO
FORMAT = "%(levelname)-10s %(name)s %(message)s"
logging.basicConfig(format=FORMAT, level=LOG_LEVEL)

DEFAULTS_PATH = os.path.abspath(os.path.join(os.path.dirname(__file__), "../cfg/defaults.cfg"))
PRESETS_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), "../cfg/presets"))


class PointformerConfig:
    """
    PointformerConfig loads and manages experiment configuration from multiple files.
    The packaged defaults come first; the last explicit file has the highest precedence,
    and dotted `section.key=value` overrides beat every file.
    """

    def __init__(
        self,
        filenames: Any = None,
        overrides: Optional[Iterable[str]] = None,
        log_level: int = logging.WARNING,
    ) -> None:
        self.log = logging.getLogger(os.path.basename(__file__))
        self.log.setLevel(log_level)
        self.cfg = configparser.ConfigParser(interpolation=None)
        self.cfg_grid: Dict[str, Dict[str, Optional[str]]] = {}
        self.paths: List[str] = []

        # 1. Defaults file (lowest precedence)
        if os.path.exists(DEFAULTS_PATH):
            self.paths.append(DEFAULTS_PATH)

        # 2. Explicitly passed config file(s), in order
        if filenames:
            if isinstance(filenames, str):
                # Handle comma-separated paths
                filenames = [f.strip() for f in filenames.split(",") if f.strip()]
            for f in filenames:
                p = os.path.expanduser(f)
                if not os.path.exists(p):
                    raise FileNotFoundError(f"Config file not found: {f}")
                if p not in self.paths:
                    self.paths.append(p)

        try:
            self.cfg.read(self.paths)
        except configparser.Error as e:
            self.log.error(f"Unable to parse config file(s): {e}")
            raise

        # 3. Dotted overrides (highest precedence)
        for item in overrides or []:
            self._apply_override(item)

        self._refresh_grid()

    def _apply_override(self, item: str) -> None:
        key, sep, value = item.partition("=")
        section, dot, variable = key.strip().partition(".")
        if not sep or not dot or not variable:
            raise ConfigError("--override", f"expected section.key=value, got: {item}")
        self.set_variable(section, variable, value.strip())

    def _refresh_grid(self) -> None:
        self.cfg_grid = {}
        for section in self.cfg.sections():
            self.cfg_grid[section.upper()] = self._section_map(section)

    def _section_map(self, section: str) -> Dict[str, Optional[str]]:
        """Create a dict of options for a section."""
        valid: Dict[str, Optional[str]] = {}
        for option in self.cfg.options(section):
            try:
                valid[option] = self.cfg.get(section, option)
            except configparser.Error as e:
                self.log.warning(f"Exception on {option}: {e}")
                valid[option] = None
        return valid

    def set_variable(self, section: str, variable: str, value: str) -> None:
        """Set a variable, creating the section when needed."""
        if not self.cfg.has_section(section):
            self.cfg.add_section(section)
        self.cfg.set(section, variable, value)
        self._refresh_grid()

    def get_variable(self, section: str, variable: str, fallback: str = "") -> str:
        """
        Get a variable value from a section, with optional fallback.
        Section is case-insensitive.
        """
        try:
            value = self.cfg_grid[section.upper()][variable]
            return value.strip() if value else fallback
        except KeyError:
            return fallback

    def get_boolean_config(self, section: str, key: str, default: bool = False) -> bool:
        """
        Get a boolean configuration value from a section.

        Accepts various formats: YES/NO, TRUE/FALSE, 1/0, ON/OFF (case-insensitive)
        """
        value = self.get_variable(section, key, "").upper()
        if not value:
            return default
        return value in ("YES", "TRUE", "1", "ON")

    def get_int(self, section: str, key: str, fallback: int = 0) -> int:
        value = self.get_variable(section, key, "")
        if not value:
            return fallback
        try:
            return int(value)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}", f"expected an integer, got: {value}") from exc

    def get_float(self, section: str, key: str, fallback: float = 0.0) -> float:
        value = self.get_variable(section, key, "")
        if not value:
            return fallback
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}", f"expected a number, got: {value}") from exc

    def get_list(self, section: str, key: str, fallback: str = "") -> List[str]:
        """Comma-separated value as a list of stripped, non-empty strings."""
        value = self.get_variable(section, key, fallback)
        return [v.strip() for v in value.split(",") if v.strip()]

    def dump(self) -> str:
        """The fully resolved configuration as INI text, sections and keys sorted."""
        resolved = configparser.ConfigParser(interpolation=None)
        for section in sorted(self.cfg.sections()):
            resolved.add_section(section)
            for option in sorted(self.cfg.options(section)):
                resolved.set(section, option, self.cfg.get(section, option))
        buf = io.StringIO()
        resolved.write(buf)
        return buf.getvalue()


def preset_path(name: str) -> str:
    """Path of a packaged preset (`desk`, `overfit`, `cls`, `parts`, `ablate`)."""
    return os.path.join(PRESETS_DIR, f"{name}.cfg")
