"""
config.py

Manages analysis configuration by merging defaults with values loaded from
environment variables (.env) and a config.ini file, while enforcing validation.
"""
import os
import configparser
from dotenv import load_dotenv
from dataclasses import dataclass, field
from typing import Any, Dict, Union
import logging

from .errors import InputError
from .partition import ENUMERATION_LIMIT

logger = logging.getLogger("independence_patterns")


@dataclass(frozen=True)
class ConfigDefaults:
    """
    Default configuration values by section.
    """
    defaults: Dict[str, Dict[str, Any]] = field(default_factory=lambda: {
        "System": {
            "Workers": "0",
            "DebugMode": "False",
        },
        "Exact": {
            "MaxDimension": str(ENUMERATION_LIMIT),
        },
        "Sampler": {
            "InitialDraws": "10000",
            "Chains": "4",
            "Steps": "100000",
            "LadderSize": "7",
            "MaxTemperature": "32",
            "Alpha1": "0.5",
            "Alpha2": "0.4",
            "BurnInFraction": "0.5",
            "ShcMode": "as-paper",
            "RandomScan": "False",
            "CacheCapacity": "0",
            "MaxCandidates": "1000000",
            "AuditRate": "0.0",
            "Seed": "0",
        },
        "Models": {
            "KnownMean": "False",
            "DirichletConcentration": "1.0",
            "DirichletRule": "per-cell",
        },
        "Simulation": {
            "Replicates": "50",
            "Samples": "300",
            "Dimension": "6",
        },
        "Output": {
            "OutDir": "results",
            "Format": "csv",
            "Top": "10",
        },
        "Logging": {
            "LogFile": "logs/independence_patterns.log",
            "Level": "INFO",
        },
    })


# environment variable -> (section, key); applied in memory only
ENV_OVERRIDES = {
    "INDEP_SEED": ("Sampler", "Seed"),
    "INDEP_WORKERS": ("System", "Workers"),
    "INDEP_OUT_DIR": ("Output", "OutDir"),
    "INDEP_LOG_FILE": ("Logging", "LogFile"),
}


class Config:
    """
    Loads configuration from defaults, a .env file, and a config.ini file;
    provides typed getters with validation and explicit persistence.
    """
    def __init__(self, config_file: str = "config.ini") -> None:
        load_dotenv()
        self.config_file = config_file

        self.parser = configparser.ConfigParser()
        for section, entries in ConfigDefaults().defaults.items():
            self.parser[section] = entries.copy()

        if os.path.exists(self.config_file):
            self.parser.read(self.config_file)
            logger.debug(f"Configuration overlay read from {self.config_file}")

        for env_var, (section, key) in ENV_OVERRIDES.items():
            val = os.getenv(env_var)
            if val is not None:
                self.set(section, key, val)

        self._validate_ranges()

    def _validate_ranges(self) -> None:
        """
        Ensure numeric configuration values meet expected constraints.
        """
        if self.getint("System", "Workers") < 0:
            raise InputError("System.Workers must be >= 0 (0 = available cores)")
        if not 1 <= self.getint("Exact", "MaxDimension") <= ENUMERATION_LIMIT:
            raise InputError(f"Exact.MaxDimension must be in 1..{ENUMERATION_LIMIT}")
        if self.getint("Sampler", "Chains") < 1:
            raise InputError("Sampler.Chains must be >= 1")
        if self.getint("Sampler", "InitialDraws") < self.getint("Sampler", "Chains"):
            raise InputError("Sampler.InitialDraws must be >= Sampler.Chains")
        if self.getint("Sampler", "Steps") < 2:
            raise InputError("Sampler.Steps must be >= 2")
        if self.getint("Sampler", "LadderSize") < 1:
            raise InputError("Sampler.LadderSize must be >= 1")
        if self.getfloat("Sampler", "MaxTemperature") <= 1:
            raise InputError("Sampler.MaxTemperature must be > 1")
        alpha1 = self.getfloat("Sampler", "Alpha1")
        if not 0 <= alpha1 < 1:
            raise InputError("Sampler.Alpha1 must be in [0, 1)")
        if not 0 <= self.getfloat("Sampler", "Alpha2") <= 1 - alpha1:
            raise InputError("Sampler.Alpha2 must be in [0, 1 - Alpha1]")
        if not 0 < self.getfloat("Sampler", "BurnInFraction") < 1:
            raise InputError("Sampler.BurnInFraction must be in (0, 1)")
        if self.get("Sampler", "ShcMode").strip().lower() not in ("as-paper", "metropolized", "softmax"):
            raise InputError("Sampler.ShcMode must be 'as-paper' or 'metropolized'")
        if self.getint("Sampler", "CacheCapacity") < 0:
            raise InputError("Sampler.CacheCapacity must be >= 0 (0 = unbounded)")
        if self.getint("Sampler", "MaxCandidates") < 1:
            raise InputError("Sampler.MaxCandidates must be >= 1")
        if not 0 <= self.getfloat("Sampler", "AuditRate") <= 1:
            raise InputError("Sampler.AuditRate must be in [0, 1]")
        if self.getfloat("Models", "DirichletConcentration") <= 0:
            raise InputError("Models.DirichletConcentration must be > 0")
        if self.get("Models", "DirichletRule") not in ("per-cell", "total"):
            raise InputError("Models.DirichletRule must be 'per-cell' or 'total'")
        if self.getint("Simulation", "Replicates") < 1:
            raise InputError("Simulation.Replicates must be >= 1")
        if self.getint("Simulation", "Samples") < 1:
            raise InputError("Simulation.Samples must be >= 1")
        if self.get("Output", "Format") not in ("csv", "json"):
            raise InputError("Output.Format must be 'csv' or 'json'")
        if self.getint("Output", "Top") < 1:
            raise InputError("Output.Top must be >= 1")

    def get(self, section: str, key: str) -> str:
        """Return the raw string value for a configuration key."""
        try:
            return self.parser.get(section, key)
        except (configparser.NoSectionError, configparser.NoOptionError) as e:
            raise KeyError(f"Missing config {section}.{key}: {e}")

    def getint(self, section: str, key: str) -> int:
        val = self.get(section, key)
        try:
            return int(val)
        except ValueError:
            raise ValueError(f"Invalid integer for {section}.{key}: '{val}'")

    def getfloat(self, section: str, key: str) -> float:
        val = self.get(section, key)
        try:
            return float(val)
        except ValueError:
            raise ValueError(f"Invalid float for {section}.{key}: '{val}'")

    def getboolean(self, section: str, key: str) -> bool:
        val = self.get(section, key).lower()
        if val in ("true", "1", "yes", "on"):
            return True
        if val in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"Invalid boolean for {section}.{key}: '{val}'")

    def workers(self) -> int:
        """System.Workers with 0 resolved to the number of available cores."""
        n = self.getint("System", "Workers")
        return n if n > 0 else (os.cpu_count() or 1)

    def set(self, section: str, key: str, value: Union[str, int, float, bool]) -> None:
        """Set a configuration key in memory; call save() to persist."""
        if not self.parser.has_section(section):
            self.parser.add_section(section)
        self.parser.set(section, key, str(value))

    def as_dict(self) -> Dict[str, Dict[str, str]]:
        return {section: dict(self.parser[section]) for section in self.parser.sections()}

    def save(self) -> None:
        """Write the current configuration to the config_file."""
        try:
            with open(self.config_file, 'w') as f:
                self.parser.write(f)
        except OSError as e:
            raise InputError(f"Failed to save config to {self.config_file}: {e}")
        logger.info(f"Configuration written to {self.config_file}")
