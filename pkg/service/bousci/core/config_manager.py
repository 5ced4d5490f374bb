"""
Configuration Manager - Handles loading and validation of run configurations.
"""

import copy
import hashlib
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic import ValidationError

from bousci.core.errors import ConfigurationError
from bousci.core.params import ParamSchedule, ProblemData, build_schedule


logger = logging.getLogger(__name__)


DEFAULT_CONFIG: Dict[str, Any] = {
    'problem': {
        'beta': 0.2,
        'b': 1.05,
        'a': 3.0,
        'alpha': 0.02,
        'T': 0.2,
        'q_max': 1,
        'frequencies': None,
        'e': {'constant': 1.0, 'cos_amplitudes': [0.05]},
        'theta0': {'sine_amplitudes': [0.5]},
    },
    'grid': {'n': 64, 'dealias_fraction': 2.0 / 3.0},
    'time': {'samples_per_tau': 12},
    'mikado': {
        'k_max': 16,
        'grid_n': 64,
        'radius': 0.2,
        'bump_order': 6,
        'placement_trials': 4096,
        'seed': 7,
    },
    'solver': {
        'dt_cfl_factor': 0.5,
        'dealias': True,
        'max_dt': None,
        'blowup_factor': 10.0,
        'max_substeps': 200000,
    },
    'scheme': {
        'stripe_shift': 0.125,
        'sobolev_s': 0.6,
        'residual_ratio_tol': 1e-3,
        'max_workers': 1,
        'potential': 'continuum',
    },
    'io': {'out_dir': 'runs/default'},
    'logging': {'level': 'INFO', 'file': None},
}


class ConfigManager:
    """
    Manages configuration loading, validation, and access.
    """

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        self.config = config if config is not None else self._load_default_config()
        self._validate_config()
        logger.info("ConfigManager initialized")

    @staticmethod
    def from_file(config_path: str) -> 'ConfigManager':
        """
        Load configuration from YAML file.

        A missing file falls back to the defaults; a malformed one is fatal.

        Args:
            config_path: Path to YAML config file

        Returns:
            ConfigManager instance
        """
        try:
            with open(config_path, 'r') as f:
                config = yaml.safe_load(f) or {}
        except FileNotFoundError:
            logger.warning(f"Config file not found: {config_path}, using default configuration")
            return ConfigManager()
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Malformed config {config_path}: {e}") from e
        if not isinstance(config, dict):
            raise ConfigurationError(f"Config {config_path} must be a mapping")
        logger.info(f"Configuration loaded from: {config_path}")
        return ConfigManager(config)

    def _load_default_config(self) -> Dict[str, Any]:
        """Load default configuration."""
        return copy.deepcopy(DEFAULT_CONFIG)

    def _validate_config(self) -> None:
        """Back-fill missing sections and keys from the defaults."""
        for section, defaults in DEFAULT_CONFIG.items():
            if section not in self.config:
                logger.warning(f"Missing config section: {section}, using defaults")
                self.config[section] = copy.deepcopy(defaults)
                continue
            for key, value in defaults.items():
                if key not in self.config[section]:
                    self.config[section][key] = copy.deepcopy(value)

        n = self.get('grid.n')
        if not isinstance(n, int) or n < 8 or n & (n - 1):
            raise ConfigurationError(f"grid.n={n} must be a power of two", "n >= 8, n = 2^j")
        frac = float(self.get('grid.dealias_fraction'))
        if not 0.0 < frac <= 1.0:
            raise ConfigurationError(f"grid.dealias_fraction={frac}", "0 < fraction <= 1")
        if int(self.get('time.samples_per_tau')) < 4:
            raise ConfigurationError("time.samples_per_tau too small", "samples_per_tau >= 4")

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get configuration value by dot-notation key.

        Args:
            key: Configuration key (e.g., 'problem.beta')
            default: Default value if key not found

        Returns:
            Configuration value
        """
        value: Any = self.config
        for k in key.split('.'):
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default
        return value

    def set(self, key: str, value: Any) -> None:
        """
        Set configuration value by dot-notation key.

        Args:
            key: Configuration key (e.g., 'grid.n')
            value: Value to set
        """
        keys = key.split('.')
        config = self.config
        for k in keys[:-1]:
            config = config.setdefault(k, {})
        config[keys[-1]] = value

    def problem_data(self) -> ProblemData:
        """Typed view of the ``problem`` section."""
        p = self.config['problem']
        try:
            return ProblemData(
                beta=p['beta'],
                b=p['b'],
                a=p['a'],
                alpha=p['alpha'],
                T=p['T'],
                e_constant=p.get('e', {}).get('constant', 1.0),
                e_cos_amplitudes=p.get('e', {}).get('cos_amplitudes') or [],
                theta0_sine_amplitudes=p.get('theta0', {}).get('sine_amplitudes') or [],
            )
        except (KeyError, ValidationError) as e:
            raise ConfigurationError(f"Invalid problem section: {e}") from e

    def schedule(self) -> ParamSchedule:
        """Parameter schedule for q = 0..problem.q_max."""
        frequencies = self.get("problem.frequencies")
        return build_schedule(self.problem_data(), int(self.get("problem.q_max")), frequencies)

    def section(self, name: str) -> Dict[str, Any]:
        """Get a whole section as a dictionary."""
        return dict(self.config.get(name, {}))

    def content_hash(self) -> str:
        """SHA-256 of the canonical YAML dump; recorded in run manifests."""
        text = yaml.safe_dump(self.config, sort_keys=True)
        return hashlib.sha256(text.encode('utf-8')).hexdigest()

    def save_to_file(self, output_path: str) -> bool:
        """
        Save current configuration to YAML file.

        Args:
            output_path: Path to save config file

        Returns:
            True if successful
        """
        try:
            Path(output_path).parent.mkdir(parents=True, exist_ok=True)
            with open(output_path, 'w') as f:
                yaml.dump(self.config, f, default_flow_style=False, sort_keys=False)
            logger.info(f"Configuration saved to: {output_path}")
            return True
        except OSError as e:
            logger.error(f"Error saving config: {e}")
            return False

    def to_dict(self) -> Dict[str, Any]:
        """Get full configuration as dictionary."""
        return copy.deepcopy(self.config)
