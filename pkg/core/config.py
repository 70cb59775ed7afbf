"""
Configuration Management for HessCraft
Handles oracle size caps, finite-difference steps, benchmark defaults, etc.
"""

import os
import json
import sys
from pathlib import Path
from typing import Any, Callable, Optional


def _warn(message: str):
    print(f"[WARNING] {message}", file=sys.stderr)


class EngineConfig:
    """
    Manages engine configuration with multiple priority levels:
    1. Environment variables (highest priority)
    2. User settings file
    3. Default values (lowest priority)

    Usage:
        config = EngineConfig()
        cap = config.get_dense_cap()

        # Or persist a custom value
        config.set_dense_cap(400)
    """

    DEFAULT_CONFIG_FILE = "hesscraft_config.json"

    # Default settings
    DEFAULTS = {
        "dense_cap": 200,
        "path_enum_cap": 25,
        "fd_step": 1e-5,
        "fd_threshold": 1e-7,
        "fd_levels": 3,
        "drop_tol": 0.0,
        "bench_repeats": 5,
        "lcg_seed": 20120815,
        "check_trials": 1000,
        "check_max_n": 8,
        "check_max_ell": 40,
        "debug_checks": False,
    }

    # Settings that an environment variable may override
    ENV_OVERRIDES = {
        "dense_cap": "HESSCRAFT_DENSE_CAP",
        "path_enum_cap": "HESSCRAFT_PATH_ENUM_CAP",
        "debug_checks": "HESSCRAFT_DEBUG_CHECKS",
    }

    def __init__(self, config_file: Optional[Path] = None):
        """
        Initialize config manager.

        Args:
            config_file: JSON settings file (None = HESSCRAFT_CONFIG_FILE or ./hesscraft_config.json)
        """
        if config_file is None:
            config_file = Path(os.getenv("HESSCRAFT_CONFIG_FILE", self.DEFAULT_CONFIG_FILE))
        self.config_file = Path(config_file)
        self._config = self._load_config()

    def _load_config(self) -> dict:
        """Load configuration from file or create defaults."""
        if self.config_file.exists():
            try:
                with open(self.config_file, "r", encoding="utf-8") as f:
                    config = json.load(f)
                    # Merge with defaults (in case new settings were added)
                    return {**self.DEFAULTS, **config}
            except Exception as e:
                _warn(f"Failed to load config: {e}, using defaults")

        return self.DEFAULTS.copy()

    def _save_config(self) -> bool:
        """Save configuration to file."""
        try:
            with open(self.config_file, "w", encoding="utf-8") as f:
                json.dump(self._config, f, indent=4)
            return True
        except Exception as e:
            _warn(f"Failed to save config: {e}")
            return False

    def _get(self, key: str, convert: Callable[[Any], Any], valid: Callable[[Any], bool] = lambda v: True):
        """
        Resolve a setting: environment variable, then config file, then default.

        Values that fail conversion or validation fall back to the default.
        """
        default = self.DEFAULTS[key]
        env_name = self.ENV_OVERRIDES.get(key)
        raw = os.getenv(env_name) if env_name else None
        source = env_name
        if raw is None:
            raw = self._config.get(key, default)
            source = str(self.config_file)
        try:
            value = convert(raw)
        except (TypeError, ValueError):
            _warn(f"Invalid {key}={raw!r} from {source}, using default {default!r}")
            return default
        if not valid(value):
            _warn(f"Out-of-range {key}={raw!r} from {source}, using default {default!r}")
            return default
        return value

    def _set(self, key: str, value: Any) -> bool:
        self._config[key] = value
        return self._save_config()

    def get_dense_cap(self) -> int:
        """Largest n + l the dense nested oracle accepts (env HESSCRAFT_DENSE_CAP)."""
        return self._get("dense_cap", int, lambda v: v > 0)

    def set_dense_cap(self, cap: int) -> bool:
        return self._set("dense_cap", int(cap))

    def get_path_enum_cap(self) -> int:
        """Largest n + l the path-enumeration oracle accepts."""
        return self._get("path_enum_cap", int, lambda v: v > 0)

    def set_path_enum_cap(self, cap: int) -> bool:
        return self._set("path_enum_cap", int(cap))

    def get_fd_step(self) -> float:
        return self._get("fd_step", float, lambda v: v > 0)

    def get_fd_threshold(self) -> float:
        return self._get("fd_threshold", float, lambda v: v >= 0)

    def get_fd_levels(self) -> int:
        """Step halvings in the extrapolated finite differences."""
        return self._get("fd_levels", int, lambda v: 1 <= v <= 8)

    def get_drop_tol(self) -> float:
        return self._get("drop_tol", float, lambda v: v >= 0)

    def set_drop_tol(self, tol: float) -> bool:
        return self._set("drop_tol", float(tol))

    def get_bench_repeats(self) -> int:
        return self._get("bench_repeats", int, lambda v: v > 0)

    def set_bench_repeats(self, repeats: int) -> bool:
        return self._set("bench_repeats", int(repeats))

    def get_lcg_seed(self) -> int:
        """Published seed of the irregular benchmark family."""
        return self._get("lcg_seed", int, lambda v: v >= 0)

    def get_check_trials(self) -> int:
        return self._get("check_trials", int, lambda v: v > 0)

    def get_check_max_n(self) -> int:
        return self._get("check_max_n", int, lambda v: v > 0)

    def get_check_max_ell(self) -> int:
        return self._get("check_max_ell", int, lambda v: v > 0)

    def get_debug_checks(self) -> bool:
        """Per-node invariant assertions inside edge_pushing (env HESSCRAFT_DEBUG_CHECKS)."""
        return self._get("debug_checks", _as_bool)

    def set_debug_checks(self, enabled: bool) -> bool:
        return self._set("debug_checks", bool(enabled))

    def get_all(self) -> dict:
        """Get all effective settings (environment overrides applied)."""
        return {
            "dense_cap": self.get_dense_cap(),
            "path_enum_cap": self.get_path_enum_cap(),
            "fd_step": self.get_fd_step(),
            "fd_threshold": self.get_fd_threshold(),
            "fd_levels": self.get_fd_levels(),
            "drop_tol": self.get_drop_tol(),
            "bench_repeats": self.get_bench_repeats(),
            "lcg_seed": self.get_lcg_seed(),
            "check_trials": self.get_check_trials(),
            "check_max_n": self.get_check_max_n(),
            "check_max_ell": self.get_check_max_ell(),
            "debug_checks": self.get_debug_checks(),
        }

    def reset_to_defaults(self) -> bool:
        """Reset all settings to defaults."""
        self._config = self.DEFAULTS.copy()
        return self._save_config()

    def print_config(self, stream=None):
        """Print current configuration."""
        stream = stream or sys.stdout
        print("=== HessCraft Configuration ===", file=stream)
        for key, value in self.get_all().items():
            print(f"{key}: {value}", file=stream)

        # Show environment overrides
        for key, env_name in self.ENV_OVERRIDES.items():
            if os.getenv(env_name) is not None:
                print(f"[INFO] {key} overridden by environment variable {env_name}", file=stream)

        print(f"Config file: {self.config_file.absolute()}", file=stream)


def _as_bool(raw: Any) -> bool:
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(raw)


# Global config instance (singleton pattern)
_global_config: Optional[EngineConfig] = None


def get_config() -> EngineConfig:
    """
    Get global configuration instance.

    Usage:
        from core.config import get_config
        config = get_config()
        cap = config.get_dense_cap()
    """
    global _global_config
    if _global_config is None:
        _global_config = EngineConfig()
    return _global_config


def reset_config() -> None:
    """Drop the global instance so the next get_config() re-reads file and environment."""
    global _global_config
    _global_config = None
