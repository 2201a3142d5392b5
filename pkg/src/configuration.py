"""
Configuration Manager for trace-posets

This module provides configuration loading from environment variables with
sensible defaults. CLI flags override the loaded values.
"""

import os
from dataclasses import dataclass

from src.models import SearchBudget, SYMMETRY_MODES

_TRUE_VALUES = ('1', 'true', 'yes', 'on')


def _int_var(name: str, default: str, minimum: int) -> int:
    raw = os.environ.get(name, default)
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}")
    if value < minimum:
        raise ValueError(f"{name} must be at least {minimum}, got {value}")
    return value


def _float_var(name: str, default: str) -> float:
    raw = os.environ.get(name, default)
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{name} must be a number, got {raw!r}")
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


@dataclass
class Configuration:
    """
    Configuration for trace-posets runs.

    Attributes:
        catalog_path: Default catalog file (default: "catalog.json")
        workers: Worker processes for branch-and-bound (default: 1)
        time_limit: Seconds per solve (default: 600.0)
        node_limit: Node budget per solve (default: 50000000)
        symmetry: Isomorph rejection mode, one of exact/heuristic/off (default: "exact")
        seed: Seed for randomized checks and re-verification orderings (default: 0)
        log_level: Logger level name (default: "INFO")
        debug_sweep: Cross-check reduced trace sweeps against the naive sweep (default: False)
        lock_retries: Attempts to acquire the catalog writer lock (default: 5)
        lock_base_delay: Base delay in seconds for the lock backoff (default: 0.05)
    """
    catalog_path: str
    workers: int
    time_limit: float
    node_limit: int
    symmetry: str
    seed: int
    log_level: str
    debug_sweep: bool
    lock_retries: int
    lock_base_delay: float

    @staticmethod
    def load() -> 'Configuration':
        """
        Load configuration from environment variables with defaults.

        Environment Variables:
            TRACEPOSET_CATALOG: Catalog path (default: "catalog.json")
            TRACEPOSET_WORKERS: Worker count (default: "1")
            TRACEPOSET_TIME_LIMIT: Seconds per solve (default: "600")
            TRACEPOSET_NODE_LIMIT: Node budget (default: "50000000")
            TRACEPOSET_SYMMETRY: exact | heuristic | off (default: "exact")
            TRACEPOSET_SEED: Random seed (default: "0")
            TRACEPOSET_LOG_LEVEL: Log level (default: "INFO")
            TRACEPOSET_DEBUG_SWEEP: Enable the naive sweep cross-check (default: "false")
            TRACEPOSET_LOCK_RETRIES: Lock attempts (default: "5")
            TRACEPOSET_LOCK_BASE_DELAY: Lock backoff base delay in seconds (default: "0.05")

        Returns:
            Configuration instance with loaded values

        Raises:
            ValueError: If a variable is malformed or out of range
        """
        catalog_path = os.environ.get('TRACEPOSET_CATALOG', 'catalog.json')
        workers = _int_var('TRACEPOSET_WORKERS', '1', 1)
        time_limit = _float_var('TRACEPOSET_TIME_LIMIT', '600')
        node_limit = _int_var('TRACEPOSET_NODE_LIMIT', '50000000', 1)
        symmetry = os.environ.get('TRACEPOSET_SYMMETRY', 'exact').lower()
        seed = _int_var('TRACEPOSET_SEED', '0', 0)
        log_level = os.environ.get('TRACEPOSET_LOG_LEVEL', 'INFO').upper()
        debug_sweep = os.environ.get('TRACEPOSET_DEBUG_SWEEP', 'false').lower() in _TRUE_VALUES
        lock_retries = _int_var('TRACEPOSET_LOCK_RETRIES', '5', 1)
        lock_base_delay = _float_var('TRACEPOSET_LOCK_BASE_DELAY', '0.05')

        if not catalog_path:
            raise ValueError("TRACEPOSET_CATALOG must not be empty")
        if symmetry not in SYMMETRY_MODES:
            raise ValueError(
                f"TRACEPOSET_SYMMETRY must be one of {', '.join(SYMMETRY_MODES)}, got {symmetry!r}"
            )

        return Configuration(
            catalog_path=catalog_path,
            workers=workers,
            time_limit=time_limit,
            node_limit=node_limit,
            symmetry=symmetry,
            seed=seed,
            log_level=log_level,
            debug_sweep=debug_sweep,
            lock_retries=lock_retries,
            lock_base_delay=lock_base_delay
        )

    def budget(self) -> SearchBudget:
        """Build the SearchBudget described by this configuration."""
        return SearchBudget(
            time_limit=self.time_limit,
            node_limit=self.node_limit,
            workers=self.workers,
            symmetry=self.symmetry
        )


def debug_sweep_enabled() -> bool:
    """Whether the naive all-l trace sweep cross-check is switched on."""
    return os.environ.get('TRACEPOSET_DEBUG_SWEEP', 'false').lower() in _TRUE_VALUES
