import json
import logging
import os
from typing import Dict, Any

from dotenv import load_dotenv

logger = logging.getLogger('MixMap.Config')

# Repo root is the parent of the mixmap package
REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

load_dotenv(os.path.join(REPO_ROOT, '.env'))

DEFAULTS: Dict[str, Any] = {
    "lambda": 14,
    "r": 1,
    "n_max": 12,
    "max_level": 200,
    "N": 4,
    "seed": 7,
    "bins": 100,
    "ledger_path": os.path.join(REPO_ROOT, 'runs.db'),
    "log_dir": os.path.join(REPO_ROOT, 'logs'),
    "output_dir": os.path.join(REPO_ROOT, 'output'),
    "log_level": "INFO",
}


def load_config(path: str = None) -> Dict[str, Any]:
    """Return DEFAULTS merged with mixmap.json and environment overrides.

    Args:
        path: Optional explicit path to a JSON override file.

    Returns:
        A fresh configuration dict.
    """
    config = dict(DEFAULTS)
    if path is None:
        path = os.path.join(REPO_ROOT, 'mixmap.json')
    if os.path.exists(path):
        try:
            with open(path) as f:
                overrides = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Failed to read config overrides from {path}: {str(e)}")
            raise
        unknown = set(overrides) - set(DEFAULTS)
        if unknown:
            logger.warning(f"Ignoring unknown config keys: {sorted(unknown)}")
        config.update({k: v for k, v in overrides.items() if k in DEFAULTS})

    level = os.getenv('MIXMAP_LOG')
    if level:
        config["log_level"] = level.upper()
    ledger = os.getenv('MIXMAP_LEDGER')
    if ledger:
        config["ledger_path"] = None if ledger.lower() == 'none' else ledger
    return config
