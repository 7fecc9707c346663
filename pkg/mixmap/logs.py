import logging
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional

import colorlog

LOG_COLORS = {
    'DEBUG': 'cyan',
    'INFO': 'green',
    'WARNING': 'yellow',
    'ERROR': 'red',
    'CRITICAL': 'red,bg_white',
}


def setup_logging(name: str = "mixmap", log_dir: Optional[str] = "logs",
                  level: Optional[str] = None) -> logging.Logger:
    """Configure the MixMap logger with color console and dated file output.

    Args:
        name: Prefix of the log file name.
        log_dir: Directory for the file handler; None disables file logging.
        level: Level name; falls back to MIXMAP_LOG, then INFO.

    Returns:
        The configured 'MixMap' logger.
    """
    level_name = (level or os.getenv('MIXMAP_LOG') or 'INFO').upper()
    numeric = logging.getLevelName(level_name)
    if not isinstance(numeric, int):
        numeric = logging.INFO

    logger = logging.getLogger('MixMap')
    logger.setLevel(numeric)
    # Repeated calls (tests, several CLI invocations) must not stack handlers
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    console_formatter = colorlog.ColoredFormatter(
        '%(log_color)s%(message)s%(reset)s',
        log_colors=LOG_COLORS
    )
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(console_formatter)
    logger.addHandler(console_handler)

    if log_dir:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(
            os.path.join(log_dir, f'{name}_{datetime.now().strftime("%Y%m%d")}.log')
        )
        file_handler.setFormatter(logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        ))
        logger.addHandler(file_handler)

    logger.propagate = False
    return logger
