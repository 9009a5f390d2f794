"""
This module configures logging for the simulator scripts. Every run logs to a file in the logs directory and to the console.

Functions:
- get_logs_dir: Return the directory log files are written to, creating it if needed.
- setup_logger: Set up a logger that writes to both a log file and the console.
- finalize_logger: Log the end of the run and close all handlers.
"""

import logging
import os
from datetime import datetime

from dotenv import load_dotenv

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"

load_dotenv()


def get_logs_dir():
    """Return the log directory (ONN_LOG_DIR if set, else 'logs' at the project root), creating it if needed."""
    logs_dir = os.getenv("ONN_LOG_DIR") or os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "..", "logs"
    )
    os.makedirs(logs_dir, exist_ok=True)
    return logs_dir


def setup_logger(name, log_file, log_level="INFO"):
    """
    Set up a logger that logs to both a file and the console.

    Args:
        name (str): The name of the logger.
        log_file (str): The name of the log file, saved in the logs directory.
        log_level (str): The console log level ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL').

    Returns:
        logging.Logger: Configured logger instance.
    """
    log_file_path = os.path.join(get_logs_dir(), log_file)

    logger = logging.getLogger(name)

    # A logger is only configured once per name
    if not logger.handlers:
        level = getattr(logging, log_level.upper(), logging.INFO)
        logger.setLevel(logging.DEBUG)
        formatter = logging.Formatter(LOG_FORMAT)

        # The file always gets everything, including per-iteration losses
        file_handler = logging.FileHandler(log_file_path, encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)

        console_handler = logging.StreamHandler()
        console_handler.setLevel(level)
        console_handler.setFormatter(formatter)

        logger.addHandler(file_handler)
        logger.addHandler(console_handler)

        logger.info(
            "======== Start of Run: {timestamp} =======".format(
                timestamp=datetime.now()
            )
        )

    return logger


def finalize_logger(logger):
    """Logs the end time and closes all handlers for the logger."""
    logger.info(
        "======== End of Run: {timestamp} =======".format(timestamp=datetime.now())
    )
    for handler in logger.handlers[:]:
        handler.close()
        logger.removeHandler(handler)
