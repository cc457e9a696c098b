"""Structured logging for corrlab"""

import logging
import json
from datetime import datetime, timezone
from typing import Dict, Any, Optional
from pathlib import Path

from ..config import settings


class StructuredLogger:
    """Structured logger emitting one JSON record per step"""

    def __init__(self):
        self.logger = logging.getLogger("corrlab")
        self.logger.setLevel(getattr(logging, settings.LOG_LEVEL.upper(), logging.WARNING))

        if not self.logger.handlers:
            self._configure_handlers()

    def _configure_handlers(self) -> None:
        """Configure logger handlers for console and optional file output."""
        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )

        # Console handler; stdout is reserved for reports
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        self.logger.addHandler(console_handler)

        if settings.LOG_FILE:
            log_path = Path(settings.LOG_FILE)
            log_path.parent.mkdir(parents=True, exist_ok=True)
            file_handler = logging.FileHandler(log_path, encoding="utf-8")
            file_handler.setFormatter(formatter)
            self.logger.addHandler(file_handler)

        self.logger.propagate = False

    def _record(self, key: str, value: str, data: Optional[Dict[str, Any]]) -> str:
        log_data = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            key: value,
            "agent": "corrlab"
        }
        if data:
            log_data.update(data)
        return json.dumps(log_data, default=str)

    def log_step(self, step: str, data: Dict[str, Any] = None):
        """Log a processing step"""
        if self.logger.isEnabledFor(logging.INFO):
            self.logger.info(f"STEP: {self._record('step', step, data)}")

    def log_debug(self, step: str, data: Dict[str, Any] = None):
        """Log a construction detail"""
        if self.logger.isEnabledFor(logging.DEBUG):
            self.logger.debug(f"STEP: {self._record('step', step, data)}")

    def log_warning(self, step: str, data: Dict[str, Any] = None):
        """Log a warning"""
        self.logger.warning(f"WARNING: {self._record('step', step, data)}")

    def log_error(self, error_type: str, data: Dict[str, Any] = None):
        """Log an error"""
        self.logger.error(f"ERROR: {self._record('error', error_type, data)}")

    def log_scenario(self, name: str, kind: str, verdict: str):
        """Log a finished scenario"""
        self.log_step("scenario_completed", {
            "scenario": name,
            "kind": kind,
            "verdict": verdict
        })


# Global logger instance
logger = StructuredLogger()
