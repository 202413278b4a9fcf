import os
import time
import json
import logging
import threading
from collections import defaultdict
from contextlib import contextmanager
from datetime import datetime
from typing import Dict, List, Any

import psutil
import pytz

logger = logging.getLogger('coarsemed.analytics')

class RunAnalytics:
    """
    Analytics for one CLI run: stage timings, error counts and process memory.

    Statistics go to the log only; artifacts never include them.
    """
    def __init__(self):
        self.command = None
        self.started_at = datetime.now(pytz.utc)

        # Stage name -> list of durations in seconds
        self.stage_times: Dict[str, List[float]] = defaultdict(list)

        # Counters
        self.artifacts_written = 0
        self.items_checked = defaultdict(int)  # check name -> count

        # Error tracking
        self.errors = defaultdict(int)  # error type -> count
        self.last_errors: List[Dict[str, Any]] = []

        self.lock = threading.Lock()
        self.start_time = time.time()

        logger.debug("Run analytics initialized")

    def record_command(self, command_name: str):
        with self.lock:
            self.command = command_name

    @contextmanager
    def stage(self, name: str):
        """
        Time a pipeline stage

        Args:
            name (str): Stage name, e.g. 'load', 'walls', 'write'
        """
        began = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - began
            with self.lock:
                self.stage_times[name].append(elapsed)
            logger.debug(f"Stage {name} took {elapsed:.4f}s")

    def record_checked(self, check_name: str, count: int):
        """
        Record how many items a check looked at

        Args:
            check_name (str): Name of the check
            count (int): Number of tuples, pairs or samples examined
        """
        with self.lock:
            self.items_checked[check_name] += count

    def record_artifact(self):
        with self.lock:
            self.artifacts_written += 1

    def record_error(self, error_type: str, error_details: Dict[str, Any]):
        """
        Record an error

        Args:
            error_type (str): Exception class name
            error_details (Dict[str, Any]): Message and witness
        """
        with self.lock:
            self.errors[error_type] += 1
            error_details['timestamp'] = datetime.now(pytz.utc).isoformat()
            self.last_errors.append(error_details)

            # Keep the tail only
            if len(self.last_errors) > 100:
                self.last_errors = self.last_errors[-100:]

            logger.debug(f"Recorded error: {error_type}")

    def get_statistics(self) -> Dict[str, Any]:
        """
        Get run statistics

        Returns:
            Dict[str, Any]: Dictionary of statistics
        """
        process = psutil.Process(os.getpid())
        stage_performance = {}
        for name, times in self.stage_times.items():
            if times:
                stage_performance[name] = {
                    'total_time': sum(times),
                    'max_time': max(times),
                    'count': len(times)
                }

        return {
            "command": self.command,
            "started_at": self.started_at.isoformat(),
            "elapsed_seconds": time.time() - self.start_time,
            "stages": stage_performance,
            "items_checked": dict(self.items_checked),
            "artifacts_written": self.artifacts_written,
            "memory_usage_mb": process.memory_info().rss / 1024 / 1024,
            "error_counts": dict(self.errors),
            "recent_errors_count": len(self.last_errors)
        }

    def export_to_json(self) -> str:
        """
        Export run statistics to a JSON string

        Returns:
            str: JSON string of statistics
        """
        return json.dumps(self.get_statistics(), indent=2, default=str)

    def reset(self):
        """Reset all analytics data"""
        self.__init__()

# Initialize global instance
run_analytics = RunAnalytics()
