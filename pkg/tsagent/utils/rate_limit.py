"""Rate limiting utilities for API clients"""

import threading
import time
from collections import deque
from typing import Callable, Deque, Dict, Optional


class RateLimiter:
    """
    Sliding-window request limiter

    At most ``max_requests`` calls to ``wait`` complete within any ``window``
    seconds, per api name. Clock and sleep are injectable for tests.
    """

    def __init__(self, max_requests: int = 10, window: float = 60.0,
                 clock: Optional[Callable[[], float]] = None,
                 sleep: Optional[Callable[[float], None]] = None):
        """
        Args:
            max_requests: Requests allowed per window
            window: Window length in seconds
            clock: Monotonic time source (default: time.monotonic)
            sleep: Blocking sleep (default: time.sleep)
        """
        if max_requests < 1:
            raise ValueError("max_requests must be at least 1")
        if not window > 0:
            raise ValueError("window must be positive")
        self.max_requests = max_requests
        self.window = window
        self.clock = clock or time.monotonic
        self.sleep = sleep or time.sleep
        self.history: Dict[str, Deque[float]] = {}
        self._lock = threading.Lock()

    def wait(self, api: str = 'default') -> float:
        """
        Block until a request to ``api`` is allowed, then record it

        Returns:
            Seconds spent waiting
        """
        waited = 0.0
        with self._lock:
            stamps = self.history.setdefault(api, deque())
            while True:
                now = self.clock()
                while stamps and now - stamps[0] >= self.window:
                    stamps.popleft()
                if len(stamps) < self.max_requests:
                    stamps.append(now)
                    return waited
                delay = self.window - (now - stamps[0])
                self.sleep(delay)
                waited += delay

    def pending(self, api: str = 'default') -> int:
        """Requests recorded within the current window"""
        now = self.clock()
        return sum(1 for stamp in self.history.get(api, ()) if now - stamp < self.window)
