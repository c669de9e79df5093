"""Stability labeling and the two LLM agents"""

from .labeling import PRIORITY, check_angle, check_frequency, check_voltage, classify

__all__ = ['PRIORITY', 'check_angle', 'check_frequency', 'check_voltage', 'classify']
