"""
Terminal output helpers (rich tables)
"""
from .tables import (
    create_campaign_table,
    create_history_table,
    create_metrics_table,
    create_simulation_table,
    outcome_marker,
    print_table,
)

__all__ = [
    'create_campaign_table', 'create_history_table', 'create_metrics_table',
    'create_simulation_table', 'outcome_marker', 'print_table',
]
