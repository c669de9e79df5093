"""Network modelling: case files, power flow, admittance and reduction"""

from .case_parser import parse_case, load_case, bundled_case, list_cases
from .network import (
    FaultShunt,
    RemoveLine,
    RemoveGenerator,
    ScaleLoads,
    build_admittance,
    bus_admittance,
    fault_admittance,
    kron_reduce,
    internal_nodes,
)
from .power_flow import power_flow

__all__ = [
    'parse_case', 'load_case', 'bundled_case', 'list_cases',
    'FaultShunt', 'RemoveLine', 'RemoveGenerator', 'ScaleLoads',
    'build_admittance', 'bus_admittance', 'fault_admittance', 'kron_reduce', 'internal_nodes',
    'power_flow',
]
