"""Case file parsing and validation"""

import json
from pathlib import Path
from typing import Any, Dict, List, Union

import networkx as nx

from ..errors import CaseFormatError
from ..models.grid import BUS_KINDS, Bus, Generator, GridCase, Line

CASES_DIR = Path(__file__).resolve().parent.parent / 'data' / 'cases'


def _require(record: Dict[str, Any], key: str, path: str, kind=float) -> Any:
    if key not in record:
        raise CaseFormatError(f"missing field '{key}'", path)
    return _coerce(record[key], f"{path}.{key}", kind)


def _coerce(value: Any, path: str, kind=float) -> Any:
    if kind is str:
        if not isinstance(value, str):
            raise CaseFormatError(f"expected a string, got {type(value).__name__}", path)
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CaseFormatError(f"expected a number, got {value!r}", path)
    if kind is int:
        if not float(value).is_integer():
            raise CaseFormatError(f"expected an integer, got {value!r}", path)
        return int(value)
    return float(value)


def _optional(record: Dict[str, Any], key: str, path: str, default: Any, kind=float) -> Any:
    if key not in record or record[key] is None:
        return default
    return _coerce(record[key], f"{path}.{key}", kind)


def _records(doc: Dict[str, Any], key: str) -> List[Dict[str, Any]]:
    records = doc.get(key)
    if not isinstance(records, list):
        raise CaseFormatError(f"'{key}' must be a list of records", key)
    for k, record in enumerate(records):
        if not isinstance(record, dict):
            raise CaseFormatError("record must be an object", f"{key}[{k}]")
    return records


def _parse_bus(record: Dict[str, Any], path: str) -> Bus:
    kind = _require(record, 'kind', path, str).lower()
    if kind not in BUS_KINDS:
        raise CaseFormatError(f"kind must be one of {BUS_KINDS}, got {kind!r}", f"{path}.kind")
    try:
        return Bus(
            id=_require(record, 'id', path, int),
            kind=kind,
            base_kv=_require(record, 'base_kv', path),
            v_setpoint=_optional(record, 'v_setpoint', path, 1.0),
            p_load=_optional(record, 'p_load', path, 0.0),
            q_load=_optional(record, 'q_load', path, 0.0),
        )
    except ValueError as exc:
        raise CaseFormatError(str(exc), path)


def _parse_line(record: Dict[str, Any], path: str, position: int) -> Line:
    status = record.get('status', 'in')
    if isinstance(status, bool):
        in_service = status
    elif status in ('in', 'out', 1, 0):
        in_service = status in ('in', 1)
    else:
        raise CaseFormatError(f"status must be 'in' or 'out', got {status!r}", f"{path}.status")
    try:
        return Line(
            id=_optional(record, 'id', path, position, int),
            from_bus=_require(record, 'from', path, int),
            to_bus=_require(record, 'to', path, int),
            r=_optional(record, 'r', path, 0.0),
            x=_require(record, 'x', path),
            b_shunt=_optional(record, 'b_shunt', path, 0.0),
            tap=_optional(record, 'tap', path, 1.0) or 1.0,
            in_service=in_service,
        )
    except ValueError as exc:
        raise CaseFormatError(str(exc), path)


def _parse_generator(record: Dict[str, Any], path: str, position: int, sbase: float) -> Generator:
    q_limits = record.get('q_limits', [-9999.0, 9999.0])
    if not isinstance(q_limits, (list, tuple)) or len(q_limits) != 2:
        raise CaseFormatError("q_limits must be a [min, max] pair", f"{path}.q_limits")
    try:
        return Generator(
            id=_optional(record, 'id', path, position, int),
            bus=_require(record, 'bus', path, int),
            p_dispatch=_optional(record, 'p_dispatch', path, 0.0),
            h=_require(record, 'h', path),
            xdp=_require(record, 'xdp', path),
            mbase=_optional(record, 'mbase', path, sbase),
            d=_optional(record, 'd', path, 0.0),
            q_limits=(_coerce(q_limits[0], f"{path}.q_limits[0]"),
                      _coerce(q_limits[1], f"{path}.q_limits[1]")),
        )
    except ValueError as exc:
        raise CaseFormatError(str(exc), path)


def case_graph(buses, lines) -> nx.MultiGraph:
    """Graph of bus ids joined by in-service lines"""
    graph = nx.MultiGraph()
    graph.add_nodes_from(bus.id for bus in buses)
    graph.add_edges_from((line.from_bus, line.to_bus, line.id) for line in lines if line.in_service)
    return graph


def parse_case(text: Union[str, bytes, Dict[str, Any]]) -> GridCase:
    """
    Parse and validate a case document

    Args:
        text: JSON text (or an already decoded mapping)

    Returns:
        Validated GridCase

    Raises:
        CaseFormatError: schema violation, duplicate ids, missing slack,
            dangling references or a disconnected network
    """
    if isinstance(text, dict):
        doc = text
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CaseFormatError(f"invalid JSON: {exc.msg} (line {exc.lineno})")
    if not isinstance(doc, dict):
        raise CaseFormatError("case must be a JSON object")

    name = _optional(doc, 'name', 'name', 'unnamed', str)
    f0 = _require(doc, 'f0_hz', '')
    sbase = _require(doc, 'sbase_mva', '')
    if not f0 > 0:
        raise CaseFormatError("must be positive", 'f0_hz')
    if not sbase > 0:
        raise CaseFormatError("must be positive", 'sbase_mva')

    buses: List[Bus] = []
    seen_buses = set()
    for k, record in enumerate(_records(doc, 'buses')):
        path = f"buses[{k}]"
        bus = _parse_bus(record, path)
        if bus.id in seen_buses:
            raise CaseFormatError(f"duplicate bus id {bus.id}", f"{path}.id")
        seen_buses.add(bus.id)
        buses.append(bus)
    if not buses:
        raise CaseFormatError("case has no buses", 'buses')

    slack = [k for k, bus in enumerate(buses) if bus.kind == 'slack']
    if not slack:
        raise CaseFormatError("no slack bus", 'buses')
    if len(slack) > 1:
        raise CaseFormatError(f"more than one slack bus (ids {[buses[k].id for k in slack]})",
                              f"buses[{slack[1]}].kind")

    lines: List[Line] = []
    seen_lines = set()
    for k, record in enumerate(_records(doc, 'lines')):
        path = f"lines[{k}]"
        line = _parse_line(record, path, k + 1)
        for end in ('from_bus', 'to_bus'):
            if getattr(line, end) not in seen_buses:
                key = 'from' if end == 'from_bus' else 'to'
                raise CaseFormatError(f"unknown bus {getattr(line, end)}", f"{path}.{key}")
        if line.id in seen_lines:
            raise CaseFormatError(f"duplicate line id {line.id}", f"{path}.id")
        seen_lines.add(line.id)
        lines.append(line)

    generators: List[Generator] = []
    seen_gens = set()
    for k, record in enumerate(_records(doc, 'generators')):
        path = f"generators[{k}]"
        gen = _parse_generator(record, path, k + 1, sbase)
        if gen.bus not in seen_buses:
            raise CaseFormatError(f"unknown bus {gen.bus}", f"{path}.bus")
        if gen.id in seen_gens:
            raise CaseFormatError(f"duplicate generator id {gen.id}", f"{path}.id")
        seen_gens.add(gen.id)
        generators.append(gen)
    if len(generators) < 2:
        raise CaseFormatError("at least 2 generators are required", 'generators')

    gen_buses = {gen.bus for gen in generators}
    for k, bus in enumerate(buses):
        if bus.kind in ('slack', 'pv') and bus.id not in gen_buses:
            raise CaseFormatError(f"{bus.kind} bus {bus.id} has no generator", f"buses[{k}].kind")

    graph = case_graph(buses, lines)
    if not nx.is_connected(graph):
        islands = sorted((sorted(c) for c in nx.connected_components(graph)), key=len)
        raise CaseFormatError(f"network is disconnected; isolated buses {islands[0]}", 'lines')

    return GridCase(name=name, f0=f0, sbase=sbase, buses=tuple(buses),
                    lines=tuple(lines), generators=tuple(generators))


def load_case(source: Union[str, Path]) -> GridCase:
    """Load a bundled case by name, or a case file by path"""
    path = Path(source)
    if path.suffix != '.json' and not path.exists():
        return bundled_case(str(source))
    if not path.exists():
        raise CaseFormatError(f"case file not found: {path}")
    return parse_case(path.read_text(encoding='utf-8'))


def bundled_case(name: str) -> GridCase:
    path = CASES_DIR / f"{name}.json"
    if not path.exists():
        raise CaseFormatError(f"unknown bundled case '{name}' (available: {', '.join(list_cases())})")
    return parse_case(path.read_text(encoding='utf-8'))


def list_cases() -> List[str]:
    return sorted(p.stem for p in CASES_DIR.glob('*.json'))
