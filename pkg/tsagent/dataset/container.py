"""
Portable binary container

Layout: b"TSDS" | u32 manifest length | u32 manifest CRC-32 | manifest (UTF-8
JSON) | payload blocks in manifest order. Every payload carries its own CRC-32
in the manifest. The same layout stores datasets (.tsds), trajectory records
(.tstr) and model weights (.tsw).
"""

import json
import struct
import zlib
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from ..errors import ChecksumError, ContainerError, ContainerVersionError, TruncatedContainerError
from ..models.dataset import Dataset
from ..models.scenario import Scenario, Trajectory

MAGIC = b'TSDS'
CONTAINER_VERSION = 1
_HEADER = struct.Struct('<II')

DTYPES = {
    'f32le': np.dtype('<f4'),
    'f64le': np.dtype('<f8'),
    'i32le': np.dtype('<i4'),
    'u8': np.dtype('u1'),
}


def _tag_for(array: np.ndarray) -> str:
    for tag, dtype in DTYPES.items():
        if array.dtype.kind == dtype.kind and array.dtype.itemsize == dtype.itemsize:
            return tag
    raise ContainerError(f"unsupported payload dtype {array.dtype}")


def encode_container(kind: str, payloads: Sequence[Tuple[str, np.ndarray]],
                     header: Dict[str, Any]) -> bytes:
    """Serialize named arrays plus a JSON header into container bytes"""
    entries = []
    blobs = []
    offset = 0
    for name, array in payloads:
        array = np.asarray(array)
        tag = _tag_for(array)
        blob = np.ascontiguousarray(array, dtype=DTYPES[tag]).tobytes()
        entries.append({
            'name': name,
            'dtype': tag,
            'shape': list(array.shape),
            'offset': offset,
            'length': len(blob),
            'crc32': zlib.crc32(blob),
        })
        blobs.append(blob)
        offset += len(blob)

    manifest = {'version': CONTAINER_VERSION, 'kind': kind, 'payloads': entries, **header}
    manifest_bytes = json.dumps(manifest, sort_keys=True, separators=(',', ':')).encode('utf-8')
    head = MAGIC + _HEADER.pack(len(manifest_bytes), zlib.crc32(manifest_bytes))
    return head + manifest_bytes + b''.join(blobs)


def decode_container(data: bytes, expected_kind: str = '') -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """
    Parse container bytes

    Raises:
        ContainerError: bad magic or wrong kind
        TruncatedContainerError: data ends early
        ChecksumError: manifest or payload CRC mismatch, or trailing bytes
        ContainerVersionError: unsupported schema version
    """
    head_size = len(MAGIC) + _HEADER.size
    if len(data) < head_size:
        raise TruncatedContainerError(f"container header needs {head_size} bytes, got {len(data)}")
    if data[:len(MAGIC)] != MAGIC:
        raise ContainerError("not a tsds container (bad magic)")
    manifest_len, manifest_crc = _HEADER.unpack(data[len(MAGIC):head_size])
    end = head_size + manifest_len
    if len(data) < end:
        raise TruncatedContainerError(f"manifest needs {manifest_len} bytes, only {len(data) - head_size} present")
    manifest_bytes = data[head_size:end]
    if zlib.crc32(manifest_bytes) != manifest_crc:
        raise ChecksumError("manifest checksum mismatch")
    try:
        manifest = json.loads(manifest_bytes.decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"manifest is not valid JSON: {exc}")

    version = manifest.get('version')
    if version != CONTAINER_VERSION:
        raise ContainerVersionError(
            f"container version {version} is not supported (this build reads version {CONTAINER_VERSION})")
    if expected_kind and manifest.get('kind') != expected_kind:
        raise ContainerError(f"expected a '{expected_kind}' container, found '{manifest.get('kind')}'")

    body = data[end:]
    arrays = {}
    total = 0
    for entry in manifest['payloads']:
        start, length = entry['offset'], entry['length']
        blob = body[start:start + length]
        if len(blob) != length:
            raise TruncatedContainerError(f"payload '{entry['name']}' is truncated "
                                          f"({len(blob)} of {length} bytes)")
        if zlib.crc32(blob) != entry['crc32']:
            raise ChecksumError(f"payload '{entry['name']}' checksum mismatch")
        dtype = DTYPES.get(entry['dtype'])
        if dtype is None:
            raise ContainerError(f"unknown dtype tag {entry['dtype']!r}")
        arrays[entry['name']] = np.frombuffer(blob, dtype=dtype).reshape(entry['shape']).copy()
        total += length
    if len(body) != total:
        raise ChecksumError(f"{len(body) - total} unexpected trailing bytes")
    return manifest, arrays


def write_container(path: Union[str, Path], kind: str, payloads, header: Dict[str, Any]) -> Path:
    """Write atomically through a temp file"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp = path.with_suffix(path.suffix + '.tmp')
    try:
        temp.write_bytes(encode_container(kind, payloads, header))
        temp.replace(path)
    finally:
        if temp.exists():
            temp.unlink()
    return path


def read_container(path: Union[str, Path], expected_kind: str = ''):
    path = Path(path)
    if not path.exists():
        raise ContainerError(f"no such container: {path}")
    return decode_container(path.read_bytes(), expected_kind)


# --------------------------------------------------------------------------- #
# Datasets
# --------------------------------------------------------------------------- #

def write_dataset(ds: Dataset, path: Union[str, Path]) -> Path:
    header = {'names': list(ds.names), 'n_classes': ds.n_classes, 'metadata': ds.metadata}
    return write_container(path, 'dataset', [('x', ds.x.astype('<f4')), ('y', ds.y.astype('<i4'))], header)


def read_dataset(path: Union[str, Path]) -> Dataset:
    manifest, arrays = read_container(path, 'dataset')
    return Dataset(arrays['x'], arrays['y'], manifest['n_classes'], tuple(manifest['names']),
                   manifest.get('metadata', {}))


# --------------------------------------------------------------------------- #
# Trajectories
# --------------------------------------------------------------------------- #

_TRAJ_ARRAYS = ('t', 'delta', 'omega', 'v_mag', 'f_coi', 'inertia')


def write_trajectories(trajectories: List[Trajectory], path: Union[str, Path],
                       labels: Sequence[Any] = ()) -> Path:
    payloads = []
    records = []
    for k, traj in enumerate(trajectories):
        for name in _TRAJ_ARRAYS:
            payloads.append((f"{k}/{name}", np.asarray(getattr(traj, name), dtype='<f8')))
        payloads.append((f"{k}/in_service", np.asarray(traj.in_service, dtype='u1')))
        record = {
            'converged': traj.converged,
            'gen_ids': list(traj.gen_ids),
            'bus_ids': list(traj.bus_ids),
            'f0': traj.f0,
            'fault_window': list(traj.fault_window),
            'window_start': traj.window_start,
            'abort_time': traj.abort_time,
            'case': traj.case_name,
            'scenario': traj.scenario.to_dict() if traj.scenario is not None else None,
        }
        if k < len(labels):
            record['label'] = labels[k]
        records.append(record)
    return write_container(path, 'trajectories', payloads, {'records': records})


def read_trajectories(path: Union[str, Path]) -> List[Trajectory]:
    manifest, arrays = read_container(path, 'trajectories')
    out = []
    for k, record in enumerate(manifest['records']):
        scenario = record.get('scenario')
        out.append(Trajectory(
            t=arrays[f"{k}/t"],
            delta=arrays[f"{k}/delta"],
            omega=arrays[f"{k}/omega"],
            v_mag=arrays[f"{k}/v_mag"],
            f_coi=arrays[f"{k}/f_coi"],
            converged=record['converged'],
            gen_ids=tuple(record['gen_ids']),
            bus_ids=tuple(record['bus_ids']),
            inertia=arrays[f"{k}/inertia"],
            f0=record['f0'],
            in_service=arrays[f"{k}/in_service"].astype(bool),
            fault_window=tuple(record['fault_window']),
            window_start=record['window_start'],
            abort_time=record['abort_time'],
            scenario=Scenario(**scenario) if scenario else None,
            case_name=record.get('case', ''),
        ))
    return out
