"""
The .bqci snapshot container.

Layout (little-endian):

    header   "<4sIIIIdddI"  magic b"BQCI", version, n, rank tag, sample count,
                            t0, dt, dealias fraction, component count
    payload  '<f8'          real/imaginary pairs of the coefficient array

A sample count of 0 marks a single Field; otherwise the payload is a time
series of that many samples. A JSON sidecar ``<path>.json`` carries
provenance and, for the Mikado family (rank tag 3), the construction
parameters.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from bousci.core.errors import SnapshotFormatError
from bousci.fields.field import Field, Rank, TimeSeriesField
from bousci.fields.grid import Grid
from bousci.mikado.family import MikadoFamily


logger = logging.getLogger(__name__)

MAGIC = b"BQCI"
VERSION = 1
HEADER = struct.Struct("<4sIIIIdddI")
PAYLOAD_DTYPE = np.dtype("<f8")
COMPLEX_DTYPE = np.dtype("<c16")

RANK_TAGS = {Rank.SCALAR: 0, Rank.VECTOR: 1, Rank.SYM_TENSOR: 2}
FAMILY_TAG = 3
TAG_RANKS = {tag: rank for rank, tag in RANK_TAGS.items()}

Snapshot = Union[Field, TimeSeriesField]


def sidecar_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _payload(coeffs: np.ndarray) -> bytes:
    return np.ascontiguousarray(coeffs, dtype=COMPLEX_DTYPE).tobytes()


def _write(path: Path, header: bytes, payload: bytes, sidecar: Dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(header)
        f.write(payload)
    with open(sidecar_path(path), 'w') as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)


def write_snapshot(
    path: Union[str, Path], field: Snapshot, provenance: Optional[Dict[str, Any]] = None
) -> Path:
    """
    Write a Field or TimeSeriesField.

    Args:
        path: Target file (conventionally ``*.bqci``)
        field: Data to store
        provenance: Extra keys for the JSON sidecar

    Returns:
        The path written
    """
    path = Path(path)
    grid = field.grid
    if isinstance(field, TimeSeriesField):
        count, t0, dt = len(field), field.t0, field.dt
    else:
        count, t0, dt = 0, 0.0, 0.0
    header = HEADER.pack(
        MAGIC, VERSION, grid.n, RANK_TAGS[field.rank], count, t0, dt,
        grid.dealias_fraction, field.rank.value,
    )
    sidecar = {'kind': type(field).__name__, 'rank': field.rank.name, **(provenance or {})}
    _write(path, header, _payload(field.coeffs), sidecar)
    logger.debug(f"Snapshot written: {path} ({field.rank.name}, {max(count, 1)} samples)")
    return path


def _read_header(raw: bytes, path: Path) -> tuple:
    if len(raw) < HEADER.size:
        raise SnapshotFormatError(f"{path}: truncated header")
    fields = HEADER.unpack_from(raw)
    if fields[0] != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {fields[0]!r}")
    if fields[1] != VERSION:
        raise SnapshotFormatError(f"{path}: version {fields[1]} not supported (expected {VERSION})")
    return fields


def _read_coeffs(raw: bytes, shape: tuple, path: Path) -> np.ndarray:
    expected = int(np.prod(shape)) * 2 * PAYLOAD_DTYPE.itemsize
    body = raw[HEADER.size:]
    if len(body) != expected:
        raise SnapshotFormatError(f"{path}: payload has {len(body)} bytes, expected {expected}")
    return np.frombuffer(body, dtype=COMPLEX_DTYPE).reshape(shape).astype(complex)


def read_snapshot(path: Union[str, Path]) -> Snapshot:
    """
    Read a Field or TimeSeriesField written by ``write_snapshot``.

    Raises:
        SnapshotFormatError: on bad magic, unknown version or rank, or a truncated payload
    """
    path = Path(path)
    raw = path.read_bytes()
    _, _, n, tag, count, t0, dt, fraction, components = _read_header(raw, path)
    if tag not in TAG_RANKS:
        raise SnapshotFormatError(f"{path}: rank tag {tag} is not a field")
    rank = TAG_RANKS[tag]
    if components != rank.value:
        raise SnapshotFormatError(f"{path}: {components} components for rank {rank.name}")
    grid = Grid(n, fraction)
    shape = (max(count, 1), components) + grid.shape
    coeffs = _read_coeffs(raw, shape, path)
    if count == 0:
        return Field(grid, rank, coeffs[0])
    return TimeSeriesField(grid, rank, t0, dt, coeffs)


def write_family(path: Union[str, Path], family: MikadoFamily) -> Path:
    """Store the tube offsets as payload and the construction parameters in the sidecar."""
    path = Path(path)
    offsets = np.asarray(family.offsets, dtype=float)
    header = HEADER.pack(
        MAGIC, VERSION, family.grid_n, FAMILY_TAG, 0, family.radius, 0.0, 1.0, offsets.size
    )
    payload = offsets.astype(PAYLOAD_DTYPE).tobytes()
    _write(path, header, payload, {'kind': 'MikadoFamily', **family.to_dict()})
    logger.info(f"Mikado family written: {path}")
    return path


def read_family(path: Union[str, Path]) -> MikadoFamily:
    """
    Rebuild a family written by ``write_family``.

    Raises:
        SnapshotFormatError: if the file is not a family container or its sidecar is missing
    """
    path = Path(path)
    raw = path.read_bytes()
    _, _, n, tag, _, radius, _, _, components = _read_header(raw, path)
    if tag != FAMILY_TAG:
        raise SnapshotFormatError(f"{path}: rank tag {tag} is not a Mikado family")
    body = raw[HEADER.size:]
    if len(body) != components * PAYLOAD_DTYPE.itemsize or components != 18:
        raise SnapshotFormatError(f"{path}: family payload has {len(body)} bytes")
    offsets = np.frombuffer(body, dtype=PAYLOAD_DTYPE).astype(np.float64).reshape(6, 3)
    try:
        with open(sidecar_path(path)) as f:
            meta = json.load(f)
    except FileNotFoundError as e:
        raise SnapshotFormatError(f"{path}: missing sidecar") from e
    meta.update({'offsets': offsets, 'radius': radius, 'grid_n': n})
    return MikadoFamily.from_dict(meta)
