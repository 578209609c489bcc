"""Result persistence: CSV curves, JSON reports, run manifests and snapshots.

Snapshot layout
---------------
A snapshot holds the correlation field ``sigma_Psi(k)`` of one time in the
site-spinor basis ``Psi = (a_{k,0..R-1}, a^dagger_{-k,0..R-1})``:

* header (24 bytes, little-endian): ``int64 L``, ``int64 R``, ``float64 t``;
* body: ``L/R`` matrices of shape ``(2R, 2R)`` in FFT mesh order
  (``k = 2 pi n R / L``, ``n = 0..L/R-1``), each row-major, every entry
  stored as a ``(real, imag)`` pair of little-endian float64.

The file size is therefore ``24 + 16 * (L/R) * (2R)^2`` bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import struct
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ChainError
from .model import ChainConfig

SNAPSHOT_HEADER = struct.Struct("<qqd")


def version() -> str:
    from . import __version__

    return __version__


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default)


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")
    return path


def read_json(path: str | Path):
    return json.loads(Path(path).read_text())


def write_csv(path: str | Path, header, rows) -> Path:
    """Write ``rows`` (sequences or dicts keyed by ``header``) with a header row.

    Floats are written with ``repr`` so values round-trip exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row[h] for h in header]
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def read_curve(path: str | Path, method: str | None = None):
    """``(t, S_A)`` arrays from an entropy CSV, optionally filtered by method."""
    rows = read_csv(path)
    if not rows or "t" not in rows[0] or "S_A" not in rows[0]:
        raise ChainError(f"{path} has no t/S_A columns")
    if method is not None:
        rows = [r for r in rows if r.get("method") == method]
        if not rows:
            raise ChainError(f"{path} has no rows with method {method!r}")
    t = np.array([float(r["t"]) for r in rows])
    S = np.array([float(r["S_A"]) for r in rows])
    order = np.argsort(t, kind="stable")
    return t[order], S[order]


def config_hash(config: ChainConfig) -> str:
    """SHA-256 of the canonical JSON form of ``config``."""
    return hashlib.sha256(json.dumps(config.to_dict(), sort_keys=True).encode()).hexdigest()


def file_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Provenance record written as ``manifest.json`` next to the outputs.

    Every output file is listed with its SHA-256, so two runs reproduce each
    other exactly when their ``outputs`` maps agree.
    """

    subcommand: str
    config: dict
    config_hash: str
    tolerances: dict
    code_version: str = field(default_factory=version)
    started: str = field(default_factory=_now)
    finished: str | None = None
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)
    environment: dict = field(
        default_factory=lambda: {
            "python": platform.python_version(),
            "numpy": np.__version__,
        }
    )
    root: str = "."

    @classmethod
    def start(
        cls, subcommand: str, config: ChainConfig | None, tolerances: dict, root: str | Path = "."
    ) -> "RunManifest":
        cfg = config.to_dict() if config is not None else {}
        digest = config_hash(config) if config is not None else ""
        return cls(subcommand, cfg, digest, dict(tolerances), root=str(root))

    def add_input(self, path: str | Path) -> None:
        path = Path(path)
        self.inputs[str(path)] = file_hash(path) if path.is_file() else None

    def add_output(self, path: str | Path) -> Path:
        """Record ``path`` (keyed relative to the output directory) with its hash."""
        path = Path(path)
        try:
            key = path.relative_to(self.root).as_posix()
        except ValueError:
            key = str(path)
        self.outputs[key] = file_hash(path)
        return path

    def finish(self) -> Path:
        self.finished = _now()
        record = asdict(self)
        del record["root"]
        return write_json(Path(self.root) / "manifest.json", record)


def write_snapshot(path: str | Path, sigma_psi, L: int, R: int, t: float) -> Path:
    """Write one field in the documented binary layout."""
    sigma_psi = np.asarray(sigma_psi, dtype=np.complex128)
    expected = (L // R, 2 * R, 2 * R)
    if sigma_psi.shape != expected:
        raise ValueError(f"field has shape {sigma_psi.shape}, expected {expected}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = np.ascontiguousarray(sigma_psi).view(np.float64).astype("<f8", copy=False)
    with path.open("wb") as fh:
        fh.write(SNAPSHOT_HEADER.pack(int(L), int(R), float(t)))
        fh.write(body.tobytes(order="C"))
    return path


def read_snapshot(path: str | Path):
    """Return ``(L, R, t, sigma_psi)`` from a snapshot file."""
    data = Path(path).read_bytes()
    if len(data) < SNAPSHOT_HEADER.size:
        raise ChainError(f"{path}: truncated snapshot header")
    L, R, t = SNAPSHOT_HEADER.unpack_from(data)
    if L <= 0 or R <= 0 or L % R:
        raise ChainError(f"{path}: invalid header L={L}, R={R}")
    n = (L // R) * (2 * R) ** 2
    if len(data) != SNAPSHOT_HEADER.size + 16 * n:
        raise ChainError(f"{path}: size {len(data)} does not match L={L}, R={R}")
    body = np.frombuffer(data, dtype="<f8", offset=SNAPSHOT_HEADER.size)
    sigma = body.astype(np.float64).view(np.complex128).reshape(L // R, 2 * R, 2 * R).copy()
    return L, R, t, sigma
