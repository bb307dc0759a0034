"""File ingestion and grid serialization.

Supported inputs are XYZ molecule files and ``(channel, x, y, z)`` CSV
point files; grids travel as NPY v1.0 tensors (little-endian float32,
C order, shape ``(channels, H, W, D)``) so downstream ML pipelines can
map them without copying. Parsers either succeed or raise
:class:`ParseError` carrying the offending line number; they never crash
on arbitrary byte sequences.
"""

from __future__ import annotations

import csv
import io as _io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Grid, GridSpec, ParticleSet, BoundingBox, LatticeCell

__all__ = [
    "ParseError",
    "MoleculeFile",
    "parse_xyz",
    "parse_points_csv",
    "write_npy",
    "read_npy",
    "grid_from_array",
    "ELEMENT_SYMBOLS",
]

# All 118 element symbols, indexed by atomic number - 1.
ELEMENT_SYMBOLS = (
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr",
    "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
    "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
    "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm",
    "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds",
    "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
)
_ATOMIC_NUMBER = {sym: z for z, sym in enumerate(ELEMENT_SYMBOLS, start=1)}


class ParseError(ValueError):
    """Malformed input file; ``line`` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


@dataclass(frozen=True)
class MoleculeFile:
    """Element symbols plus positions, as parsed from an XYZ file."""

    symbols: tuple[str, ...]
    positions: np.ndarray  # (n, 3) float64

    def __len__(self) -> int:
        return len(self.symbols)

    def channel_map(self, policy: str | int = "auto") -> dict[str, int]:
        """Element -> channel assignment.

        ``"auto"``: distinct elements sorted by atomic number get channels
        ``0..C-1``. ``"single"``: everything maps to channel 0. An integer
        ``K``: like auto but validated against a fixed channel budget.
        """
        if policy == "single":
            return {sym: 0 for sym in set(self.symbols)}
        distinct = sorted(set(self.symbols), key=lambda s: _ATOMIC_NUMBER[s])
        if policy != "auto":
            budget = int(policy)
            if len(distinct) > budget:
                raise ValueError(
                    f"{len(distinct)} distinct elements exceed the {budget}-channel budget"
                )
        return {sym: c for c, sym in enumerate(distinct)}

    def n_channels(self, policy: str | int = "auto") -> int:
        if policy == "single":
            return 1
        if policy == "auto":
            return len(set(self.symbols))
        return int(policy)

    def to_particle_set(
        self, policy: str | int = "auto", lattice: LatticeCell | None = None
    ) -> ParticleSet:
        mapping = self.channel_map(policy)
        channels = np.array([mapping[s] for s in self.symbols], dtype=np.int64)
        return ParticleSet(channels, self.positions.copy(), lattice)


def parse_xyz(text: str) -> MoleculeFile:
    """Parse XYZ: atom count, comment line, then ``Symbol x y z`` rows."""
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError("missing atom-count header", 1)
    try:
        count = int(lines[0].strip())
    except ValueError:
        raise ParseError(f"atom count is not an integer: {lines[0].strip()!r}", 1) from None
    if count < 0:
        raise ParseError(f"negative atom count {count}", 1)

    symbols: list[str] = []
    rows: list[tuple[float, float, float]] = []
    lineno = 2  # comment line
    for lineno, raw in enumerate(lines[2:], start=3):
        if not raw.strip():
            continue
        if len(rows) == count:
            raise ParseError(
                f"header promised {count} atoms but more rows follow", lineno
            )
        fields = raw.split()
        if len(fields) != 4:
            raise ParseError(
                f"expected 'Symbol x y z', got {len(fields)} fields", lineno
            )
        sym = fields[0]
        if sym not in _ATOMIC_NUMBER:
            raise ParseError(f"unknown element symbol {sym!r}", lineno)
        try:
            xyz = tuple(float(f) for f in fields[1:])
        except ValueError:
            raise ParseError(f"malformed coordinate in {fields[1:]!r}", lineno) from None
        if not all(np.isfinite(xyz)):
            raise ParseError(f"non-finite coordinate in {fields[1:]!r}", lineno)
        symbols.append(sym)
        rows.append(xyz)  # type: ignore[arg-type]
    if len(rows) != count:
        raise ParseError(
            f"header promised {count} atoms but only {len(rows)} rows found",
            max(lineno, 2),
        )
    positions = np.asarray(rows, dtype=np.float64).reshape(len(rows), 3)
    return MoleculeFile(tuple(symbols), positions)


def parse_points_csv(text: str) -> ParticleSet:
    """Parse ``channel, x, y, z`` CSV rows (optional header) into particles."""
    rows: list[tuple[int, float, float, float]] = []
    reader = csv.reader(_io.StringIO(text))

    def records():
        lineno = 0
        while True:
            try:
                record = next(reader)
            except StopIteration:
                return
            except csv.Error as exc:
                raise ParseError(f"unreadable CSV: {exc}", lineno + 1) from None
            lineno = reader.line_num
            yield lineno, record

    for lineno, record in records():
        if not record or all(not f.strip() for f in record):
            continue
        if lineno == 1 and _looks_like_header(record):
            continue
        if len(record) != 4:
            raise ParseError(f"expected 4 columns, got {len(record)}", lineno)
        chan_text = record[0].strip()
        try:
            channel = int(chan_text)
        except ValueError:
            raise ParseError(f"channel must be an integer, got {chan_text!r}", lineno) from None
        if channel < 0:
            raise ParseError(f"channel must be nonnegative, got {channel}", lineno)
        try:
            xyz = tuple(float(f) for f in record[1:4])
        except ValueError:
            raise ParseError(f"malformed coordinate in {record[1:4]!r}", lineno) from None
        if not all(np.isfinite(xyz)):
            raise ParseError(f"non-finite coordinate in {record[1:4]!r}", lineno)
        rows.append((channel, *xyz))  # type: ignore[arg-type]
    return ParticleSet.from_rows(rows)


def _looks_like_header(record: list[str]) -> bool:
    try:
        float(record[0])
    except (ValueError, IndexError):
        return True
    return False


def write_npy(grid: Grid | np.ndarray, path: str | Path):
    """Write the grid tensor as NPY v1.0, little-endian float32, C order."""
    data = grid.data if isinstance(grid, Grid) else np.asarray(grid)
    data = np.ascontiguousarray(data, dtype="<f4")
    with open(path, "wb") as fh:
        np.lib.format.write_array(fh, data, version=(1, 0))


def read_npy(path: str | Path) -> np.ndarray:
    """Read an NPY v1.0 little-endian float32 C-order tensor.

    Anything else (other versions, dtypes, or Fortran layout) is rejected
    with an explicit error rather than converted silently.
    """
    with open(path, "rb") as fh:
        try:
            version = np.lib.format.read_magic(fh)
        except ValueError as exc:
            raise ValueError(f"{path}: not an NPY file ({exc})") from None
        if version != (1, 0):
            raise ValueError(f"{path}: unsupported NPY version {version}, need 1.0")
        shape, fortran_order, dtype = np.lib.format.read_array_header_1_0(fh)
        if fortran_order:
            raise ValueError(f"{path}: Fortran-order layout is not supported")
        if dtype != np.dtype("<f4"):
            raise ValueError(f"{path}: unsupported dtype {dtype}, need little-endian float32")
        count = int(np.prod(shape)) if shape else 1
        data = np.fromfile(fh, dtype=dtype, count=count)
        if data.size != count:
            raise ValueError(f"{path}: truncated payload, expected {count} values")
    return data.reshape(shape)


def grid_from_array(
    array: np.ndarray,
    box: BoundingBox,
    sigma: float,
    periodic: LatticeCell | None = None,
) -> Grid:
    """Wrap a ``(channels, H, W, D)`` tensor in a :class:`Grid` with geometry."""
    array = np.asarray(array)
    if array.ndim != 4:
        raise ValueError(f"expected a (channels, H, W, D) tensor, got shape {array.shape}")
    spec = GridSpec(tuple(array.shape[1:]), array.shape[0], box, sigma, periodic)
    return Grid(spec, np.ascontiguousarray(array))
