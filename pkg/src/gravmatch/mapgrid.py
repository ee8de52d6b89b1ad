"""Regular lon/lat gravity-anomaly grids and search-window geometry.

A map is a rectangular grid of cell-center gravity values (mGal).  Cell
(row i, col j) is centered at (origin_lon + j*res_lon, origin_lat + i*res_lat),
so rows advance in latitude and columns in longitude.  Values are stored
row-major with row 0 at the origin latitude.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedFileError, OutOfBoundsError, WindowClippedError

MAGIC = b"GMAP0001"

# Mean absolute gravity added to synthetic anomaly fields (mGal).
BASE_GRAVITY_MGAL = 9.79e5


@dataclass(frozen=True)
class CellIndex:
    """Grid cell address: row indexes latitude, col indexes longitude."""

    row: int
    col: int


@dataclass(frozen=True)
class GravityMap:
    """Immutable regular grid of gravity values.

    values has shape (nrows, ncols) and is locked after construction.
    """

    origin_lon: float
    origin_lat: float
    res_lon: float
    res_lat: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.res_lon <= 0 or self.res_lat <= 0:
            raise ValueError("map resolution must be positive")
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != 2 or vals.size == 0:
            raise ValueError("map values must be a non-empty 2-D array")
        if not np.all(np.isfinite(vals)):
            raise ValueError("map values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    def cell_center(self, cell: CellIndex) -> tuple[float, float]:
        """(lon, lat) of a cell center."""
        return (
            self.origin_lon + cell.col * self.res_lon,
            self.origin_lat + cell.row * self.res_lat,
        )


def _snap(offset: float, count: int) -> int:
    """Nearest index for a fractional offset; half-way ties take the lower index."""
    idx = int(np.ceil(offset - 0.5))
    if idx < 0 or idx >= count:
        raise OutOfBoundsError(f"index {idx} outside [0, {count})")
    return idx


def nearest_cell(grav_map: GravityMap, lon: float, lat: float) -> CellIndex:
    """Cell whose center is nearest to (lon, lat), per-axis independently.

    Positions exactly half way between two centers round toward the origin.
    Raises OutOfBoundsError outside the half-cell-padded map extent.
    """
    try:
        col = _snap((lon - grav_map.origin_lon) / grav_map.res_lon, grav_map.ncols)
        row = _snap((lat - grav_map.origin_lat) / grav_map.res_lat, grav_map.nrows)
    except OutOfBoundsError:
        raise OutOfBoundsError(f"position ({lon}, {lat}) outside map") from None
    return CellIndex(row, col)


def lookup(grav_map: GravityMap, lon: float, lat: float) -> float:
    """Gravity value of the cell nearest to (lon, lat)."""
    cell = nearest_cell(grav_map, lon, lat)
    return float(grav_map.values[cell.row, cell.col])


@dataclass(frozen=True)
class GridWindow:
    """n x n block of cells around a center cell, labeled 1..n^2 row-major.

    Label j sits at row/col offset (m_row, m_col) from the center with
    m_row, m_col in -h..h, h = (n-1)/2, and j = (m_row+h)*n + (m_col+h) + 1.
    The center cell carries label (n^2+1)/2.  positions[j-1] is the (lon, lat)
    center of cell j and gravity[j-1] its map value.
    """

    time_index: int
    center: CellIndex
    n: int
    res_lon: float
    res_lat: float
    positions: np.ndarray = field(repr=False)
    gravity: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.positions.setflags(write=False)
        self.gravity.setflags(write=False)

    @property
    def center_label(self) -> int:
        return (self.n * self.n + 1) // 2

    def grid_values(self) -> np.ndarray:
        """Gravity values as an (n, n) array indexed [row_offset, col_offset]."""
        return self.gravity.reshape(self.n, self.n)

    def cell_position(self, label: int) -> tuple[float, float]:
        lon, lat = self.positions[label - 1]
        return float(lon), float(lat)


def build_window(
    grav_map: GravityMap, lon: float, lat: float, n: int, time_index: int = 0
) -> GridWindow:
    """Window of n x n cells centered on the cell nearest (lon, lat).

    n must be odd and >= 3.  Raises WindowClippedError if any window cell
    would fall outside the map (treated upstream as a divergent run, never
    silently truncated).
    """
    if n < 3 or n % 2 == 0:
        raise ValueError("window size n must be odd and >= 3")
    center = nearest_cell(grav_map, lon, lat)
    h = (n - 1) // 2
    if (
        center.row - h < 0
        or center.col - h < 0
        or center.row + h >= grav_map.nrows
        or center.col + h >= grav_map.ncols
    ):
        raise WindowClippedError(
            f"window {n}x{n} at cell ({center.row}, {center.col}) exceeds map edge"
        )
    offs = np.arange(-h, h + 1)
    lons = grav_map.origin_lon + (center.col + offs) * grav_map.res_lon
    lats = grav_map.origin_lat + (center.row + offs) * grav_map.res_lat
    # Row-major over (m_row, m_col): label j-1 = (m_row+h)*n + (m_col+h).
    grid_lon, grid_lat = np.meshgrid(lons, lats)
    positions = np.column_stack([grid_lon.ravel(), grid_lat.ravel()])
    block = grav_map.values[
        center.row - h : center.row + h + 1, center.col - h : center.col + h + 1
    ]
    return GridWindow(
        time_index=time_index,
        center=center,
        n=n,
        res_lon=grav_map.res_lon,
        res_lat=grav_map.res_lat,
        positions=positions,
        gravity=block.ravel().astype(np.float64),
    )


def subcell_offsets(o: int, res_lon: float, res_lat: float) -> np.ndarray:
    """(o^2, 2) lon/lat offsets of the o x o sub-cell lattice inside one cell.

    Sub-cells are labeled 1..o^2 row-major like window cells; label (o^2+1)/2
    coincides with the parent cell center, and spacing is res/o per axis, so
    every sub-cell center stays strictly inside the parent cell.
    """
    if o < 1 or o % 2 == 0:
        raise ValueError("sub-cell factor o must be odd and >= 1")
    steps = np.arange(o) - (o - 1) / 2.0
    dlon, dlat = np.meshgrid(steps * res_lon / o, steps * res_lat / o, indexing="xy")
    return np.column_stack([dlon.ravel(), dlat.ravel()])


def subcell_centers(window: GridWindow, label: int, o: int) -> np.ndarray:
    """(o^2, 2) sub-cell center positions of window cell `label`.

    All sub-cells inherit the parent cell's gravity value; o=1 degenerates to
    the cell center itself.
    """
    if not 1 <= label <= window.n * window.n:
        raise ValueError(f"cell label {label} outside 1..{window.n * window.n}")
    return window.positions[label - 1] + subcell_offsets(o, window.res_lon, window.res_lat)


def downsample(grav_map: GravityMap, factor: int) -> GravityMap:
    """Coarser map keeping every factor-th row and column, starting at (0, 0)."""
    if factor < 1:
        raise ValueError("downsample factor must be >= 1")
    return GravityMap(
        origin_lon=grav_map.origin_lon,
        origin_lat=grav_map.origin_lat,
        res_lon=grav_map.res_lon * factor,
        res_lat=grav_map.res_lat * factor,
        values=grav_map.values[::factor, ::factor].copy(),
    )


def synth_map(
    extent_deg: float,
    res_deg: float,
    roughness: str = "rough",
    seed: int = 0,
    origin_lon: float = 110.0,
    origin_lat: float = -40.0,
    n_bumps: int | None = None,
) -> GravityMap:
    """Synthetic gravity field: a sum of random Gaussian bumps plus a constant.

    roughness="rough" superimposes 200 bumps with amplitudes U(-40, 40) mGal
    and widths U(2, 10) cells; "smooth" uses 40 bumps, U(-8, 8) mGal,
    U(20, 60) cells.  The same seed always reproduces the same map.  The grid
    must come out at least 64 x 64 cells.  n_bumps overrides the bump count
    (0 gives a constant field).
    """
    if roughness not in ("rough", "smooth"):
        raise ValueError("roughness must be 'rough' or 'smooth'")
    size = int(round(extent_deg / res_deg))
    if size < 64:
        raise ValueError("synthetic map must span at least 64x64 cells")
    if roughness == "rough":
        count, amp, width_cells = 200, 40.0, (2.0, 10.0)
    else:
        count, amp, width_cells = 40, 8.0, (20.0, 60.0)
    if n_bumps is not None:
        count = int(n_bumps)
    rng = np.random.default_rng(seed)
    lons = origin_lon + np.arange(size) * res_deg
    lats = origin_lat + np.arange(size) * res_deg
    glon, glat = np.meshgrid(lons, lats)
    values = np.full((size, size), BASE_GRAVITY_MGAL)
    for _ in range(count):
        c_lon = rng.uniform(lons[0], lons[-1])
        c_lat = rng.uniform(lats[0], lats[-1])
        a = rng.uniform(-amp, amp)
        w = rng.uniform(*width_cells) * res_deg
        values += a * np.exp(-((glon - c_lon) ** 2 + (glat - c_lat) ** 2) / (2.0 * w * w))
    return GravityMap(origin_lon, origin_lat, res_deg, res_deg, values)


def save_map(grav_map: GravityMap, path: str) -> None:
    """Write the binary map format: magic, geometry header, row-major values.

    Layout: 8-byte magic "GMAP0001"; little-endian float64 origin_lon,
    origin_lat, res_lon, res_lat; little-endian uint64 nrows, ncols; then
    nrows*ncols little-endian float64 gravity values (mGal), row-major.
    """
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(
            struct.pack(
                "<ddddQQ",
                grav_map.origin_lon,
                grav_map.origin_lat,
                grav_map.res_lon,
                grav_map.res_lat,
                grav_map.nrows,
                grav_map.ncols,
            )
        )
        fh.write(np.ascontiguousarray(grav_map.values, dtype="<f8").tobytes())


def load_map(path: str) -> GravityMap:
    """Read the binary map format; raises MalformedFileError on any defect."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise MalformedFileError(f"{path}: bad magic bytes")
    header_end = len(MAGIC) + struct.calcsize("<ddddQQ")
    if len(blob) < header_end:
        raise MalformedFileError(f"{path}: truncated header")
    origin_lon, origin_lat, res_lon, res_lat, nrows, ncols = struct.unpack(
        "<ddddQQ", blob[len(MAGIC) : header_end]
    )
    expected = header_end + nrows * ncols * 8
    if len(blob) != expected:
        raise MalformedFileError(
            f"{path}: payload is {len(blob)} bytes, expected {expected}"
        )
    values = np.frombuffer(blob[header_end:], dtype="<f8").reshape(nrows, ncols)
    if not np.all(np.isfinite(values)):
        raise MalformedFileError(f"{path}: non-finite gravity values")
    try:
        return GravityMap(origin_lon, origin_lat, res_lon, res_lat, values.copy())
    except ValueError as exc:
        raise MalformedFileError(f"{path}: {exc}") from None


def load_map_csv(path: str) -> GravityMap:
    """Read the plain-text map format.

    The first numeric row holds origin_lon, origin_lat, res_lon, res_lat (an
    optional leading row naming those fields is skipped); each following row
    holds one grid row of gravity values.
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise MalformedFileError(f"{path}: empty file")
    start = 0
    try:
        header = [float(tok) for tok in lines[0].split(",")]
    except ValueError:
        start = 1
        if len(lines) < 2:
            raise MalformedFileError(f"{path}: missing geometry row") from None
        try:
            header = [float(tok) for tok in lines[1].split(",")]
        except ValueError:
            raise MalformedFileError(f"{path}: unreadable geometry row") from None
    if len(header) != 4:
        raise MalformedFileError(f"{path}: geometry row needs exactly 4 fields")
    try:
        rows = [
            [float(tok) for tok in ln.split(",")] for ln in lines[start + 1 :]
        ]
    except ValueError:
        raise MalformedFileError(f"{path}: unreadable value row") from None
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise MalformedFileError(f"{path}: ragged or missing value rows")
    values = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise MalformedFileError(f"{path}: non-finite gravity values")
    try:
        return GravityMap(header[0], header[1], header[2], header[3], values)
    except ValueError as exc:
        raise MalformedFileError(f"{path}: {exc}") from None


def read_map(path: str) -> GravityMap:
    """Load a map file, choosing binary or CSV by extension (.csv = text)."""
    if str(path).lower().endswith(".csv"):
        return load_map_csv(path)
    return load_map(path)
