"""Occupancy grids and PGM map files.

``cells[j, i]`` is the occupancy of the cell in column ``i`` and row ``j``;
row 0 is the bottom of the map (smallest y in the grid frame), so the first
image row of a PGM file maps to the last grid row. Darker pixels mean higher
occupancy: ``occ = (maxval - pixel) / maxval``.

Sidecar metadata is a text file of ``key: value`` lines with the keys
``resolution``, ``origin_x``, ``origin_y``, ``origin_theta`` and
``occupied_threshold``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import ndimage

from fuseloc.geometry import Pose2D

META_KEYS = ("resolution", "origin_x", "origin_y", "origin_theta", "occupied_threshold")


class MapFormatError(ValueError):
    pass


@dataclass(eq=False)
class OccupancyGrid:
    """Regular grid of occupancy values in ``[0, 1]`` anchored at ``origin``.

    ``origin`` is the world pose of the outer corner of cell ``(0, 0)``.
    """

    cells: np.ndarray
    resolution: float
    origin: Pose2D = field(default_factory=lambda: Pose2D(0.0, 0.0, 0.0))
    occupied_threshold: float = 0.65

    def __post_init__(self):
        cells = np.array(self.cells, dtype=float)
        if cells.ndim != 2 or cells.size == 0:
            raise ValueError("cells must be a non-empty 2-D array")
        if not (math.isfinite(self.resolution) and self.resolution > 0):
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        if np.any((cells < 0) | (cells > 1)) or not np.all(np.isfinite(cells)):
            raise ValueError("occupancy values must lie in [0, 1]")
        cells.flags.writeable = False
        self.cells = cells
        self.resolution = float(self.resolution)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @cached_property
    def occupied(self) -> np.ndarray:
        return self.cells >= self.occupied_threshold

    @cached_property
    def clearance(self) -> np.ndarray:
        """Distance in cells from each cell centre to the nearest occupied centre."""
        if not self.occupied.any():
            return np.full(self.cells.shape, np.inf)
        return ndimage.distance_transform_edt(~self.occupied)

    def world_to_grid(self, x, y):
        """Continuous grid coordinates (in cells) of world points."""
        dx = np.asarray(x, dtype=float) - self.origin.x
        dy = np.asarray(y, dtype=float) - self.origin.y
        c, s = math.cos(self.origin.theta), math.sin(self.origin.theta)
        return (c * dx + s * dy) / self.resolution, (-s * dx + c * dy) / self.resolution

    def grid_to_world(self, gx, gy):
        c, s = math.cos(self.origin.theta), math.sin(self.origin.theta)
        gx = np.asarray(gx, dtype=float) * self.resolution
        gy = np.asarray(gy, dtype=float) * self.resolution
        return self.origin.x + c * gx - s * gy, self.origin.y + s * gx + c * gy

    def contains(self, x, y):
        gx, gy = self.world_to_grid(x, y)
        return (gx >= 0) & (gx < self.width) & (gy >= 0) & (gy < self.height)

    def is_free(self, x, y):
        """True for points inside the map whose cell is below the threshold."""
        gx, gy = self.world_to_grid(x, y)
        inside = (gx >= 0) & (gx < self.width) & (gy >= 0) & (gy < self.height)
        i = np.clip(np.floor(gx).astype(int), 0, self.width - 1)
        j = np.clip(np.floor(gy).astype(int), 0, self.height - 1)
        return inside & ~self.occupied[j, i]

    def free_cell_centers(self) -> np.ndarray:
        j, i = np.nonzero(~self.occupied)
        x, y = self.grid_to_world(i + 0.5, j + 0.5)
        return np.column_stack([x, y])


def _pgm_tokens(data: bytes, count: int):
    """Read ``count`` header tokens, skipping comments; return tokens and body offset."""
    tokens, pos, n = [], 0, len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise MapFormatError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Return ``(pixels, maxval)`` for a P2 or P5 file; pixels are top row first."""
    data = Path(path).read_bytes()
    if data[:2] not in (b"P2", b"P5"):
        raise MapFormatError(f"{path}: not a P2/P5 PGM file")
    try:
        tokens, pos = _pgm_tokens(data, 4)
        width, height, maxval = (int(tok) for tok in tokens[1:])
    except ValueError as exc:
        raise MapFormatError(f"{path}: bad PGM header ({exc})") from None
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise MapFormatError(f"{path}: bad PGM dimensions {width}x{height} maxval {maxval}")
    count = width * height
    if data[:2] == b"P2":
        try:
            values = [int(tok) for tok in data[pos:].split()]
        except ValueError:
            raise MapFormatError(f"{path}: non-integer pixel value") from None
        if len(values) != count:
            raise MapFormatError(f"{path}: expected {count} pixels, found {len(values)}")
        pixels = np.array(values, dtype=np.int64)
    else:
        body = data[pos + 1:]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        if len(body) < count * dtype.itemsize:
            raise MapFormatError(f"{path}: expected {count} pixels, body too short")
        pixels = np.frombuffer(body, dtype=dtype, count=count).astype(np.int64)
    if pixels.min() < 0 or pixels.max() > maxval:
        raise MapFormatError(f"{path}: pixel value outside [0, {maxval}]")
    return pixels.reshape(height, width), maxval


def write_pgm(path, pixels: np.ndarray, maxval: int = 255) -> None:
    pixels = np.asarray(pixels)
    height, width = pixels.shape
    header = f"P5\n{width} {height}\n{maxval}\n".encode()
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    Path(path).write_bytes(header + pixels.astype(dtype).tobytes())


def read_map_meta(path) -> dict:
    meta = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = ":" if ":" in line else "="
        if sep not in line:
            raise MapFormatError(f"{path}:{lineno}: expected 'key: value'")
        key, value = (part.strip() for part in line.split(sep, 1))
        try:
            meta[key] = float(value)
        except ValueError:
            meta[key] = value
    missing = [k for k in META_KEYS if k not in meta]
    if missing:
        raise MapFormatError(f"{path}: missing metadata keys {', '.join(missing)}")
    for k in META_KEYS:
        if not isinstance(meta[k], float):
            raise MapFormatError(f"{path}: {k} must be numeric")
    return meta


def load_map(pgm_path, meta_path) -> OccupancyGrid:
    """Load a PGM image plus its metadata sidecar into an :class:`OccupancyGrid`."""
    meta = read_map_meta(meta_path)
    pixels, maxval = read_pgm(pgm_path)
    occ = (maxval - pixels[::-1].astype(float)) / maxval
    try:
        return OccupancyGrid(
            occ,
            meta["resolution"],
            Pose2D(meta["origin_x"], meta["origin_y"], meta["origin_theta"]),
            meta["occupied_threshold"],
        )
    except ValueError as exc:
        raise MapFormatError(f"{meta_path}: {exc}") from None


def save_map(grid: OccupancyGrid, pgm_path, meta_path) -> None:
    pixels = np.rint((1.0 - grid.cells[::-1]) * 255).astype(int)
    write_pgm(pgm_path, pixels)
    lines = [
        f"resolution: {grid.resolution!r}",
        f"origin_x: {grid.origin.x!r}",
        f"origin_y: {grid.origin.y!r}",
        f"origin_theta: {grid.origin.theta!r}",
        f"occupied_threshold: {grid.occupied_threshold!r}",
    ]
    Path(meta_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def box_room(width: float, height: float, resolution: float = 0.05,
             origin=(0.0, 0.0), wall: float = 0.1, boxes=()) -> OccupancyGrid:
    """Walled rectangular room with optional solid boxes ``(x0, y0, x1, y1)``.

    ``origin`` is the world position of the room's lower-left outer corner.
    """
    nx = int(round(width / resolution))
    ny = int(round(height / resolution))
    cells = np.zeros((ny, nx))
    k = max(1, int(round(wall / resolution)))
    cells[:k, :] = cells[-k:, :] = 1.0
    cells[:, :k] = cells[:, -k:] = 1.0
    ox, oy = origin
    for x0, y0, x1, y1 in boxes:
        i0 = int(math.floor((x0 - ox) / resolution))
        i1 = int(math.ceil((x1 - ox) / resolution))
        j0 = int(math.floor((y0 - oy) / resolution))
        j1 = int(math.ceil((y1 - oy) / resolution))
        cells[max(j0, 0):max(j1, 0), max(i0, 0):max(i1, 0)] = 1.0
    return OccupancyGrid(cells, resolution, Pose2D(ox, oy, 0.0))
