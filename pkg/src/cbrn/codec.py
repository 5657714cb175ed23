"""Binary pattern images: PBM I/O, deterministic synthesis, vectorization.

The images stand in for rendered QR codes. Every downstream module consumes
`PatternVector`, the unit-norm real form produced by `vectorize`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from cbrn.errors import ManifestError, NormalizationError, PbmError

DEFAULT_WIDTH = 116
DEFAULT_HEIGHT = 116

DARK_CHAR = "█"
LIGHT_CHAR = "·"

# Attribute groups and their seven elements, in neuron-index order.
TABLE1: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("Color", ("red", "orange", "yellow", "green", "blue", "indigo", "purple")),
    ("Shape", ("square", "circle", "oval", "rectangle", "trapezoid", "triangle", "rhombus")),
    ("Volume", ("extra-large", "large", "medium", "small-medium", "small", "extra-small", "mini")),
    (
        "SpectacularView",
        ("Iguazu", "MaunaKea", "MilfordSound", "MonumentVY", "RockiesMT", "Tekapo", "Yellowknife"),
    ),
    (
        "Constellation",
        ("Andromeda", "Aquarius", "Cassiopeia", "Centaurus", "Cygnus", "Orion", "Perseus"),
    ),
)

SYNTHETIC = "synthetic"

_MASK64 = 0xFFFFFFFFFFFFFFFF
FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


@dataclass(frozen=True, eq=False)
class PatternImage:
    """A width x height grid of dark (True) / light (False) pixels."""

    width: int
    height: int
    bits: np.ndarray
    label: str = ""

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be positive, got {self.width}x{self.height}")
        bits = np.array(self.bits, dtype=bool)
        if bits.size != self.width * self.height:
            raise ValueError(
                f"expected {self.width * self.height} pixels for {self.width}x{self.height}, "
                f"got {bits.size}"
            )
        bits = bits.reshape(self.height, self.width)
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    def __eq__(self, other):
        if not isinstance(other, PatternImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.label == other.label
            and np.array_equal(self.bits, other.bits)
        )

    def same_pixels(self, other: PatternImage) -> bool:
        """Compare dimensions and bits, ignoring labels."""
        return (self.width, self.height) == (other.width, other.height) and np.array_equal(
            self.bits, other.bits
        )

    def with_label(self, label: str) -> PatternImage:
        return PatternImage(self.width, self.height, self.bits, label)

    @property
    def dark_count(self) -> int:
        return int(self.bits.sum())

    def to_ascii(self) -> str:
        return "\n".join(
            "".join(DARK_CHAR if b else LIGHT_CHAR for b in row) for row in self.bits
        )


@dataclass(frozen=True, eq=False)
class PatternVector:
    values: np.ndarray
    source_label: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).ravel()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def max_index(self) -> int:
        """Largest component index (M); the vector has M + 1 components."""
        return self.values.size - 1


# -- PBM ---------------------------------------------------------------------

_WS = b" \t\r\n\v\f"


def _skip_ws_and_comments(data: bytes, pos: int) -> int:
    while pos < len(data):
        c = data[pos : pos + 1]
        if c in (b" ", b"\t", b"\r", b"\n", b"\v", b"\f"):
            pos += 1
        elif c == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    return pos


def _read_dimension(data: bytes, pos: int, name: str) -> tuple[int, int]:
    pos = _skip_ws_and_comments(data, pos)
    start = pos
    while pos < len(data) and data[pos : pos + 1].isdigit():
        pos += 1
    if pos == start:
        raise PbmError(f"expected {name} in header", start)
    value = int(data[start:pos])
    if value < 1:
        raise PbmError(f"{name} must be positive, got {value}", start)
    if pos >= len(data) or data[pos] not in _WS:
        raise PbmError(f"expected whitespace after {name}", pos)
    return value, pos


def load_pbm(data: bytes, label: str = "") -> PatternImage:
    """Parse a P1 (ASCII) or P4 (binary) portable bitmap.

    PBM 1 (black) becomes a dark pixel. Errors carry the offending byte offset.
    """
    if len(data) < 2 or data[0:1] != b"P":
        raise PbmError("bad magic: not a portable bitmap", 0)
    kind = data[0:2]
    if kind in (b"P2", b"P3", b"P5", b"P6", b"P7"):
        raise PbmError(f"unsupported PBM type {kind.decode()}", 0)
    if kind not in (b"P1", b"P4"):
        raise PbmError("bad magic: not a portable bitmap", 0)
    if len(data) < 3 or data[2] not in _WS:
        raise PbmError("expected whitespace after magic", 2)
    width, pos = _read_dimension(data, 2, "width")
    height, pos = _read_dimension(data, pos, "height")
    n = width * height

    if kind == b"P4":
        pos += 1  # exactly one whitespace byte precedes the raster
        row_bytes = (width + 7) // 8
        expected = row_bytes * height
        payload = data[pos:]
        if len(payload) != expected:
            raise PbmError(
                f"payload is {len(payload)} bytes, expected {expected} for {width}x{height}",
                pos + min(len(payload), expected),
            )
        packed = np.frombuffer(payload, dtype=np.uint8).reshape(height, row_bytes)
        bits = np.unpackbits(packed, axis=1)[:, :width].astype(bool)
        return PatternImage(width, height, bits, label)

    pixels = np.zeros(n, dtype=bool)
    count = 0
    while True:
        pos = _skip_ws_and_comments(data, pos)
        if pos >= len(data):
            break
        c = data[pos : pos + 1]
        if c not in (b"0", b"1"):
            raise PbmError(f"unexpected byte {c!r} in P1 raster", pos)
        if count >= n:
            raise PbmError(f"more than {n} pixels in P1 raster", pos)
        pixels[count] = c == b"1"
        count += 1
        pos += 1
    if count != n:
        raise PbmError(f"P1 raster has {count} pixels, expected {n}", pos)
    return PatternImage(width, height, pixels, label)


def save_pbm(image: PatternImage) -> bytes:
    """Encode as binary P4, rows padded to whole bytes, MSB first."""
    header = f"P4\n{image.width} {image.height}\n".encode("ascii")
    return header + np.packbits(image.bits, axis=1).tobytes()


def read_pbm(path: str | Path) -> PatternImage:
    path = Path(path)
    return load_pbm(path.read_bytes(), label=path.stem)


def write_pbm(image: PatternImage, path: str | Path) -> None:
    Path(path).write_bytes(save_pbm(image))


# -- deterministic synthesis -------------------------------------------------


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def splitmix64_top_bits(seed: int, count: int) -> np.ndarray:
    """Top bit of each of the first `count` splitmix64 outputs from `seed`."""
    k = np.arange(1, count + 1, dtype=np.uint64)
    state = np.uint64(seed & _MASK64) + k * np.uint64(SPLITMIX_GAMMA)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(63)).astype(bool)


def synth_pattern(label: str, width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT) -> PatternImage:
    """Pseudo-random stand-in image, a pure function of (label, width, height)."""
    if not label:
        raise ValueError("label must be non-empty")
    seed = fnv1a64(label.encode("utf-8"))
    while True:
        bits = splitmix64_top_bits(seed, width * height)
        if bits.any():
            return PatternImage(width, height, bits, label)
        seed = (seed + 1) & _MASK64


# -- vectors -----------------------------------------------------------------


def vectorize(image: PatternImage) -> PatternVector:
    """Row-major dark->1, light->0, scaled to unit Euclidean norm."""
    raw = image.bits.ravel().astype(np.float64)
    norm = np.sqrt(raw @ raw)
    if norm == 0.0:
        raise NormalizationError(f"image {image.label!r} has no dark pixels; cannot normalize")
    return PatternVector(raw / norm, image.label)


def cosine(p: PatternVector | np.ndarray, q: PatternVector | np.ndarray) -> float:
    a = p.values if isinstance(p, PatternVector) else np.asarray(p, dtype=np.float64)
    b = q.values if isinstance(q, PatternVector) else np.asarray(q, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return float(a @ b)


# -- manifest ----------------------------------------------------------------


@dataclass
class DatasetManifest:
    """Ordered attributes, their element labels, and where each image comes from.

    `sources[(attribute, index)]` is a path or the marker "synthetic".
    """

    attributes: list[tuple[str, list[str]]]
    sources: dict[tuple[str, int], str] = field(default_factory=dict)

    def __post_init__(self):
        names = [name for name, _ in self.attributes]
        if len(set(names)) != len(names):
            raise ManifestError(f"duplicate attribute names in {names}")
        for name, labels in self.attributes:
            seen = set()
            for label in labels:
                if label in seen:
                    raise ManifestError(f"duplicate label {label!r} in attribute {name}")
                seen.add(label)
            for i in range(len(labels)):
                self.sources.setdefault((name, i), SYNTHETIC)

    @classmethod
    def default(cls) -> DatasetManifest:
        return cls([(name, list(labels)) for name, labels in TABLE1])

    @property
    def attribute_names(self) -> list[str]:
        return [name for name, _ in self.attributes]

    def labels(self, attribute: str) -> list[str]:
        for name, labels in self.attributes:
            if name == attribute:
                return labels
        raise ManifestError(f"unknown attribute {attribute!r}")

    def find(self, label: str) -> tuple[str, int]:
        """Locate a label; returns (attribute, element index)."""
        hits = [(name, labels.index(label)) for name, labels in self.attributes if label in labels]
        if not hits:
            raise ManifestError(f"unknown label {label!r}")
        if len(hits) > 1:
            raise ManifestError(f"label {label!r} is ambiguous across attributes")
        return hits[0]

    def to_text(self) -> str:
        lines = ["# attribute\tindex\tlabel\tsource"]
        for name, labels in self.attributes:
            for i, label in enumerate(labels):
                lines.append(f"{name}\t{i}\t{label}\t{self.sources[(name, i)]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> DatasetManifest:
        records: dict[str, dict[int, tuple[str, str]]] = {}
        order: list[str] = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ManifestError(f"line {lineno}: expected 4 tab-separated fields, got {len(parts)}")
            name, index, label, source = parts
            try:
                i = int(index)
            except ValueError:
                raise ManifestError(f"line {lineno}: bad index {index!r}") from None
            if i < 0:
                raise ManifestError(f"line {lineno}: negative index {i}")
            if not label:
                raise ManifestError(f"line {lineno}: empty label")
            if name not in records:
                records[name] = {}
                order.append(name)
            if i in records[name]:
                raise ManifestError(f"line {lineno}: duplicate element {name}[{i}]")
            records[name][i] = (label, source)

        attributes = []
        sources = {}
        for name in order:
            elems = records[name]
            for i in range(max(elems) + 1):
                if i not in elems:
                    raise ManifestError(f"attribute {name} is missing element index {i}")
            attributes.append((name, [elems[i][0] for i in range(len(elems))]))
            sources.update({(name, i): elems[i][1] for i in elems})
        return cls(attributes, sources)

    @classmethod
    def read(cls, path: str | Path) -> DatasetManifest:
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    def resolve(
        self,
        base_dir: str | Path | None = None,
        width: int = DEFAULT_WIDTH,
        height: int = DEFAULT_HEIGHT,
    ) -> dict[str, list[PatternImage]]:
        """Load or synthesize every element image. Relative paths resolve against base_dir."""
        base = Path(base_dir) if base_dir is not None else Path.cwd()
        out: dict[str, list[PatternImage]] = {}
        for name, labels in self.attributes:
            images = []
            for i, label in enumerate(labels):
                source = self.sources[(name, i)]
                if source == SYNTHETIC:
                    img = synth_pattern(label, width, height)
                else:
                    path = Path(source)
                    if not path.is_absolute():
                        path = base / path
                    try:
                        img = read_pbm(path).with_label(label)
                    except OSError as exc:
                        raise ManifestError(f"{name}[{i}] ({label}): cannot read {path}: {exc}") from exc
                images.append(img)
            out[name] = images
        return out


def safe_filename(label: str) -> str:
    """File stem for a label; characters outside a portable set become '_'."""
    return re.sub(r"[^A-Za-z0-9._-]", "_", label)


def image_from_rows(rows: Iterable[Sequence[int] | str], label: str = "") -> PatternImage:
    """Build an image from rows of 0/1 ints or '1'/'0' strings (1 = dark)."""
    grid = [[int(c) for c in row] for row in rows]
    height = len(grid)
    width = len(grid[0]) if grid else 0
    return PatternImage(width, height, np.array(grid, dtype=bool), label)
