"""Binary weight archive.

Layout (little-endian; u32 counts, f64 reals, text = u32 length + UTF-8):

    "CBRN" | version u32 = 1
    width u32 | height u32 | neurons_per_ball u32
    eps_w f64 | eps_v f64 | lambda_cb f64
    theta count u32 | theta f64 * count | threshold_d f64
    ball count u32 | ball name text * count
    per ball, per neuron: learned u8 | label text | w f64 * (w*h) | v f64 * (w*h)
    link count u32 | per link: from text | to text | u f64 * (n*n), row = target neuron

An unlearned neuron is written with an empty label.
"""

from __future__ import annotations

import struct

import numpy as np

from cbrn.errors import (
    ArchiveInvariantError,
    BadMagicError,
    TrailingDataError,
    TruncatedArchiveError,
    UnsupportedVersionError,
)
from cbrn.model import CbrnSystem, CrossLink, CueBall, SystemConfig

MAGIC = b"CBRN"
VERSION = 1

_U8 = struct.Struct("<B")
_U32 = struct.Struct("<I")
_F64 = struct.Struct("<d")


def _text(s: str) -> bytes:
    raw = s.encode("utf-8")
    return _U32.pack(len(raw)) + raw


def _f64_array(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def link_order(chain_order: tuple[str, ...]) -> list[tuple[str, str]]:
    """Canonical link order: each neighbour pair forward, then backward."""
    out = []
    for a, b in zip(chain_order, chain_order[1:]):
        out += [(a, b), (b, a)]
    return out


def save_weights(system: CbrnSystem) -> bytes:
    cfg = system.config
    parts = [
        MAGIC,
        _U32.pack(VERSION),
        _U32.pack(cfg.image_width),
        _U32.pack(cfg.image_height),
        _U32.pack(cfg.neurons_per_ball),
        _F64.pack(cfg.eps_w),
        _F64.pack(cfg.eps_v),
        _F64.pack(cfg.lambda_cb),
        _U32.pack(len(cfg.theta_series)),
        *(_F64.pack(t) for t in cfg.theta_series),
        _F64.pack(cfg.threshold_d),
        _U32.pack(len(cfg.chain_order)),
        *(_text(name) for name in cfg.chain_order),
    ]
    for ball in system.iter_balls():
        for i in range(ball.n_neurons):
            parts.append(_U8.pack(1 if ball.learned[i] else 0))
            parts.append(_text(ball.labels[i] or ""))
            parts.append(_f64_array(ball.w[i]))
            parts.append(_f64_array(ball.v[i]))
    keys = link_order(cfg.chain_order)
    parts.append(_U32.pack(len(keys)))
    for a, b in keys:
        parts += [_text(a), _text(b), _f64_array(system.links[(a, b)].u)]
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedArchiveError(self.pos, self.pos + n - len(self.data))
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return _U8.unpack(self.take(1))[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def f64(self) -> float:
        return _F64.unpack(self.take(8))[0]

    def text(self) -> str:
        start = self.pos
        raw = self.take(self.u32())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ArchiveInvariantError(f"invalid UTF-8 text at offset {start}") from exc

    def f64_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)


def load_weights(data: bytes) -> CbrnSystem:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise BadMagicError("bad magic: not a CBRN weight archive")
    version = r.u32()
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported archive version {version}")

    width, height, n = r.u32(), r.u32(), r.u32()
    eps_w, eps_v, lambda_cb = r.f64(), r.f64(), r.f64()
    thetas = tuple(r.f64() for _ in range(r.u32()))
    threshold_d = r.f64()
    names = tuple(r.text() for _ in range(r.u32()))
    try:
        cfg = SystemConfig(width, height, n, eps_w, eps_v, lambda_cb, thetas, threshold_d, names)
    except ValueError as exc:
        raise ArchiveInvariantError(f"invalid config block: {exc}") from exc

    dim = cfg.dim
    balls = {}
    for name in names:
        ball = CueBall.empty(name, n, dim)
        for i in range(n):
            flag = r.u8()
            if flag not in (0, 1):
                raise ArchiveInvariantError(f"{name} neuron {i}: learned flag is {flag}")
            label = r.text()
            ball.w[i] = r.f64_array(dim)
            ball.v[i] = r.f64_array(dim)
            ball.learned[i] = bool(flag)
            if flag:
                ball.labels[i] = label or None
            elif label or ball.w[i].any() or ball.v[i].any():
                raise ArchiveInvariantError(f"{name} neuron {i}: unlearned but has weights or a label")
        balls[name] = ball

    expected = link_order(names)
    count = r.u32()
    if count != len(expected):
        raise ArchiveInvariantError(f"expected {len(expected)} links, archive has {count}")
    links = {}
    for _ in range(count):
        a, b = r.text(), r.text()
        if (a, b) not in expected:
            raise ArchiveInvariantError(f"link {a}->{b} does not join chain neighbours")
        if (a, b) in links:
            raise ArchiveInvariantError(f"duplicate link {a}->{b}")
        links[(a, b)] = CrossLink(a, b, r.f64_array(n * n).reshape(n, n))

    if r.pos != len(data):
        raise TrailingDataError(f"{len(data) - r.pos} trailing bytes after offset {r.pos}")
    return CbrnSystem(cfg, balls, links)

