import struct

import numpy as np
import pytest

from cbrn.errors import (
    ArchiveInvariantError,
    BadMagicError,
    TrailingDataError,
    TruncatedArchiveError,
    UnsupportedVersionError,
)
from cbrn.model import CbrnSystem, SystemConfig
from cbrn.persistence import load_weights, save_weights
from cbrn.recall import chain_recall

from helpers import tiny_config


def expected_size(cfg, labels=()):
    """Byte count written out by hand from the archive layout."""
    size = 4 + 4  # magic, version
    size += 3 * 4 + 3 * 8  # width, height, neurons; three rates
    size += 4 + 8 * len(cfg.theta_series) + 8  # thetas, D
    size += 4 + sum(4 + len(n.encode()) for n in cfg.chain_order)
    per_neuron = 1 + 4 + 2 * 8 * cfg.image_width * cfg.image_height
    size += len(cfg.chain_order) * cfg.neurons_per_ball * per_neuron + sum(len(l.encode()) for l in labels)
    size += 4
    pairs = list(zip(cfg.chain_order, cfg.chain_order[1:]))
    for a, b in pairs:
        size += 2 * (4 + len(a.encode()) + 4 + len(b.encode()) + 8 * cfg.neurons_per_ball**2)
    return size


def assert_same(a, b):
    assert a.config == b.config
    for name in a.config.chain_order:
        x, y = a.balls[name], b.balls[name]
        assert x.w.tobytes() == y.w.tobytes()
        assert x.v.tobytes() == y.v.tobytes()
        assert x.learned.tolist() == y.learned.tolist()
        assert x.labels == y.labels
    assert a.links.keys() == b.links.keys()
    for key in a.links:
        assert a.links[key].u.tobytes() == b.links[key].u.tobytes()


class TestSave:
    def test_untrained_size_and_zero_payload(self):
        cfg = SystemConfig()
        data = save_weights(CbrnSystem(cfg))
        assert len(data) == expected_size(cfg)
        # unlearned neuron blocks (flag, empty label, w, v) are all zero bytes
        neurons = data[140 : 140 + 35 * 215_301]
        assert len(neurons) == 35 * 215_301 and neurons.count(0) == len(neurons)
        assert data[:4] == b"CBRN" and struct.unpack("<I", data[4:8]) == (1,)

    def test_untrained_size_frozen(self):
        # head 8 + 36 + 28 + names 68 = 140; neurons 35 * (5 + 2*8*13456) = 7_535_535;
        # link count 4; links 2*(410 + 411 + 421 + 428) = 3_340
        assert expected_size(SystemConfig()) == 7_539_019

    def test_deterministic(self, trained):
        assert save_weights(trained[0]) == save_weights(trained[0])

    def test_trained_size(self, trained, manifest):
        labels = [l for _, ls in manifest.attributes for l in ls]
        assert len(save_weights(trained[0])) == expected_size(SystemConfig(), labels)

    def test_tiny_header_bytes(self):
        data = save_weights(CbrnSystem(tiny_config()))
        head = struct.pack("<4sIIII3dIddd", b"CBRN", 1, 2, 2, 3, 1.0, 1.0, 1.0, 2, 100.0, 110.0, 72.0)
        assert data.startswith(head)
        assert data[len(head):len(head) + 14] == struct.pack("<I", 2) + struct.pack("<I", 1) + b"A" + struct.pack("<I", 1) + b"B"


class TestLoad:
    def test_round_trip_trained(self, trained):
        system, _ = trained
        assert_same(load_weights(save_weights(system)), system)

    def test_round_trip_untrained(self):
        system = CbrnSystem(tiny_config())
        assert_same(load_weights(save_weights(system)), system)

    def test_special_floats_bit_exact(self):
        system = CbrnSystem(tiny_config())
        system.ball("A").learned[0] = True
        system.ball("A").labels[0] = "ünï"
        system.ball("A").w[0] = [np.nextafter(0, 1), -0.0, 1e308, 1 / 3]
        system.link("B", "A").u[2, 1] = np.pi
        assert_same(load_weights(save_weights(system)), system)

    def test_trace_survives_reload(self, trained, dataset_vectors):
        system, _ = trained
        reloaded = load_weights(save_weights(system))
        a = chain_recall(system, 0, dataset_vectors["Color"][0])
        b = chain_recall(reloaded, 0, dataset_vectors["Color"][0])
        assert a.responses == b.responses
        assert [r.image for r in a.recalled] == [r.image for r in b.recalled]

    def test_bad_magic(self):
        with pytest.raises(BadMagicError, match="bad magic"):
            load_weights(b"XBRN" + save_weights(CbrnSystem(tiny_config()))[4:])

    def test_bad_version(self):
        data = bytearray(save_weights(CbrnSystem(tiny_config())))
        data[4:8] = struct.pack("<I", 2)
        with pytest.raises(UnsupportedVersionError):
            load_weights(bytes(data))

    @pytest.mark.parametrize("cut", [2, 10, 100, 300, -1])
    def test_truncated(self, cut):
        data = save_weights(CbrnSystem(tiny_config()))
        with pytest.raises(TruncatedArchiveError, match="truncated at offset") as info:
            load_weights(data[:cut])
        assert info.value.offset <= len(data[:cut])

    def test_trailing(self):
        with pytest.raises(TrailingDataError):
            load_weights(save_weights(CbrnSystem(tiny_config())) + b"\0")

    def test_unlearned_with_weights(self):
        system = CbrnSystem(tiny_config())
        system.ball("B").w[1, 0] = 0.5
        with pytest.raises(ArchiveInvariantError, match="unlearned"):
            load_weights(save_weights(system))

    def test_bad_config(self):
        data = bytearray(save_weights(CbrnSystem(tiny_config())))
        # D sits after magic, version, 3 u32, 3 f64, theta count and two thetas
        offset = 8 + 12 + 24 + 4 + 16
        data[offset:offset + 8] = struct.pack("<d", 500.0)
        with pytest.raises(ArchiveInvariantError, match="config"):
            load_weights(bytes(data))

    def test_bad_link_name(self):
        data = save_weights(CbrnSystem(tiny_config()))
        marker = struct.pack("<I", 1) + b"A" + struct.pack("<I", 1) + b"B" + b"\0" * 8
        i = data.rindex(marker[:10])
        broken = data[:i] + struct.pack("<I", 1) + b"A" + struct.pack("<I", 1) + b"A" + data[i + 10:]
        with pytest.raises(ArchiveInvariantError):
            load_weights(broken)
