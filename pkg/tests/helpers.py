import numpy as np

from cbrn.model import SystemConfig


def tiny_config(**kw):
    """2x2 images, three neurons per ball, balls A and B."""
    base = dict(image_width=2, image_height=2, neurons_per_ball=3, chain_order=("A", "B"))
    base.update(kw)
    return SystemConfig(**base)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)
