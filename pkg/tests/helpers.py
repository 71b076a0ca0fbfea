import numpy as np

from bpstereo.core import Dataset, LightingConfig
from bpstereo.synth import tilted_lights


def make_dataset(images, mask=None, lighting=None):
    images = np.asarray(images, dtype=np.float64)
    if mask is None:
        mask = np.ones(images.shape[1:], dtype=bool)
    lighting = lighting or LightingConfig.from_directions(tilted_lights(count=images.shape[0]))
    return Dataset(images, mask, lighting)
