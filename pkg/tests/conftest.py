import os

import numpy as np
import pytest
from hypothesis import settings

from throatfind.voxgrid import SegmentedImage

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def box_image(shape, void_slices=()):
    """Grain block with void carved at the given slice tuples."""
    void = np.zeros(shape, bool)
    for s in void_slices:
        void[s] = True
    return SegmentedImage.from_void_mask(void)


@pytest.fixture
def all_void():
    return SegmentedImage.from_void_mask(np.ones((3, 3, 3), bool))


@pytest.fixture
def all_grain():
    return SegmentedImage.from_void_mask(np.zeros((3, 3, 3), bool))
