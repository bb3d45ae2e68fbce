import numpy as np
import pytest

from flowphys import synth


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def grid64():
    return synth.GridSpec(64, 64)


@pytest.fixture
def rotation_seq(grid64):
    """Rendered solid-body rotation, 8 frames at 64x64, fixed seed."""
    flow = synth.rigid_rotation_flow(grid64, 0.05)
    return synth.render_advected_sequence(grid64, flow, 8, 7)
