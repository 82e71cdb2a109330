import os
from dataclasses import replace

import hypothesis
import numpy as np
import pytest

from src.rasterizer.oracle import generate_scene
from src.rasterizer.scene import city_block, lod_swap, occlusion, skinned_strip, static_pan
from src.shader_ir.skinning import load_listing

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=500, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))

SMALL = (80, 45)


@pytest.fixture(scope="session")
def skinning_program():
    return load_listing("skinning.vsh", shader_id=1)


@pytest.fixture(scope="session")
def surface_program():
    return load_listing("surface.psh", shader_id=2)


@pytest.fixture(scope="session")
def static_pan_scene():
    return generate_scene(replace(static_pan(), resolution=SMALL))


@pytest.fixture(scope="session")
def still_scene():
    """static-pan with the camera held at its first keyframe."""
    script = static_pan()
    return generate_scene(replace(script, resolution=SMALL, camera=(script.camera[0],)))


@pytest.fixture(scope="session")
def strip_scene():
    return generate_scene(replace(skinned_strip(), resolution=(60, 45)))


@pytest.fixture(scope="session")
def city_scene():
    return generate_scene(replace(city_block(), resolution=SMALL))


@pytest.fixture(scope="session")
def occlusion_scene():
    return generate_scene(replace(occlusion(3), resolution=SMALL))


@pytest.fixture(scope="session")
def long_occlusion_scene():
    return generate_scene(replace(occlusion(12), resolution=SMALL))


@pytest.fixture(scope="session")
def lod_scene():
    return generate_scene(replace(lod_swap(), resolution=SMALL))

