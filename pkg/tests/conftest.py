import json
from pathlib import Path

import numpy as np
import pytest

from hbpt import synthgen as sg
from hbpt.imageio import Frame, rgb_to_yuv_image


@pytest.fixture(scope="session")
def scenario_dir(tmp_path_factory):
    """Generate each requested scenario once per session."""
    root = tmp_path_factory.mktemp("scenarios")
    cache = {}

    def build(name, **params):
        key = (name, tuple(sorted(params.items())))
        if key not in cache:
            out = root / f"{name}_{len(cache)}"
            truth = sg.write_scenario(sg.Scenario(name, **params), out)
            cache[key] = (out, truth)
        return cache[key]

    return build


def frame_from_rgb(rgb, index=0):
    rgb = np.asarray(rgb, dtype=np.uint8)
    return Frame(
        index=index,
        width=rgb.shape[1],
        height=rgb.shape[0],
        yuv=rgb_to_yuv_image(rgb),
        rgb=rgb,
    )


def flat_frame(color, width=40, height=30, index=0):
    rgb = np.tile(np.array(color, np.uint8), (height, width, 1))
    return frame_from_rgb(rgb, index)


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
