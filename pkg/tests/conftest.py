import os
import sys

# before any module builds the global cache or reads settings
os.environ["ENVIRONMENT"] = "testing"
os.environ.pop("KV_REST_API_URL", None)
os.environ.pop("KV_REST_API_TOKEN", None)
os.environ.pop("SENTRY_DSN", None)

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from models.component_model import ComponentModel  # noqa: E402
from models.size_law import SizeDistribution  # noqa: E402
from models.system_config import Frame, JobClass, SystemConfig  # noqa: E402


def make_config(d=2, k=1, sigma=1.0, dist=None, frame=None, speed=0.0) -> SystemConfig:
    dist = dist or SizeDistribution.exponential(1.0)
    return SystemConfig(
        classes=(JobClass(d=d, k=k, sigma=sigma, sizes=ComponentModel.iid(dist)),),
        frame=frame or Frame(),
        speed=speed,
    )


def config_dict(d=2, k=1, sigma=1.0, dist=None, left=None, right=None, speed=0.0) -> dict:
    sizes = {"kind": "iid", "dist": dist or {"type": "exp", "rate": 1.0}}
    return {
        "spec_version": 1,
        "classes": [{"d": d, "k": k, "sigma": sigma, "sizes": sizes}],
        "frame": {"left": left, "right": right},
        "speed": speed,
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def exp_free():
    """d=2, k=1, iid Exp(1), lambda=1, free frame, v=0."""
    return make_config()


@pytest.fixture
def exp_left():
    """d=2, k=1, iid Exp(1), lambda=1, frame [0, inf), v=2."""
    return make_config(frame=Frame(left=0.0), speed=2.0)


@pytest.fixture
def exp_right():
    """d=2, k=1, iid Exp(1), lambda=1, frame (-inf, 0], v=0.5."""
    return make_config(frame=Frame(right=0.0), speed=0.5)


@pytest.fixture
def single_right():
    """Single-particle jobs d=k=1, Exp(1), frame (-inf, 0], v=0.5; fixed point 1 - e^w."""
    return make_config(d=1, k=1, frame=Frame(right=0.0), speed=0.5)


@pytest.fixture
def det_class():
    return JobClass(d=2, k=1, sigma=1.0, sizes=ComponentModel.iid(SizeDistribution.deterministic(1.0)))


@pytest.fixture
def exp_class():
    return JobClass(d=2, k=1, sigma=1.0, sizes=ComponentModel.iid(SizeDistribution.exponential(1.0)))


@pytest.fixture
def config_file(tmp_path):
    """Writes a config document and returns its path."""
    import json

    def write(doc: dict, name: str = "config.json") -> str:
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        return str(path)

    return write
