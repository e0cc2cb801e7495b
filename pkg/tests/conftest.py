import numpy as np
import pytest

from normgen.codec import NormalField
from normgen.shapes import ShapeSpec, render_primitive


def analytic_sphere_field(size=128, center=(64.0, 64.0), radius=50.0) -> NormalField:
    """Float sphere normal field built directly from the closed form."""
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    dx, dy = (x - center[0]) / radius, (y - center[1]) / radius
    d2 = dx * dx + dy * dy
    inside = d2 < 1.0
    vec = np.zeros((size, size, 3))
    vec[..., 2] = 1.0
    vec[inside, 0] = dx[inside]
    vec[inside, 1] = dy[inside]
    vec[inside, 2] = np.sqrt(1.0 - d2[inside])
    return NormalField(vectors=vec, foreground=inside)


def analytic_torus_field(size=128, center=(64.0, 64.0), ring=40.0, tube=14.0):
    """Float torus normal field plus the analytic curvature |2*rho - R| / (2*a*rho)."""
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    dx, dy = x - center[0], y - center[1]
    rho = np.hypot(dx, dy)
    q = (rho - ring) / tube
    inside = np.abs(q) < 1.0
    vec = np.zeros((size, size, 3))
    vec[..., 2] = 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(rho > 0, q / np.maximum(rho, 1e-12), 0.0)
        kappa = np.abs(2.0 * rho - ring) / (2.0 * tube * np.maximum(rho, 1e-12))
    vec[inside, 0] = (scale * dx)[inside]
    vec[inside, 1] = (scale * dy)[inside]
    vec[inside, 2] = np.sqrt(np.clip(1.0 - q * q, 0.0, 1.0))[inside]
    return NormalField(vectors=vec, foreground=inside), kappa, q


@pytest.fixture(scope="session")
def sphere_map():
    return render_primitive(ShapeSpec("sphere", size=128, center=(64, 64), radius=50))


@pytest.fixture(scope="session")
def torus_map():
    return render_primitive(
        ShapeSpec("torus", size=128, center=(64, 64), radius=14, ring_radius=40)
    )


def small_specs(size=64, count=16):
    """Mixed sphere/torus specs sized for fast dataset tests."""
    specs = []
    rng = np.random.default_rng(7)
    for i in range(count):
        if i % 2 == 0:
            r = float(rng.uniform(14, 24))
            c = tuple(rng.uniform(r + 3, size - 4 - r, size=2))
            specs.append(ShapeSpec("sphere", size=size, center=c, radius=r))
        else:
            ring = float(rng.uniform(13, 17))
            tube = float(rng.uniform(5, 7))
            c = tuple(rng.uniform(ring + tube + 3, size - 4 - ring - tube, size=2))
            specs.append(
                ShapeSpec("torus", size=size, center=c, radius=tube, ring_radius=ring)
            )
    return specs


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    from normgen.dataset import build_dataset

    root = tmp_path_factory.mktemp("tinyset")
    manifest = build_dataset(small_specs(size=64, count=8), root, seed=11, val_every=4)
    return manifest
