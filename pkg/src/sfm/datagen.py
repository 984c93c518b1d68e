"""
Deterministic instance generators: the two-moons point cloud for
semi-supervised clustering and 8-neighbour grid graphs for segmentation.
All randomness comes from a PCG64 generator seeded by the caller.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
from PIL import Image

from ..core.errors import EmptySeeds, InstanceError, InvalidCounts
from .functions import (CutOracle, KernelMatrix, LabelPrior, MutualInfoOracle, WeightedGraph,
                        grid_edge_index)
from .sets import ElementSet

MOON_CENTRES = {1: (-0.5, 1.0), 2: (0.5, -1.0)}
SEED_PIN = 10.0


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class TwoMoonsDataset:
    points: np.ndarray
    moon_id: np.ndarray
    labels: Dict[int, bool]
    seed: int

    @property
    def p(self) -> int:
        return self.points.shape[0]

    @property
    def p0(self) -> int:
        return len(self.labels)


def gen_two_moons(p: int, p0: int, seed: int = 0) -> TwoMoonsDataset:
    if p < 0 or p0 < 0 or p0 > p:
        raise InvalidCounts(f"need p >= p0 >= 0, got p={p}, p0={p0}")
    rng = make_rng(seed)
    moon_id = rng.integers(1, 3, size=p)
    radius = rng.normal(2.0, 0.5, size=p)
    theta = np.where(moon_id == 1, -np.pi / 2, np.pi / 2) + np.pi * rng.uniform(size=p)
    centres = np.array([MOON_CENTRES[int(m)] for m in moon_id]).reshape(p, 2)
    points = centres + radius[:, None] * np.column_stack((np.cos(theta), np.sin(theta)))
    labelled = rng.choice(p, size=p0, replace=False) if p else np.zeros(0, dtype=int)
    labels = {int(j): bool(moon_id[j] == 1) for j in sorted(labelled)}
    return TwoMoonsDataset(points, moon_id, labels, seed)


def two_moons_oracle(dataset: TwoMoonsDataset, alpha: float = 1.5) -> MutualInfoOracle:
    kernel = KernelMatrix.from_points(dataset.points, alpha=alpha)
    return MutualInfoOracle(kernel, LabelPrior.from_labels(dataset.p, dataset.labels))


# --- grids ---

@dataclass
class GridImage:
    values: np.ndarray
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 2:
            values = values[:, :, None]
        if values.ndim != 3 or values.shape[2] not in (1, 3):
            raise InstanceError(f"image must be H x W with 1 or 3 channels, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InstanceError("image values must be finite")
        self.values = values

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    @property
    def p(self) -> int:
        return self.height * self.width

    def pixels(self) -> np.ndarray:
        """Row-major (p, channels) view."""
        return self.values.reshape(self.p, self.channels)


def expected_edge_count(height: int, width: int) -> int:
    return height * (width - 1) + (height - 1) * width + 2 * (height - 1) * (width - 1)


def load_image(path: Union[str, Path]) -> GridImage:
    """PGM/PPM (binary or plain) scaled to [0, 1]."""
    with Image.open(path) as img:
        mode = img.mode
        if mode not in ("L", "RGB", "I", "I;16", "I;16B", "1"):
            img = img.convert("RGB")
            mode = "RGB"
        arr = np.asarray(img)
    if mode == "1":
        scaled = arr.astype(float)
    elif arr.dtype == np.uint8:
        scaled = arr.astype(float) / 255.0
    else:
        top = float(arr.max()) if arr.size else 1.0
        scaled = arr.astype(float) / (65535.0 if top > 255 else 255.0)
    return GridImage(scaled, {"source": str(path), "scale": "[0,1]"})


def synthetic_grid(height: int, width: int, seed: int = 0, noise: float = 0.1) -> GridImage:
    """A bright disk on a dark background with Gaussian noise."""
    if height < 1 or width < 1:
        raise InvalidCounts(f"grid must be at least 1 x 1, got {height} x {width}")
    rng = make_rng(seed)
    rows, cols = np.mgrid[0:height, 0:width]
    radius = min(height, width) / 3.0
    inside = (rows - (height - 1) / 2.0) ** 2 + (cols - (width - 1) / 2.0) ** 2 <= radius ** 2
    values = np.where(inside, 0.8, 0.2) + noise * rng.normal(size=(height, width))
    return GridImage(np.clip(values, 0.0, 1.0), {"synthetic": True, "seed": seed, "noise": noise})


def grid_graph_8(image: GridImage) -> WeightedGraph:
    heads, tails = grid_edge_index(image.height, image.width)
    pix = image.pixels()
    weights = np.exp(-np.sum((pix[heads] - pix[tails]) ** 2, axis=1))
    return WeightedGraph(image.p, heads, tails, weights)


def default_seeds(image: GridImage) -> Tuple[ElementSet, ElementSet]:
    """Centre pixel as foreground, the four corners as background."""
    h, w = image.height, image.width
    if h < 2 or w < 2:
        raise EmptySeeds(f"default seeds need at least a 2 x 2 image, got {h} x {w}")
    centre = (h // 2) * w + w // 2
    corners = {0, w - 1, (h - 1) * w, h * w - 1} - {centre}
    return ElementSet.from_indices(image.p, [centre]), ElementSet.from_indices(image.p, sorted(corners))


def _diag_gaussian_nll(x: np.ndarray, sample: np.ndarray) -> np.ndarray:
    mean = sample.mean(axis=0)
    var = sample.var(axis=0) + 1e-6
    return 0.5 * np.sum((x - mean) ** 2 / var + np.log(2.0 * np.pi * var), axis=1)


def seed_unary(image: GridImage, fg_seeds: ElementSet, bg_seeds: ElementSet, strength: float = 1.0) -> np.ndarray:
    if len(fg_seeds) == 0 or len(bg_seeds) == 0:
        raise EmptySeeds("both foreground and background seeds are required")
    if not fg_seeds.isdisjoint(bg_seeds):
        raise InstanceError("foreground and background seeds overlap")
    pix = image.pixels()
    fg, bg = fg_seeds.indices(), bg_seeds.indices()
    unary = strength * (_diag_gaussian_nll(pix, pix[fg]) - _diag_gaussian_nll(pix, pix[bg]))
    unary[fg] = -SEED_PIN * strength
    unary[bg] = SEED_PIN * strength
    return unary


def grid_cut_oracle(image: GridImage, unary: Optional[np.ndarray] = None, strength: float = 1.0) -> CutOracle:
    if unary is None:
        fg, bg = default_seeds(image)
        unary = seed_unary(image, fg, bg, strength)
    return CutOracle(grid_graph_8(image), unary)
