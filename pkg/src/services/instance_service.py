from pathlib import Path
from typing import Any, Optional, Tuple

import numpy as np
import structlog

from ..core.errors import InstanceError
from ..core.schemas import InstanceKind, InstanceSpec, InstanceStats
from ..repositories.instance_repository import InstanceRepository
from ..sfm.datagen import (GridImage, default_seeds, gen_two_moons, grid_graph_8, load_image, seed_unary,
                           synthetic_grid, two_moons_oracle)
from ..sfm.functions import (ConcaveCardinalityOracle, CutOracle, ModularOracle, WeightedGraph, iwata_oracle,
                             oracle_catalog)
from ..sfm.oracle import SubmodularOracle

logger = structlog.get_logger(__name__)

CONCAVE_CURVES = {
    "sqrt": lambda scale, exponent: (lambda t: scale * np.sqrt(t)),
    "rank1": lambda scale, exponent: (lambda t: scale * np.minimum(t, 1)),
    "power": lambda scale, exponent: (lambda t: scale * np.power(t, exponent)),
}


def _quantize(image: GridImage) -> GridImage:
    # round-trip through 8-bit so the saved file and the in-memory image agree
    return GridImage(np.rint(np.clip(image.values, 0.0, 1.0) * 255) / 255.0, image.meta)


class InstanceService:
    def __init__(self, repo: Optional[InstanceRepository] = None):
        self.repo = repo

    # --- generation ---

    def generate(self, kind: InstanceKind, out: Path, seed: int = 0, **params: Any) -> Tuple[InstanceSpec, InstanceStats]:
        """Write an instance JSON (and its data files next to it) and return it with its statistics."""
        kind = InstanceKind(kind)
        out = Path(out)
        self.repo = InstanceRepository(out.parent)
        name = params.pop("name", None) or out.stem
        builder = getattr(self, f"_generate_{kind.name.lower()}")
        spec, stats = builder(name, out.stem, seed, params)
        self.repo.save(spec, out.name)
        stats.path = str(out)
        logger.info("instance_generated", **stats.model_dump(mode="json"))
        return spec, stats

    def _generate_two_moons(self, name, stem, seed, params):
        p, p0 = int(params.get("p", 400)), int(params.get("p0", 16))
        dataset = gen_two_moons(p, p0, seed)
        paths = self.repo.save_two_moons(dataset, stem)
        spec = InstanceSpec(name=name, kind=InstanceKind.TWO_MOONS, p=p, seed=seed, data_paths=paths,
                            params={"p0": p0, "alpha": float(params.get("alpha", 1.5))})
        return spec, InstanceStats(name=name, kind=spec.kind, p=p, n_labels=dataset.p0)

    def _generate_grid(self, name, stem, seed, params):
        if params.get("image"):
            image = load_image(params["image"])
        else:
            image = synthetic_grid(int(params.get("height", 32)), int(params.get("width", 32)), seed,
                                   float(params.get("noise", 0.1)))
        image = _quantize(image)
        ext = "pgm" if image.channels == 1 else "ppm"
        strength = float(params.get("strength", 1.0))
        if params.get("unary"):
            unary = self.repo.read_vector_file(params["unary"])
            if unary.size != image.p:
                raise InstanceError(f"unary file has {unary.size} entries for {image.p} pixels")
        else:
            unary = seed_unary(image, *default_seeds(image), strength=strength)
        paths = {
            "image": self.repo.save_image(image, f"{stem}_image.{ext}"),
            "unary": self.repo.save_vector(unary, f"{stem}_unary.csv"),
        }
        spec = InstanceSpec(name=name, kind=InstanceKind.GRID, p=image.p, seed=seed, data_paths=paths,
                            params={"height": image.height, "width": image.width, "channels": image.channels,
                                    "strength": strength, "intensity_scale": "[0,1]",
                                    "unary_model": "file" if params.get("unary") else "seed-gaussian"})
        n_edges = grid_graph_8(image).n_edges
        return spec, InstanceStats(name=name, kind=spec.kind, p=image.p, n_edges=n_edges)

    def _generate_modular(self, name, stem, seed, params):
        p = int(params.get("p", 10))
        weights = params.get("weights") or np.random.default_rng(seed).normal(0.0, 1.0, p).tolist()
        spec = InstanceSpec(name=name, kind=InstanceKind.MODULAR, p=len(weights), seed=seed,
                            params={"weights": [float(x) for x in weights]})
        return spec, InstanceStats(name=name, kind=spec.kind, p=spec.p)

    def _generate_concave(self, name, stem, seed, params):
        p = int(params.get("p", 10))
        rng = np.random.default_rng(seed)
        spec = InstanceSpec(name=name, kind=InstanceKind.CONCAVE, p=p, seed=seed,
                            params={"curve": params.get("curve", "sqrt"), "scale": float(params.get("scale", 2.0)),
                                    "exponent": float(params.get("exponent", 0.5)),
                                    "weights": rng.normal(-1.0, 1.0, p).tolist()})
        return spec, InstanceStats(name=name, kind=spec.kind, p=p)

    def _generate_iwata(self, name, stem, seed, params):
        p = int(params.get("p", 10))
        spec = InstanceSpec(name=name, kind=InstanceKind.IWATA, p=p, seed=seed)
        return spec, InstanceStats(name=name, kind=spec.kind, p=p)

    def _generate_random(self, name, stem, seed, params):
        p = int(params.get("p", 10))
        family = params.get("family", "grid_cut")
        if family not in oracle_catalog():
            raise InstanceError(f"unknown random family {family!r}; choose from {sorted(oracle_catalog())}")
        spec = InstanceSpec(name=name, kind=InstanceKind.RANDOM, p=p, seed=seed, params={"family": family})
        return spec, InstanceStats(name=name, kind=spec.kind, p=p)

    def _generate_cut(self, name, stem, seed, params):
        raise InstanceError("cut instances are read from edge and unary files, not generated")

    # --- loading ---

    def load(self, path: Path) -> Tuple[InstanceSpec, SubmodularOracle]:
        self.repo, filename = InstanceRepository.for_file(path)
        spec = self.repo.load(filename)
        return spec, self.build_oracle(spec)

    def build_oracle(self, spec: InstanceSpec) -> SubmodularOracle:
        builder = getattr(self, f"_build_{spec.kind.name.lower()}")
        try:
            oracle = builder(spec, spec.params)
        except (ValueError, TypeError, IndexError) as e:
            raise InstanceError(f"instance {spec.name!r} has malformed params: {e}") from e
        if oracle.p != spec.p:
            raise InstanceError(f"instance {spec.name!r} declares p={spec.p} but its data give p={oracle.p}")
        return oracle

    def _has(self, spec: InstanceSpec, key: str) -> bool:
        return self.repo is not None and self.repo.has_data(spec, key)

    def _build_two_moons(self, spec, params):
        if self._has(spec, "points"):
            dataset = self.repo.load_two_moons(spec)
        else:
            dataset = gen_two_moons(spec.p, int(params.get("p0", 16)), spec.seed)
        return two_moons_oracle(dataset, float(params.get("alpha", 1.5)))

    def _build_grid(self, spec, params):
        if self._has(spec, "image"):
            image = self.repo.load_image(spec)
        else:
            image = _quantize(synthetic_grid(int(params.get("height", 8)), int(params.get("width", 8)), spec.seed,
                                             float(params.get("noise", 0.1))))
        if self._has(spec, "unary"):
            unary = self.repo.load_vector(spec, "unary")
        else:
            unary = seed_unary(image, *default_seeds(image), strength=float(params.get("strength", 1.0)))
        return CutOracle(grid_graph_8(image), unary)

    def _build_cut(self, spec, params):
        if self._has(spec, "edges"):
            edges = self.repo.load_edges(spec)
            graph = WeightedGraph(spec.p, edges["i"].to_numpy(), edges["j"].to_numpy(), edges["weight"].to_numpy())
        else:
            graph = WeightedGraph.from_edges(spec.p, [tuple(e) for e in params.get("edges", [])])
        unary = self.repo.load_vector(spec, "unary") if self._has(spec, "unary") else np.asarray(
            params.get("unary", np.zeros(spec.p)), dtype=float)
        return CutOracle(graph, unary)

    def _build_modular(self, spec, params):
        if "weights" not in params:
            raise InstanceError("modular instances need params.weights")
        return ModularOracle(params["weights"])

    def _build_concave(self, spec, params):
        curve = params.get("curve", "sqrt")
        if curve not in CONCAVE_CURVES:
            raise InstanceError(f"unknown concave curve {curve!r}; choose from {sorted(CONCAVE_CURVES)}")
        g = CONCAVE_CURVES[curve](float(params.get("scale", 1.0)), float(params.get("exponent", 0.5)))
        return ConcaveCardinalityOracle(spec.p, g, params.get("weights"))

    def _build_iwata(self, spec, params):
        return iwata_oracle(spec.p)

    def _build_random(self, spec, params):
        family = params.get("family", "grid_cut")
        catalog = oracle_catalog()
        if family not in catalog:
            raise InstanceError(f"unknown random family {family!r}; choose from {sorted(catalog)}")
        return catalog[family](spec.p, spec.seed)
