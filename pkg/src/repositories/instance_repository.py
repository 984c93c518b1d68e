from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
import pandas as pd
from PIL import Image

from .base import BaseRepository
from ..core.errors import InstanceError
from ..core.schemas import InstanceSpec
from ..sfm.datagen import GridImage, TwoMoonsDataset, load_image


class InstanceRepository(BaseRepository):
    """Instance JSON plus the data files it references, all under one directory."""

    @classmethod
    def for_file(cls, path: Union[str, Path]) -> Tuple["InstanceRepository", str]:
        path = Path(path)
        return cls(path.parent), path.name

    def load(self, name: str) -> InstanceSpec:
        if not self.exists(name):
            raise InstanceError(f"instance file {self.path(name)} not found")
        try:
            return InstanceSpec(**self.read_json(name))
        except (ValueError, TypeError) as e:
            raise InstanceError(f"invalid instance file {self.path(name)}: {e}") from e

    def save(self, spec: InstanceSpec, name: str = "instance.json") -> Path:
        return self.write_json(name, spec.model_dump(mode="json"))

    def _data(self, spec: InstanceSpec, key: str) -> Path:
        if key not in spec.data_paths:
            raise InstanceError(f"instance {spec.name!r} has no {key!r} data file")
        target = self.path(spec.data_paths[key])
        if not target.exists():
            raise InstanceError(f"data file {target} not found")
        return target

    def has_data(self, spec: InstanceSpec, key: str) -> bool:
        return key in spec.data_paths

    # --- two moons ---

    def save_two_moons(self, dataset: TwoMoonsDataset, prefix: str) -> Dict[str, str]:
        points = pd.DataFrame({"x": dataset.points[:, 0], "y": dataset.points[:, 1], "moon_id": dataset.moon_id})
        labels = pd.DataFrame({"index": list(dataset.labels), "positive": [int(v) for v in dataset.labels.values()]},
                              columns=["index", "positive"])
        paths = {"points": f"{prefix}_points.csv", "labels": f"{prefix}_labels.csv"}
        self.write_csv(paths["points"], points)
        self.write_csv(paths["labels"], labels)
        return paths

    def load_two_moons(self, spec: InstanceSpec) -> TwoMoonsDataset:
        points = pd.read_csv(self._data(spec, "points"))
        labels = pd.read_csv(self._data(spec, "labels"))
        return TwoMoonsDataset(
            points=points[["x", "y"]].to_numpy(dtype=float),
            moon_id=points["moon_id"].to_numpy(dtype=int),
            labels={int(j): bool(v) for j, v in zip(labels["index"], labels["positive"])},
            seed=spec.seed,
        )

    # --- grids and cuts ---

    def save_image(self, image: GridImage, name: str) -> str:
        data = np.rint(np.clip(image.values, 0.0, 1.0) * 255).astype(np.uint8)
        data = data[:, :, 0] if image.channels == 1 else data
        target = self.path(name)
        target.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(data).save(target)
        return name

    def load_image(self, spec: InstanceSpec) -> GridImage:
        return load_image(self._data(spec, "image"))

    def save_vector(self, values: np.ndarray, name: str, column: str = "u") -> str:
        self.write_csv(name, pd.DataFrame({column: np.asarray(values, dtype=float)}))
        return name

    def load_vector(self, spec: InstanceSpec, key: str = "unary", column: str = "u") -> np.ndarray:
        frame = pd.read_csv(self._data(spec, key))
        return frame[column].to_numpy(dtype=float)

    def save_edges(self, heads: np.ndarray, tails: np.ndarray, weights: np.ndarray, name: str) -> str:
        self.write_csv(name, pd.DataFrame({"i": heads, "j": tails, "weight": weights}))
        return name

    def load_edges(self, spec: InstanceSpec) -> pd.DataFrame:
        return pd.read_csv(self._data(spec, "edges"))

    def read_vector_file(self, path: Union[str, Path], column: str = "u") -> np.ndarray:
        """A one-column CSV; the column is `column` when present, else the first one."""
        frame = pd.read_csv(path)
        if frame.shape[1] == 0:
            raise InstanceError(f"{path} has no columns")
        series = frame[column] if column in frame.columns else frame.iloc[:, 0]
        return series.to_numpy(dtype=float)
