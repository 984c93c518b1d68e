import json
from pathlib import Path
from typing import Any, List, Optional, Union

import pandas as pd


class BaseRepository:
    """Base repository rooted at a directory, with JSON and CSV helpers."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def path(self, name: Union[str, Path]) -> Path:
        name = Path(name)
        return name if name.is_absolute() else self.root / name

    def exists(self, name: Union[str, Path]) -> bool:
        return self.path(name).exists()

    def ensure_root(self) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        return self.root

    def read_json(self, name: Union[str, Path]) -> Any:
        with open(self.path(name), "r", encoding="utf-8") as f:
            return json.load(f)

    def write_json(self, name: Union[str, Path], payload: Any) -> Path:
        target = self.path(name)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=False)
            f.write("\n")
        return target

    def read_csv(self, name: Union[str, Path]) -> pd.DataFrame:
        return pd.read_csv(self.path(name))

    def write_csv(self, name: Union[str, Path], frame: pd.DataFrame, columns: Optional[List[str]] = None) -> Path:
        target = self.path(name)
        target.parent.mkdir(parents=True, exist_ok=True)
        if columns is not None:
            frame = frame.reindex(columns=columns)
        frame.to_csv(target, index=False)
        return target

    def list_dirs(self) -> List[Path]:
        if not self.root.is_dir():
            return []
        return sorted(p for p in self.root.iterdir() if p.is_dir())
