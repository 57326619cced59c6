"""Perception datasets: paired ground-truth / detection streams and their JSONL format.

On disk a dataset is JSON-lines, one frame per line:

    {"scene": 0, "t": 0, "gt": [{"id": 3, "x": 1.0, "y": 20.0, "occ": 3}], "det": [{"x": 1.1, "y": 19.5}]}

with positions in ego-relative Cartesian meters (x right, y forward); the
loader converts to polar.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import OcclusionLevel, PolarCoord, polar_from_xy, xy_from_polar
from .inject import GroundTruthObject


class DatasetFormatError(ValueError):
    """A dataset file is malformed."""


@dataclass(slots=True)
class Frame:
    gt: list[GroundTruthObject]
    det: list[PolarCoord]


@dataclass(slots=True)
class Scene:
    scene_id: int
    frames: list[Frame] = field(default_factory=list)


@dataclass(slots=True)
class PerceptionDataset:
    scenes: list[Scene]
    frame_rate_hz: float = 2.0

    @property
    def n_frames(self) -> int:
        return sum(len(s.frames) for s in self.scenes)


def save_dataset(dataset: PerceptionDataset, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for scene in dataset.scenes:
            for t, frame in enumerate(scene.frames):
                gt = []
                for obj in frame.gt:
                    x, y = xy_from_polar(obj.position)
                    gt.append({"id": obj.id, "x": x, "y": y, "occ": int(obj.occlusion)})
                det = []
                for p in frame.det:
                    x, y = xy_from_polar(p)
                    det.append({"x": x, "y": y})
                row = {"scene": scene.scene_id, "t": t, "gt": gt, "det": det}
                fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")


def load_dataset(path: str | Path, frame_rate_hz: float = 2.0) -> PerceptionDataset:
    scenes: dict[int, Scene] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"line {lineno}: not valid JSON: {exc}") from exc
            try:
                scene_id = int(row["scene"])
                gt = [
                    GroundTruthObject(
                        id=int(entry["id"]),
                        position=polar_from_xy(float(entry["x"]), float(entry["y"])),
                        occlusion=OcclusionLevel(int(entry["occ"])),
                    )
                    for entry in row["gt"]
                ]
                det = [polar_from_xy(float(entry["x"]), float(entry["y"])) for entry in row["det"]]
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetFormatError(f"line {lineno}: {exc}") from exc
            scenes.setdefault(scene_id, Scene(scene_id)).frames.append(Frame(gt, det))
    ordered = [scenes[k] for k in sorted(scenes)]
    return PerceptionDataset(scenes=ordered, frame_rate_hz=frame_rate_hz)
