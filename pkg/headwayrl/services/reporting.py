"""
Artifact output: atomic CSV/JSON writers, run manifests and optional plots.

Every file is written to a temporary sibling first and renamed into place,
so a reader never sees a half-written artifact.
"""

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel

from headwayrl.core.config import settings
from headwayrl.core.exceptions import ArtifactError
from headwayrl.schemas.experiment import RunManifest

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MANIFEST_NAME = "manifest.json"


def write_bytes(data: bytes, path: PathLike) -> Path:
    """Atomically write ``data`` to ``path``, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_text(text: str, path: PathLike) -> Path:
    return write_bytes(text.encode("utf-8"), path)


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    return obj


def write_json(obj: Any, path: PathLike) -> Path:
    """Write ``obj`` (a pydantic model or plain data) as sorted, indented JSON."""
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)
    return write_text(text + "\n", path)


def write_jsonl(records: Iterable[Mapping[str, Any]], path: PathLike) -> Path:
    lines = [json.dumps(_jsonable(r), sort_keys=True, allow_nan=False) for r in records]
    return write_text("".join(line + "\n" for line in lines), path)


def write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    """Write a DataFrame as CSV (no index, ``\\n`` line endings)."""
    return write_text(frame.to_csv(index=False, lineterminator="\n"), path)


def write_rows(rows: Sequence[Mapping[str, Any]], columns: Sequence[str], path: PathLike) -> Path:
    return write_frame(pd.DataFrame(list(rows), columns=list(columns)), path)


def file_digest(path: PathLike) -> str:
    """sha256 of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class ArtifactWriter:
    """
    Collects the outputs of one command under ``out_dir``.

    Used as a context manager: if the body raises, every file written
    through the writer is removed again, so a failed run leaves no partial
    artifact set behind.
    """

    def __init__(self, out_dir: PathLike):
        self.out_dir = Path(out_dir)
        self.written: List[Path] = []
        self.logger = logging.getLogger(__name__)

    def __enter__(self) -> "ArtifactWriter":
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is not None:
            self.discard()
        return False

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def _track(self, path: Path) -> Path:
        if path not in self.written:
            self.written.append(path)
        self.logger.debug(f"Wrote {path}")
        return path

    def frame(self, name: str, frame: pd.DataFrame) -> Path:
        return self._track(write_frame(frame, self.path(name)))

    def rows(self, name: str, rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> Path:
        return self._track(write_rows(rows, columns, self.path(name)))

    def json(self, name: str, obj: Any) -> Path:
        return self._track(write_json(obj, self.path(name)))

    def jsonl(self, name: str, records: Iterable[Mapping[str, Any]]) -> Path:
        return self._track(write_jsonl(records, self.path(name)))

    def bytes(self, name: str, data: bytes) -> Path:
        return self._track(write_bytes(data, self.path(name)))

    def adopt(self, path: PathLike) -> Path:
        """Track a file written by someone else (e.g. a plot)."""
        return self._track(Path(path))

    def discard(self) -> None:
        for path in self.written:
            try:
                path.unlink()
            except FileNotFoundError:
                pass
        if self.written:
            self.logger.warning(f"Removed {len(self.written)} partial outputs from {self.out_dir}")
        self.written = []

    def manifest(
        self,
        command: str,
        argv: Sequence[str],
        config: Dict[str, Any],
        seed: int,
        inputs: Sequence[PathLike] = (),
    ) -> Path:
        """Write ``manifest.json`` describing this run; call it last."""
        outputs = sorted(p.name for p in self.written)
        manifest = build_manifest(command, argv, config, seed, inputs, outputs)
        return self._track(write_json(manifest, self.path(MANIFEST_NAME)))


def build_manifest(
    command: str,
    argv: Sequence[str],
    config: Dict[str, Any],
    seed: int,
    inputs: Sequence[PathLike] = (),
    outputs: Sequence[str] = (),
) -> RunManifest:
    digests = {}
    for p in inputs:
        if p is None:
            continue
        if not Path(p).is_file():
            raise ArtifactError(f"{p}: input file not found")
        digests[str(p)] = file_digest(p)
    return RunManifest(
        command=command,
        argv=list(argv),
        config=config,
        seed=seed,
        input_digests=digests,
        outputs=list(outputs),
        artifact_version=settings.ARTIFACT_VERSION,
    )


def load_manifest(path: PathLike) -> RunManifest:
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"{path}: manifest not found")
    try:
        return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise ArtifactError(f"{path}: not a run manifest ({e})") from e


def verify_inputs(manifest: RunManifest) -> None:
    """Raise ArtifactError when any recorded input is missing or has changed."""
    for name, digest in manifest.input_digests.items():
        if not Path(name).is_file():
            raise ArtifactError(f"{name}: input recorded in manifest is missing")
        current = file_digest(name)
        if current != digest:
            raise ArtifactError(f"{name}: input changed since the run (sha256 {current[:12]} != {digest[:12]})")


# Plots

def _pyplot():
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ImportError("matplotlib is required for --plots. Install with: pip install matplotlib")
    return plt


def _save(fig, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps the PNG bytes stable between runs
    fig.savefig(path, dpi=100, metadata={"Software": None})
    return path


def plot_capacity_series(csv_path: PathLike, png_path: PathLike, title: Optional[str] = None) -> Path:
    """Provided vs consumed capacity per half hour, with departures on a twin axis."""
    plt = _pyplot()
    frame = pd.read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(10, 4))
    width = 12
    ax.bar(frame["minute_bucket"] - width / 2, frame["provided"], width=width, label="provided")
    ax.bar(frame["minute_bucket"] + width / 2, frame["consumed"], width=width, label="consumed")
    ax.set_xlabel("minute of day")
    ax.set_ylabel("capacity units")
    ax.legend(loc="upper left")
    if "departures" in frame:
        twin = ax.twinx()
        twin.plot(frame["minute_bucket"], frame["departures"], color="black", marker="o", linewidth=1)
        twin.set_ylabel("departures")
    ax.set_title(title or "Carrying capacity per half hour")
    fig.tight_layout()
    path = _save(fig, png_path)
    plt.close(fig)
    return path


def plot_intervals(csv_path: PathLike, png_path: PathLike) -> Path:
    """Mean departure interval and passenger arrivals per half hour."""
    plt = _pyplot()
    frame = pd.read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.bar(frame["minute_bucket"], frame["arrivals"], width=24, color="lightgray", label="arrivals")
    ax.set_ylabel("passenger arrivals")
    twin = ax.twinx()
    twin.plot(frame["minute_bucket"], frame["mean_interval"], color="tab:red", marker="o", label="interval")
    twin.set_ylabel("mean departure interval (min)")
    ax.set_xlabel("minute of day")
    fig.tight_layout()
    path = _save(fig, png_path)
    plt.close(fig)
    return path


def plot_reward_curve(csv_path: PathLike, png_path: PathLike, title: Optional[str] = None) -> Path:
    plt = _pyplot()
    frame = pd.read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(frame["episode"], frame["mean_reward"])
    ax.set_xlabel("episode")
    ax.set_ylabel("average reward per step")
    ax.set_title(title or "Training reward")
    fig.tight_layout()
    path = _save(fig, png_path)
    plt.close(fig)
    return path


def plot_sweep(csv_path: PathLike, png_path: PathLike, x: str, ys: Sequence[str]) -> Path:
    plt = _pyplot()
    frame = pd.read_csv(csv_path)
    fig, axes = plt.subplots(1, len(ys), figsize=(5 * len(ys), 4), squeeze=False)
    for ax, y in zip(axes[0], ys):
        ax.plot(frame[x], frame[y], marker="o")
        ax.set_xlabel(x)
        ax.set_ylabel(y)
    fig.tight_layout()
    path = _save(fig, png_path)
    plt.close(fig)
    return path
