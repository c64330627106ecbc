"""Frame-wise dataset assembly from labeled sessions.

Each detected droplet region contributes up to ``frames_per_region``
patches, one per post-deposit frame, every one labeled with the
session's class: treating frames as individual samples multiplies the
effective dataset size (by 50 at the defaults).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..calibration import apply_compensation
from ..detection import (
    DetectionParams,
    TriggerParams,
    detect_deposit_events,
    detect_droplets,
    extract_patch,
)
from ..errors import MissingLabelError
from ..heatmap import Session, sample_delta


@dataclass(frozen=True)
class PatchSample:
    patch: np.ndarray  # (size, size) device units
    label: str
    region_id: int
    frame_index: int


@dataclass(frozen=True)
class PatchDataset:
    samples: tuple
    classes: tuple
    patch_size: int

    def __len__(self) -> int:
        return len(self.samples)

    def to_arrays(self):
        """(x, y, regions): (N,1,S,S) float64, int labels, region ids."""
        x = np.stack([s.patch for s in self.samples])[:, None, :, :]
        y = np.array([self.classes.index(s.label) for s in self.samples], dtype=np.int64)
        regions = np.array([s.region_id for s in self.samples], dtype=np.int64)
        return x, y, regions


def _session_frames(session: Session, compensation):
    frames = [sample_delta(session, n) for n in range(len(session.deltas))]
    if compensation is not None:
        frames = [apply_compensation(f, compensation) for f in frames]
    return frames


def assemble_framewise(
    sessions,
    detection_params: DetectionParams = DetectionParams(),
    frames_per_region: int = 50,
    trigger_params: TriggerParams = TriggerParams(),
    compensation=None,
    patch_size: int = 8,
) -> PatchDataset:
    """Detect each session's deposit, segment droplets, cut patches.

    The deposit frame is the last trigger event (earlier events are
    priming artifacts when those were recorded); patches come from the
    deposit frame onward.  Sessions without a class label, without a
    deposit event, or without detectable droplets are errors, not
    silently skipped.
    """
    sessions = list(sessions)
    if not sessions:
        raise ValueError("no sessions supplied")
    samples = []
    labels = set()
    region_id = 0
    for s_index, session in enumerate(sessions):
        label = session.metadata.get("class")
        if not label:
            raise MissingLabelError(f"session {s_index} has no 'class' metadata")
        labels.add(label)
        events = detect_deposit_events(session, trigger_params)
        if not events:
            raise ValueError(f"session {s_index}: no deposit event found")
        deposit = events[-1]
        frames = _session_frames(session, compensation)
        regions = detect_droplets(frames[deposit], detection_params)
        if not regions:
            raise ValueError(f"session {s_index}: no droplet regions detected")
        window = frames[deposit : deposit + frames_per_region]
        for region in regions:
            for offset, frame in enumerate(window):
                samples.append(
                    PatchSample(
                        patch=extract_patch(frame, region.centroid, patch_size),
                        label=label,
                        region_id=region_id,
                        frame_index=deposit + offset,
                    )
                )
            region_id += 1
    return PatchDataset(
        samples=tuple(samples), classes=tuple(sorted(labels)), patch_size=patch_size
    )


def container_feature_data(sessions, frames_per_session: int = 10, tail: bool = True):
    """(ContainerFeatures, label) pairs from steady container frames.

    Takes the last ``frames_per_session`` frames of each session (the
    settled readings) and featurizes each frame's positive cells.
    """
    from ..detection import container_features

    data = []
    for s_index, session in enumerate(sessions):
        label = session.metadata.get("class")
        if not label:
            raise MissingLabelError(f"session {s_index} has no 'class' metadata")
        frames = _session_frames(session, None)
        window = frames[-frames_per_session:] if tail else frames[:frames_per_session]
        for frame in window:
            feats = container_features(frame)
            if not feats.present:
                raise ValueError(f"session {s_index}: frame has no positive cells")
            data.append((feats, label))
    return data
