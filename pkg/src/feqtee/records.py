"""Extrusion records: reusable, patch-independent extrusion geometry.

A record holds the harmonic map of its smoothed base patch (uv + triangle
connectivity, quad centers included as interpolation nodes) and, for every
source boundary vertex, the per-node displacement vectors expressed in that
vertex's local frame. Records are persisted one-per-line as JSON
("feqtee-rec-v1")."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import MalformedFileError

FORMAT_TAG = "feqtee-rec-v1"


@dataclass
class ExtrusionRecord:
    id: int
    base_uv: np.ndarray            # (N,2) uv of smoothed base patch nodes
    base_tris: np.ndarray          # (T,3) indices into base_uv
    displacements: np.ndarray      # (B,N,3) local coords per boundary frame
    boundary_angles: np.ndarray    # (B,) source boundary vertex angles

    def __post_init__(self):
        self.base_uv = np.asarray(self.base_uv, dtype=np.float64).reshape(-1, 2)
        self.base_tris = np.asarray(self.base_tris, dtype=np.int64).reshape(-1, 3)
        self.displacements = np.asarray(self.displacements, dtype=np.float64)
        self.boundary_angles = np.asarray(self.boundary_angles, dtype=np.float64)
        b, n, three = self.displacements.shape
        if n != len(self.base_uv) or three != 3 or b != len(self.boundary_angles):
            raise ValueError("inconsistent record array shapes")

    def rotated(self, theta: float) -> "ExtrusionRecord":
        """Same record re-anchored: uv rotated by -theta so the point at
        angle theta lands on (1,0); boundary angles shift along."""
        c, s = np.cos(-theta), np.sin(-theta)
        rot = np.array([[c, -s], [s, c]])
        return ExtrusionRecord(
            id=self.id,
            base_uv=self.base_uv @ rot.T,
            base_tris=self.base_tris,
            displacements=self.displacements,
            boundary_angles=np.mod(self.boundary_angles - theta, 2.0 * np.pi),
        )

    def to_json(self) -> str:
        return json.dumps({
            "format": FORMAT_TAG,
            "id": self.id,
            "base_uv": self.base_uv.tolist(),
            "base_tris": self.base_tris.tolist(),
            "displacements": self.displacements.tolist(),
            "boundary_angles": self.boundary_angles.tolist(),
        })

    @staticmethod
    def from_json(text: str, line=None) -> "ExtrusionRecord":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedFileError(f"bad record JSON: {exc}", line)
        if obj.get("format") != FORMAT_TAG:
            raise MalformedFileError(
                f"unknown record format {obj.get('format')!r}", line
            )
        try:
            return ExtrusionRecord(
                id=int(obj["id"]),
                base_uv=obj["base_uv"],
                base_tris=obj["base_tris"],
                displacements=obj["displacements"],
                boundary_angles=obj["boundary_angles"],
            )
        except (KeyError, ValueError) as exc:
            raise MalformedFileError(f"bad record fields: {exc}", line)


class RecordStore:
    """Id-keyed set of extrusion records with JSON-lines persistence."""

    def __init__(self, records=()):
        self._by_id = {}
        for r in records:
            self.add(r)

    def add(self, record: ExtrusionRecord):
        if record.id in self._by_id:
            raise ValueError(f"duplicate record id {record.id}")
        self._by_id[record.id] = record

    def __contains__(self, rid):
        return rid in self._by_id

    def __getitem__(self, rid) -> ExtrusionRecord:
        return self._by_id[rid]

    def __len__(self):
        return len(self._by_id)

    def ids(self):
        return sorted(self._by_id)

    def records(self):
        return [self._by_id[i] for i in self.ids()]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records():
                fh.write(r.to_json() + "\n")

    @staticmethod
    def load(path) -> "RecordStore":
        store = RecordStore()
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if line:
                    store.add(ExtrusionRecord.from_json(line, lineno))
        return store
