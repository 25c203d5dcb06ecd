"""The TEE text language: parsing, serialization and execution.

Token alphabet: ``E<int>`` applies an extrusion record, ``P<int> Re``
remembers the last extrusion's state under a tag, ``gp P<int>`` loads a
remembered state, ``sv`` plus a run of bare integers selects a region on
the generic disk in the loaded state's domain. Text is whitespace
separated; offsets in errors are character offsets into the input.

Execution keeps the paper-shaped state machine: after an extrusion the
re-anchored cap becomes the implicit next base patch; gp/sv pairs override
it, and consecutive pairs union their selections into one multi-parent
base patch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import builder
from .disk import GenericDisk
from .errors import (
    ExecutionError,
    FeqTeeError,
    SelectionError,
    TeeSemanticError,
    TeeSyntaxError,
    UnknownExtrusionError,
)
from .mesh import Patch, PolyMesh, patch_boundary_halfedges, validate_patch_disk
from .param import ParamPatch


# -- instructions ---------------------------------------------------------------


@dataclass(frozen=True)
class ApplyExtrusion:
    record_id: int


@dataclass(frozen=True)
class Remember:
    tag: int


@dataclass(frozen=True)
class GetPrevious:
    tag: int


@dataclass(frozen=True)
class SelectVertices:
    ids: tuple


@dataclass
class TeeProgram:
    instructions: list

    def __len__(self):
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def __eq__(self, other):
        return isinstance(other, TeeProgram) and \
            self.instructions == other.instructions


# -- tokenizer / parser ----------------------------------------------------------


def _tokenize(text: str):
    """(token, offset) pairs for whitespace-separated tokens."""
    out = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        out.append((text[i:j], i))
        i = j
    return out


def _is_int(tok: str) -> bool:
    return tok.isdigit() or (tok[0:1] == "-" and tok[1:].isdigit())


def parse_tee(text: str, mode: str = "strict") -> TeeProgram:
    """Parse TEE text into a program.

    strict mode rejects the whole input on the first problem; lenient mode
    truncates at the first bad token (useful for generated text) but still
    validates the surviving prefix.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"unknown parse mode {mode!r}")
    tokens = _tokenize(text)
    instructions = []
    i = 0
    try:
        while i < len(tokens):
            tok, off = tokens[i]
            if tok.startswith("E") and _is_int(tok[1:]) and tok[1:]:
                rid = int(tok[1:])
                if rid < 0:
                    raise TeeSyntaxError("negative extrusion id", off)
                instructions.append(ApplyExtrusion(rid))
                i += 1
            elif tok.startswith("P") and _is_int(tok[1:]) and tok[1:]:
                tag = int(tok[1:])
                if i + 1 >= len(tokens) or tokens[i + 1][0] != "Re":
                    raise TeeSyntaxError(
                        f"tag {tok} must be followed by Re", off
                    )
                instructions.append(Remember(tag))
                i += 2
            elif tok == "Re":
                raise TeeSyntaxError("Re without a preceding P<tag>", off)
            elif tok == "gp":
                if i + 1 >= len(tokens):
                    raise TeeSyntaxError("gp at end of input", off)
                nxt, noff = tokens[i + 1]
                if not (nxt.startswith("P") and _is_int(nxt[1:]) and nxt[1:]):
                    raise TeeSyntaxError(
                        f"gp must be followed by P<tag>, got {nxt!r}", noff
                    )
                instructions.append(GetPrevious(int(nxt[1:])))
                i += 2
            elif tok == "sv":
                ids = []
                j = i + 1
                while j < len(tokens) and _is_int(tokens[j][0]):
                    ids.append(int(tokens[j][0]))
                    j += 1
                if not ids:
                    raise TeeSyntaxError("sv without vertex ids", off)
                if min(ids) < 0:
                    raise TeeSyntaxError("negative vertex id in sv run", off)
                instructions.append(SelectVertices(tuple(ids)))
                i = j
            elif _is_int(tok):
                raise TeeSyntaxError(
                    f"bare integer {tok} outside an sv run", off
                )
            else:
                raise TeeSyntaxError(f"unknown token {tok!r}", off)
    except TeeSyntaxError:
        if mode == "strict":
            raise
        # lenient: keep the prefix parsed so far
    program = TeeProgram(instructions)
    _validate_program(program)
    return program


def _validate_program(program: TeeProgram):
    if not program.instructions:
        raise TeeSemanticError("empty program")
    if not isinstance(program.instructions[0], ApplyExtrusion):
        raise TeeSemanticError("program must begin with an extrusion (E<id>)")
    tags = set()
    extrusions = 0
    for ins in program:
        if isinstance(ins, ApplyExtrusion):
            extrusions += 1
        elif isinstance(ins, Remember):
            if extrusions == 0:
                raise TeeSemanticError("Re before any extrusion")
            if ins.tag in tags:
                raise TeeSemanticError(f"duplicate tag P{ins.tag}")
            tags.add(ins.tag)
        elif isinstance(ins, GetPrevious):
            if ins.tag not in tags:
                raise TeeSemanticError(f"gp of unknown tag P{ins.tag}")
        elif isinstance(ins, SelectVertices):
            if not ins.ids:
                raise TeeSemanticError("empty vertex selection")


def serialize_tee(program: TeeProgram) -> str:
    """Canonical single-space-separated text; inverse of parse_tee."""
    parts = []
    for ins in program:
        if isinstance(ins, ApplyExtrusion):
            parts.append(f"E{ins.record_id}")
        elif isinstance(ins, Remember):
            parts.extend([f"P{ins.tag}", "Re"])
        elif isinstance(ins, GetPrevious):
            parts.extend(["gp", f"P{ins.tag}"])
        elif isinstance(ins, SelectVertices):
            parts.append("sv")
            parts.extend(str(i) for i in ins.ids)
        else:
            raise TypeError(f"unknown instruction {ins!r}")
    return " ".join(parts)


# -- interpreter -------------------------------------------------------------------


@dataclass
class ExecuteOptions:
    methodology: str = "pure_quad"   # or "quad_dominant"
    dtw_threshold: float = 0.5
    edge_samples: int = 5
    cut_snap_tol: float | None = None  # default: scaled to the disk spacing
    keep_snapshots: bool = False
    validate_result: bool = True


@dataclass
class DomainSnapshot:
    """Frozen extended-patch state for gp/sv selection."""

    mesh: PolyMesh
    param: ParamPatch
    face_alias: dict      # snapshot face id -> current face id or None

    def remap(self, face_map):
        self.face_alias = {
            s: (int(face_map[c]) if face_map[int(c)] >= 0 else None)
            if c is not None else None
            for s, c in self.face_alias.items()
        }
        # normalize -1 to None
        self.face_alias = {s: (c if c is not None and c >= 0 else None)
                           for s, c in self.face_alias.items()}


@dataclass
class TraceStep:
    index: int
    op: str
    face_count: int
    dtw_score: float | None = None
    snapshot: PolyMesh | None = None


@dataclass
class ExecutionTrace:
    steps: list = field(default_factory=list)


def execute_tee(program: TeeProgram, base: PolyMesh, initial_patch: Patch,
                library, disk: GenericDisk,
                options: ExecuteOptions | None = None):
    """Run a TEE program; returns (final PolyMesh, ExecutionTrace).

    Structured failures raise ExecutionError carrying the instruction
    index; a record id missing from the library raises
    UnknownExtrusionError (the hallucination gate).
    """
    options = options or ExecuteOptions()
    _validate_program(program)
    state = _Interp(base, initial_patch, library, disk, options)
    for idx, ins in enumerate(program):
        try:
            state.step(idx, ins)
        except (UnknownExtrusionError, ExecutionError):
            raise
        except FeqTeeError as exc:
            raise ExecutionError(str(exc), idx, cause=exc)
    if options.validate_result:
        state.mesh.validate_manifold()
    return state.mesh, state.trace


class _Interp:
    def __init__(self, base, initial_patch, library, disk, options):
        validate_patch_disk(base, initial_patch.faces)
        self.mesh = base
        self.cap = initial_patch
        self.library = library
        self.disk = disk
        self.options = options
        self.db = {}
        self.last_extended = None
        self.active_domain = None
        self.pending_faces = None
        self.pending_ref_domain = None
        self.pending_new_uv = {}
        self.extrusions = 0
        self.trace = ExecutionTrace()

    def _snapshots(self):
        for snap in self.db.values():
            yield snap
        if self.last_extended is not None:
            yield self.last_extended

    def step(self, idx, ins):
        if isinstance(ins, ApplyExtrusion):
            self._apply(idx, ins.record_id)
        elif isinstance(ins, Remember):
            if self.last_extended is None:
                raise ExecutionError("nothing to remember", idx)
            self.db[ins.tag] = self.last_extended
            self._trace(idx, "remember")
        elif isinstance(ins, GetPrevious):
            if ins.tag not in self.db:
                raise ExecutionError(f"unknown tag P{ins.tag}", idx)
            self.active_domain = self.db[ins.tag]
            self.cap = None  # selection overrides implicit chaining
            self._trace(idx, "get_previous")
        elif isinstance(ins, SelectVertices):
            self._select(idx, ins.ids)
        else:
            raise ExecutionError(f"unknown instruction {ins!r}", idx)

    def _apply(self, idx, rid):
        if rid not in self.library:
            err = UnknownExtrusionError(f"extrusion id {rid} not in library")
            err.instruction_index = idx
            raise err
        rec = self.library[rid]
        patch = self._consume_patch(idx)
        outcome = builder.apply_extrusion(self.mesh, patch, rec)
        self.mesh = outcome.mesh
        self.cap = outcome.cap
        ext_faces = sorted(outcome.extended.faces)
        self.last_extended = DomainSnapshot(
            outcome.mesh, outcome.ext_param, {f: f for f in ext_faces}
        )
        self.extrusions += 1
        self._trace(idx, "apply")

    def _consume_patch(self, idx) -> Patch:
        if self.pending_faces is not None:
            faces = self.pending_faces
            try:
                validate_patch_disk(self.mesh, faces)
            except FeqTeeError as exc:
                raise ExecutionError(
                    f"selected base patch is not a disk: {exc}", idx, exc
                )
            dom = self.pending_ref_domain
            uv_by_vertex = {}
            for h in patch_boundary_halfedges(self.mesh, faces):
                v = int(self.mesh.h_origin[h])
                if v in dom.param.local_of:
                    uv_by_vertex[v] = dom.param.uv_of_vertex(v)
                elif v in self.pending_new_uv:
                    # vertices created by a quad-dominant cut carry the uv
                    # they were born at
                    uv_by_vertex[v] = self.pending_new_uv[v]
            if not uv_by_vertex:
                raise ExecutionError(
                    "selection boundary has no vertex in its primary domain",
                    idx,
                )
            ref = builder.min_angle_vertex(uv_by_vertex)
            self.pending_faces = None
            self.pending_ref_domain = None
            self.pending_new_uv = {}
            self.active_domain = None
            return Patch.of(faces, ref)
        if self.cap is None:
            raise ExecutionError("no base patch available", idx)
        return self.cap

    def _select(self, idx, ids):
        domain = self.active_domain or self.last_extended
        if domain is None:
            raise ExecutionError("sv with no active extrusion state", idx)
        pts = self.disk.dequantize_ids(ids)
        alive = {s: c for s, c in domain.face_alias.items() if c is not None}
        if not alive:
            raise ExecutionError("stored state has no surviving faces", idx)
        score = None
        try:
            if self.options.methodology == "quad_dominant":
                selected, score = self._cut_select(domain, alive, pts, idx)
            else:
                sel = builder.select_patch_pure_quad(
                    domain.mesh, domain.param, pts,
                    k=self.options.edge_samples, faces=sorted(alive),
                )
                score = sel.dtw_score
                # DTW accumulates over the warping path; compare per point
                if score / max(len(pts), 1) > self.options.dtw_threshold:
                    selected, score = self._cut_select(domain, alive, pts, idx)
                else:
                    selected = {alive[f] for f in sel.faces}
        except SelectionError as exc:
            if self.options.methodology == "pure_quad":
                selected, score = self._cut_select(domain, alive, pts, idx)
            else:
                raise ExecutionError(f"selection failed: {exc}", idx, exc)
        if self.pending_faces is None:
            self.pending_faces = set()
            self.pending_ref_domain = domain
        self.pending_faces |= selected
        self._trace(idx, "select", score)

    def _cut_select(self, domain, alive, pts, idx):
        """Quad-dominant fallback: cut the current mesh along the loop.

        Faces the loop merely classifies may have been re-anchored since
        the snapshot (the stored mesh supplies their uv polygons); faces it
        actually crosses must still match the snapshot, and a previous cut
        that renumbered faces invalidates the whole domain."""
        if any(s != c for s, c in alive.items()):
            raise ExecutionError(
                "stored domain was renumbered; quad-dominant cut unavailable",
                idx,
            )
        snap = self.options.cut_snap_tol
        if snap is None:
            # curves are quantized on the generic disk, so anything within
            # its spacing of a vertex was that vertex before quantization
            snap = 0.6 * self.disk.max_spacing()
        new_mesh, sel, maps = builder.select_patch_quad_dominant(
            self.mesh, domain.param, pts, faces=sorted(alive), snap_tol=snap,
            classify_mesh=domain.mesh,
        )
        self.mesh = new_mesh
        self.pending_new_uv.update(sel.new_vertex_uv)
        for snap in self._snapshots():
            snap.remap(maps.face_map)
        if self.pending_faces is not None:
            self.pending_faces = {
                int(maps.face_map[f]) for f in self.pending_faces
                if maps.face_map[f] >= 0
            }
        if self.cap is not None:
            cap_faces = [int(maps.face_map[f]) for f in self.cap.faces
                         if maps.face_map[f] >= 0]
            self.cap = Patch.of(cap_faces, self.cap.reference_vertex) \
                if cap_faces else None
        return set(sel.faces), sel.dtw_score

    def _trace(self, idx, op, score=None):
        snap = self.mesh if self.options.keep_snapshots else None
        self.trace.steps.append(
            TraceStep(idx, op, self.mesh.n_faces, score, snap)
        )
