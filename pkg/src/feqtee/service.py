"""Local editing service: JSON over HTTP ("feqtee-wire-v1").

Single-tenant by design: sessions live in process memory, every mutation
is serialized per session, and each mutation leaves the session mesh
manifold (otherwise it is rejected and the previous state stays)."""

from __future__ import annotations

import io
import tempfile
import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from .disk import GenericDisk
from .errors import FeqTeeError, UnknownExtrusionError
from .mesh import Patch, PolyMesh, patch_boundary_halfedges, validate_patch_disk
from .obj_io import obj_text, read_obj
from .records import RecordStore
from .tee import ExecuteOptions, TeeProgram, execute_tee, parse_tee

WIRE_TAG = "feqtee-wire-v1"
MAX_UNDO = 64


@dataclass
class SessionState:
    session_id: str
    mesh: PolyMesh
    undo: list = field(default_factory=list)
    pending: Patch | None = None
    program: TeeProgram | None = None
    program_base: tuple | None = None   # (mesh, patch) at program load
    step_index: int = 0                 # extrusions applied so far
    lock: threading.Lock = field(default_factory=threading.Lock)


class CreateSession(BaseModel):
    obj: str


class PickRequest(BaseModel):
    faces: list
    reference_vertex: int | None = None


class ApplyRequest(BaseModel):
    record_id: int | None = None
    tee: str | None = None
    methodology: str = "pure_quad"


class ProgramRequest(BaseModel):
    tee: str


class StepRequest(BaseModel):
    direction: str  # "forward" | "back"


def mesh_payload(mesh: PolyMesh) -> dict:
    return {
        "format": WIRE_TAG,
        "vertices": mesh.positions.tolist(),
        "faces": [list(f) for f in mesh.faces],
    }


def create_app(store: RecordStore | None = None, assets_dir=None,
               rings: int | None = None) -> FastAPI:
    store = store if store is not None else RecordStore()
    disk = GenericDisk(rings) if rings else GenericDisk()
    sessions: dict[str, SessionState] = {}
    app = FastAPI(title="feqtee service")

    def get_session(sid: str) -> SessionState:
        if sid not in sessions:
            raise HTTPException(status_code=404, detail="unknown session")
        return sessions[sid]

    @app.post("/sessions")
    def create_session(req: CreateSession):
        with tempfile.NamedTemporaryFile("w", suffix=".obj") as fh:
            fh.write(req.obj)
            fh.flush()
            try:
                from .mesh import load_mesh
                mesh = load_mesh(fh.name)
            except FeqTeeError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        sid = uuid.uuid4().hex[:12]
        sessions[sid] = SessionState(sid, mesh)
        return {"session_id": sid, "mesh": mesh_payload(mesh)}

    @app.get("/sessions/{sid}/mesh")
    def get_mesh(sid: str):
        state = get_session(sid)
        return mesh_payload(state.mesh)

    @app.post("/sessions/{sid}/pick")
    def pick(sid: str, req: PickRequest):
        state = get_session(sid)
        with state.lock:
            faces = [int(f) for f in req.faces]
            if not faces:
                state.pending = None
                return {"valid_disk": False, "reason": "empty selection",
                        "boundary": []}
            try:
                cycle = validate_patch_disk(state.mesh, faces)
            except FeqTeeError as exc:
                state.pending = None
                return {"valid_disk": False, "reason": str(exc), "boundary": []}
            boundary = [int(state.mesh.h_origin[h]) for h in cycle]
            ref = req.reference_vertex
            if ref is None:
                ref = min(boundary)
            if ref not in boundary:
                state.pending = None
                return {"valid_disk": False,
                        "reason": f"reference vertex {ref} not on boundary",
                        "boundary": boundary}
            state.pending = Patch.of(faces, ref)
            return {"valid_disk": True, "reason": None, "boundary": boundary,
                    "reference_vertex": ref}

    @app.get("/records")
    def list_records():
        return {"records": [
            {"id": r.id, "boundary_count": len(r.boundary_angles),
             "node_count": len(r.base_uv)}
            for r in store.records()
        ]}

    preview_cache = {}

    @app.get("/records/{rid}/preview")
    def record_preview(rid: int):
        """The record applied to the canonical disk patch, for thumbnails."""
        if rid not in store:
            raise HTTPException(status_code=404, detail="unknown record")
        if rid not in preview_cache:
            from .builder import apply_extrusion
            from .cluster import canonical_patch
            mesh, patch = canonical_patch()
            try:
                outcome = apply_extrusion(mesh, patch, store[rid])
            except FeqTeeError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            preview_cache[rid] = mesh_payload(outcome.mesh)
        return preview_cache[rid]

    def _mutate(state: SessionState, fn):
        """Run a mutation against the session mesh; keep the old state on
        any failure and push it to the undo stack on success."""
        old = state.mesh
        new_mesh, extra = fn(old)
        new_mesh.validate_manifold()
        state.undo.append(old)
        del state.undo[:-MAX_UNDO]
        state.mesh = new_mesh
        return extra

    @app.post("/sessions/{sid}/apply")
    def apply(sid: str, req: ApplyRequest):
        state = get_session(sid)
        with state.lock:
            if state.pending is None:
                raise HTTPException(status_code=409,
                                    detail="no valid patch picked")
            if (req.record_id is None) == (req.tee is None):
                raise HTTPException(status_code=422,
                                    detail="need exactly one of record_id, tee")
            patch = state.pending
            options = ExecuteOptions(methodology=req.methodology)
            if req.record_id is not None:
                text = f"E{int(req.record_id)}"
            else:
                text = req.tee
            try:
                program = parse_tee(text)

                def fn(mesh):
                    out, trace = execute_tee(program, mesh, patch, store,
                                             disk, options)
                    return out, trace
                trace = _mutate(state, fn)
            except UnknownExtrusionError as exc:
                raise HTTPException(status_code=422,
                                    detail=f"unknown extrusion: {exc}")
            except FeqTeeError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            state.pending = None
            return {
                "mesh": mesh_payload(state.mesh),
                "trace": [
                    {"index": s.index, "op": s.op, "faces": s.face_count,
                     "dtw": s.dtw_score}
                    for s in trace.steps
                ],
            }

    @app.post("/sessions/{sid}/undo")
    def undo(sid: str):
        state = get_session(sid)
        with state.lock:
            if not state.undo:
                raise HTTPException(status_code=409, detail="nothing to undo")
            state.mesh = state.undo.pop()
            if state.step_index > 0:
                state.step_index -= 1
            state.pending = None
            return {"mesh": mesh_payload(state.mesh)}

    @app.post("/sessions/{sid}/program")
    def load_program(sid: str, req: ProgramRequest):
        state = get_session(sid)
        with state.lock:
            if state.pending is None:
                raise HTTPException(status_code=409,
                                    detail="pick a base patch first")
            try:
                program = parse_tee(req.tee)
            except FeqTeeError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            state.program = program
            state.program_base = (state.mesh, state.pending)
            state.step_index = 0
            n_steps = sum(1 for ins in program
                          if type(ins).__name__ == "ApplyExtrusion")
            return {"steps": n_steps}

    @app.post("/sessions/{sid}/step")
    def step(sid: str, req: StepRequest):
        state = get_session(sid)
        with state.lock:
            if state.program is None:
                raise HTTPException(status_code=409, detail="no program loaded")
            base_mesh, base_patch = state.program_base
            n_steps = sum(1 for ins in state.program
                          if type(ins).__name__ == "ApplyExtrusion")
            if req.direction == "forward":
                target = state.step_index + 1
                if target > n_steps:
                    raise HTTPException(status_code=409,
                                        detail="already at program end")
            elif req.direction == "back":
                target = state.step_index - 1
                if target < 0:
                    raise HTTPException(status_code=409,
                                        detail="already at program start")
            else:
                raise HTTPException(status_code=422, detail="bad direction")

            prefix = _prefix_program(state.program, target)
            try:
                if prefix is None:
                    out, trace = base_mesh, None
                else:
                    out, trace = execute_tee(prefix, base_mesh, base_patch,
                                             store, disk, ExecuteOptions())
            except FeqTeeError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            state.undo.append(state.mesh)
            del state.undo[:-MAX_UNDO]
            state.mesh = out
            state.step_index = target
            return {
                "mesh": mesh_payload(state.mesh),
                "step_index": state.step_index,
                "steps": n_steps,
                "trace": [] if trace is None else [
                    {"index": s.index, "op": s.op, "faces": s.face_count,
                     "dtw": s.dtw_score}
                    for s in trace.steps
                ],
            }

    @app.get("/sessions/{sid}/export", response_class=PlainTextResponse)
    def export(sid: str):
        state = get_session(sid)
        return obj_text(state.mesh.positions, state.mesh.faces)

    if assets_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=assets_dir, html=True),
                  name="assets")

    return app


def _prefix_program(program: TeeProgram, n_extrusions: int):
    """The program prefix containing the first n extrusions (and their
    selection preamble); None for n == 0."""
    if n_extrusions == 0:
        return None
    out = []
    count = 0
    for ins in program:
        out.append(ins)
        if type(ins).__name__ == "ApplyExtrusion":
            count += 1
            if count == n_extrusions:
                break
    return TeeProgram(out)
