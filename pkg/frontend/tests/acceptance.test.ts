/** Criterion 9, verified against a running primary service: load a cube,
 * pick the top face (service confirms disk), apply a bump record
 * (6 -> 10 faces in the payload), undo back to 6. */

import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { FeqteeClient } from "../src/api";

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;

const MAKE_RECORDS = `
import sys
from feqtee.decompose import record_extrusion
from feqtee.mesh import Patch, extrude_patch
from feqtee.primitives import cube
from feqtee.records import RecordStore

base = cube()
mesh, loop, maps = extrude_patch(base, Patch.of([1], min(base.faces[1])))
pos = mesh.positions.copy()
pos[sorted(maps.dup_vertex.values()), 2] += 0.5
mesh = mesh.with_positions(pos)
rec, _ = record_extrusion(mesh, loop, base_faces=[1], record_id=0)
RecordStore([rec]).save(sys.argv[1])
`;

const CUBE_OBJ = `v -0.5 -0.5 -0.5
v 0.5 -0.5 -0.5
v 0.5 0.5 -0.5
v -0.5 0.5 -0.5
v -0.5 -0.5 0.5
v 0.5 -0.5 0.5
v 0.5 0.5 0.5
v -0.5 0.5 0.5
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 2 3 7 6
f 3 4 8 7
f 4 1 5 8
`;

let server: ChildProcess | null = null;

async function waitReady(): Promise<void> {
  for (let i = 0; i < 120; i++) {
    try {
      const res = await fetch(`${BASE}/records`);
      if (res.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 500));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "feqtee-ui-"));
  const script = join(dir, "make_records.py");
  const records = join(dir, "records.jsonl");
  writeFileSync(script, MAKE_RECORDS);
  execFileSync("python3", [script, records], { stdio: "inherit" });
  server = spawn("feqtee",
    ["serve", "--records", records, "--port", String(PORT)],
    { stdio: "ignore" });
  await waitReady();
});

afterAll(() => {
  server?.kill();
});

describe("editor flow against the live service", () => {
  const client = new FeqteeClient(BASE);

  it("cube -> pick top -> apply bump -> 10 faces -> undo -> 6 faces", async () => {
    const session = await client.createSession(CUBE_OBJ);
    expect(session.mesh.faces.length).toBe(6);
    expect(session.mesh.vertices.length).toBe(8);

    // top face of the cube payload is face 1
    const pick = await client.pick(session.session_id, [1]);
    expect(pick.valid_disk).toBe(true);
    expect(pick.boundary.length).toBe(4);

    const applied = await client.applyRecord(session.session_id, 0);
    expect(applied.mesh.faces.length).toBe(10);
    expect(applied.trace.some((s) => s.op === "apply")).toBe(true);

    const undone = await client.undo(session.session_id);
    expect(undone.mesh.faces.length).toBe(6);
  });

  it("rejects non-disk picks with a structured payload", async () => {
    const session = await client.createSession(CUBE_OBJ);
    const pick = await client.pick(session.session_id, [0, 1]);
    expect(pick.valid_disk).toBe(false);
    expect(pick.reason).toBeTruthy();
  });

  it("serves record previews for thumbnails", async () => {
    const preview = await client.recordPreview(0);
    expect(preview.format).toBe("feqtee-wire-v1");
    expect(preview.faces.length).toBeGreaterThan(0);
  });

  it("steps a program forward and back through the service", async () => {
    const session = await client.createSession(CUBE_OBJ);
    await client.pick(session.session_id, [1]);
    const prog = await client.loadProgram(session.session_id, "E0 E0");
    expect(prog.steps).toBe(2);
    const s1 = await client.step(session.session_id, "forward");
    expect(s1.mesh.faces.length).toBe(10);
    const s2 = await client.step(session.session_id, "forward");
    expect(s2.mesh.faces.length).toBe(14);
    const s3 = await client.step(session.session_id, "back");
    expect(s3.mesh.faces.length).toBe(10);
  });
});
