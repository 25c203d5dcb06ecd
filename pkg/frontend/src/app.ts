/** Editor wiring: scene, session lifecycle, picking, record library,
 * program stepping and undo. All geometry changes come back from the
 * service as fresh mesh payloads. */

import * as THREE from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";

import { ApiError, FeqteeClient, WireMesh } from "./api";
import { MeshBuffers, buildBuffers, buildObject, paintFaces } from "./meshview";
import { pickFace } from "./picking";
import {
  ViewState,
  canApply,
  canStep,
  describeStep,
  initialState,
  toggleFace,
} from "./state";

export class EditorApp {
  readonly client: FeqteeClient;
  state: ViewState = initialState();

  private scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private renderer: THREE.WebGLRenderer;
  private controls: OrbitControls;
  private buffers: MeshBuffers | null = null;
  private meshGroup: THREE.Group | null = null;
  private inFlight = false;

  constructor(
    private canvas: HTMLCanvasElement,
    private ui: {
      status: HTMLElement;
      records: HTMLElement;
      objInput: HTMLTextAreaElement;
      teeInput: HTMLTextAreaElement;
      loadMesh: HTMLButtonElement;
      loadProgram: HTMLButtonElement;
      forward: HTMLButtonElement;
      back: HTMLButtonElement;
      undo: HTMLButtonElement;
      exportObj: HTMLButtonElement;
    },
    baseUrl = "",
  ) {
    this.client = new FeqteeClient(baseUrl);
    this.camera = new THREE.PerspectiveCamera(
      45, canvas.clientWidth / Math.max(1, canvas.clientHeight), 0.01, 100);
    this.camera.position.set(2.2, -2.2, 1.8);
    this.camera.up.set(0, 0, 1);
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setClearColor(0xf4f4f6);
    this.controls = new OrbitControls(this.camera, canvas);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.7));
    const sun = new THREE.DirectionalLight(0xffffff, 1.2);
    sun.position.set(3, -4, 6);
    this.scene.add(sun);

    this.ui.loadMesh.onclick = () => this.guard(() => this.loadMesh());
    this.ui.loadProgram.onclick = () => this.guard(() => this.loadProgram());
    this.ui.forward.onclick = () => this.guard(() => this.step("forward"));
    this.ui.back.onclick = () => this.guard(() => this.step("back"));
    this.ui.undo.onclick = () => this.guard(() => this.undo());
    this.ui.exportObj.onclick = () => this.guard(() => this.export());
    canvas.addEventListener("click", (ev) => this.guard(() => this.onClick(ev)));
    canvas.addEventListener("mousemove", (ev) => this.onHover(ev));

    const animate = () => {
      requestAnimationFrame(animate);
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
    };
    animate();
  }

  /** One mutation in flight at a time; failures land in the status line. */
  private async guard(fn: () => Promise<void>) {
    if (this.inFlight) return;
    this.inFlight = true;
    try {
      await fn();
    } catch (err) {
      const msg = err instanceof ApiError ? err.message : String(err);
      this.setStatus(`error: ${msg}`);
    } finally {
      this.inFlight = false;
      this.refreshControls();
    }
  }

  private setStatus(text: string) {
    this.ui.status.textContent = text;
  }

  private showMesh(mesh: WireMesh) {
    if (this.meshGroup) this.scene.remove(this.meshGroup);
    this.buffers = buildBuffers(mesh);
    this.meshGroup = buildObject(this.buffers);
    this.scene.add(this.meshGroup);
    this.repaint();
  }

  private repaint() {
    if (!this.buffers) return;
    paintFaces(this.buffers, new Set(this.state.selected), this.state.hovered);
  }

  private frontMesh(): THREE.Mesh | null {
    return (this.meshGroup?.getObjectByName("front") as THREE.Mesh) ?? null;
  }

  async loadMesh() {
    const obj = this.ui.objInput.value;
    const res = await this.client.createSession(obj);
    this.state = { ...initialState(), sessionId: res.session_id };
    this.showMesh(res.mesh);
    this.setStatus(`session ${res.session_id}: `
      + `${res.mesh.faces.length} faces`);
    await this.refreshRecords();
  }

  async refreshRecords() {
    const { records } = await this.client.records();
    this.ui.records.innerHTML = "";
    for (const rec of records) {
      const btn = document.createElement("button");
      btn.textContent = `E${rec.id}`;
      btn.title = `${rec.boundary_count} boundary vertices`;
      btn.onclick = () => this.guard(() => this.applyRecord(rec.id));
      this.ui.records.appendChild(btn);
      this.thumbnail(rec.id, btn);
    }
  }

  /** Offline-rendered preview of the record on the canonical patch. */
  private async thumbnail(recordId: number, btn: HTMLButtonElement) {
    try {
      const mesh = await this.client.recordPreview(recordId);
      const buffers = buildBuffers(mesh);
      const scene = new THREE.Scene();
      scene.add(buildObject(buffers));
      scene.add(new THREE.AmbientLight(0xffffff, 0.8));
      const light = new THREE.DirectionalLight(0xffffff, 1.0);
      light.position.set(2, -3, 4);
      scene.add(light);
      const cam = new THREE.PerspectiveCamera(40, 1, 0.01, 50);
      cam.position.set(2.0, -2.0, 1.6);
      cam.up.set(0, 0, 1);
      cam.lookAt(0, 0, 0.2);
      const target = new THREE.WebGLRenderTarget(64, 64);
      this.renderer.setRenderTarget(target);
      this.renderer.render(scene, cam);
      const pixels = new Uint8Array(64 * 64 * 4);
      this.renderer.readRenderTargetPixels(target, 0, 0, 64, 64, pixels);
      this.renderer.setRenderTarget(null);
      const cv = document.createElement("canvas");
      cv.width = cv.height = 64;
      const ctx = cv.getContext("2d")!;
      const img = ctx.createImageData(64, 64);
      // flip vertically: GL rows are bottom-up
      for (let y = 0; y < 64; y++) {
        img.data.set(pixels.subarray((63 - y) * 256, (64 - y) * 256), y * 256);
      }
      ctx.putImageData(img, 0, 0);
      btn.prepend(cv);
    } catch {
      /* previews are cosmetic; the button still applies the record */
    }
  }

  private async onClick(ev: MouseEvent) {
    const front = this.frontMesh();
    if (!front || !this.buffers || !this.state.sessionId) return;
    const face = pickFace(ev, this.camera, this.canvas, front, this.buffers);
    if (face === null) return;
    const selected = toggleFace(this.state.selected, face);
    const res = await this.client.pick(this.state.sessionId, selected);
    this.state = {
      ...this.state,
      selected,
      validDisk: res.valid_disk,
      invalidReason: res.reason,
      boundary: res.boundary,
    };
    this.repaint();
    this.setStatus(res.valid_disk
      ? `selection: ${selected.length} faces, disk ok `
        + `(boundary ${res.boundary.length})`
      : `selection invalid: ${res.reason ?? "empty"}`);
  }

  private onHover(ev: MouseEvent) {
    const front = this.frontMesh();
    if (!front || !this.buffers) return;
    const face = pickFace(ev, this.camera, this.canvas, front, this.buffers);
    if (face !== this.state.hovered) {
      this.state = { ...this.state, hovered: face };
      this.repaint();
    }
  }

  async applyRecord(recordId: number) {
    if (!this.state.sessionId) throw new Error("no session");
    if (!canApply(this.state)) throw new Error("pick a valid disk patch first");
    const res = await this.client.applyRecord(this.state.sessionId, recordId);
    this.state = { ...this.state, selected: [], validDisk: false,
                   lastTrace: res.trace };
    this.showMesh(res.mesh);
    this.setStatus(`applied E${recordId}: ${res.mesh.faces.length} faces`);
  }

  async loadProgram() {
    if (!this.state.sessionId) throw new Error("no session");
    if (!canApply(this.state)) throw new Error("pick a valid disk patch first");
    const res = await this.client.loadProgram(
      this.state.sessionId, this.ui.teeInput.value);
    this.state = { ...this.state, stepCount: res.steps, stepIndex: 0 };
    this.setStatus(`program loaded: ${res.steps} extrusions`);
  }

  async step(direction: "forward" | "back") {
    if (!this.state.sessionId || !canStep(this.state, direction)) return;
    const res = await this.client.step(this.state.sessionId, direction);
    this.state = {
      ...this.state,
      stepIndex: res.step_index,
      stepCount: res.steps,
      lastTrace: res.trace,
    };
    this.showMesh(res.mesh);
    this.setStatus(`${describeStep(this.state)}: `
      + `${res.mesh.faces.length} faces`);
  }

  async undo() {
    if (!this.state.sessionId) throw new Error("no session");
    const res = await this.client.undo(this.state.sessionId);
    this.state = { ...this.state, selected: [], validDisk: false };
    this.showMesh(res.mesh);
    this.setStatus(`undo: ${res.mesh.faces.length} faces`);
  }

  async export() {
    if (!this.state.sessionId) throw new Error("no session");
    const obj = await this.client.exportObj(this.state.sessionId);
    const blob = new Blob([obj], { type: "text/plain" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "feqtee-export.obj";
    a.click();
    URL.revokeObjectURL(a.href);
  }

  private refreshControls() {
    this.ui.forward.disabled = !canStep(this.state, "forward");
    this.ui.back.disabled = !canStep(this.state, "back");
    this.ui.undo.disabled = !this.state.sessionId;
    this.ui.loadProgram.disabled = !canApply(this.state);
  }
}
