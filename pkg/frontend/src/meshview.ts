/** Wire-mesh payloads to three.js geometry: flat-shaded fan triangulation
 * with a face-id map for picking, quad-edge wireframe overlay, and a
 * backface tint to expose orientation errors. */

import * as THREE from "three";

import type { WireMesh } from "./api";

export interface MeshBuffers {
  geometry: THREE.BufferGeometry;   // non-indexed triangles, flat normals
  triToFace: Int32Array;            // triangle index -> face id
  wire: THREE.BufferGeometry;       // polygon edges (no fan diagonals)
}

const BASE_COLOR = new THREE.Color(0.75, 0.78, 0.82);
const SELECT_COLOR = new THREE.Color(0.95, 0.62, 0.2);
const HOVER_COLOR = new THREE.Color(0.65, 0.8, 0.95);

export function buildBuffers(mesh: WireMesh): MeshBuffers {
  const pos: number[] = [];
  const triToFace: number[] = [];
  for (let f = 0; f < mesh.faces.length; f++) {
    const cyc = mesh.faces[f];
    for (let i = 1; i < cyc.length - 1; i++) {
      for (const vi of [cyc[0], cyc[i], cyc[i + 1]]) {
        const v = mesh.vertices[vi];
        pos.push(v[0], v[1], v[2]);
      }
      triToFace.push(f);
    }
  }
  const geometry = new THREE.BufferGeometry();
  geometry.setAttribute("position", new THREE.Float32BufferAttribute(pos, 3));
  geometry.computeVertexNormals(); // non-indexed => per-face flat normals
  const colors = new Float32Array(pos.length);
  geometry.setAttribute("color", new THREE.BufferAttribute(colors, 3));

  const edges = new Set<string>();
  const wirePos: number[] = [];
  for (const cyc of mesh.faces) {
    for (let i = 0; i < cyc.length; i++) {
      const a = cyc[i];
      const b = cyc[(i + 1) % cyc.length];
      const key = a < b ? `${a}_${b}` : `${b}_${a}`;
      if (edges.has(key)) continue;
      edges.add(key);
      const va = mesh.vertices[a];
      const vb = mesh.vertices[b];
      wirePos.push(va[0], va[1], va[2], vb[0], vb[1], vb[2]);
    }
  }
  const wire = new THREE.BufferGeometry();
  wire.setAttribute("position", new THREE.Float32BufferAttribute(wirePos, 3));

  const buffers = { geometry, triToFace: new Int32Array(triToFace), wire };
  paintFaces(buffers, new Set(), null);
  return buffers;
}

/** Tint selected and hovered faces via per-vertex colors. */
export function paintFaces(buffers: MeshBuffers, selected: Set<number>,
                           hovered: number | null): void {
  const attr = buffers.geometry.getAttribute("color") as THREE.BufferAttribute;
  for (let t = 0; t < buffers.triToFace.length; t++) {
    const f = buffers.triToFace[t];
    const c = selected.has(f) ? SELECT_COLOR
      : f === hovered ? HOVER_COLOR : BASE_COLOR;
    for (let k = 0; k < 3; k++) {
      attr.setXYZ(t * 3 + k, c.r, c.g, c.b);
    }
  }
  attr.needsUpdate = true;
}

/** Group with the front mesh, red-tinted back faces and the wireframe. */
export function buildObject(buffers: MeshBuffers): THREE.Group {
  const group = new THREE.Group();
  const front = new THREE.Mesh(
    buffers.geometry,
    new THREE.MeshLambertMaterial({
      vertexColors: true, side: THREE.FrontSide, flatShading: true,
    }),
  );
  front.name = "front";
  const back = new THREE.Mesh(
    buffers.geometry,
    new THREE.MeshBasicMaterial({ color: 0xaa2222, side: THREE.BackSide }),
  );
  const wire = new THREE.LineSegments(
    buffers.wire,
    new THREE.LineBasicMaterial({ color: 0x222222 }),
  );
  group.add(front, back, wire);
  return group;
}
