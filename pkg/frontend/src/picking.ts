/** Screen-point face picking: raycast against the rendered front mesh and
 * map the hit triangle back to its polygon face id. A miss returns null. */

import * as THREE from "three";

import type { MeshBuffers } from "./meshview";

const raycaster = new THREE.Raycaster();
const pointer = new THREE.Vector2();

export function pickFace(
  event: { clientX: number; clientY: number },
  camera: THREE.Camera,
  canvas: HTMLCanvasElement,
  frontMesh: THREE.Mesh,
  buffers: MeshBuffers,
): number | null {
  const rect = canvas.getBoundingClientRect();
  pointer.x = ((event.clientX - rect.left) / rect.width) * 2 - 1;
  pointer.y = -((event.clientY - rect.top) / rect.height) * 2 + 1;
  raycaster.setFromCamera(pointer, camera);
  const hits = raycaster.intersectObject(frontMesh, false);
  for (const hit of hits) {
    if (hit.faceIndex == null) continue;
    return faceOfTriangle(buffers, hit.faceIndex);
  }
  return null;
}

export function faceOfTriangle(buffers: MeshBuffers, triIndex: number): number | null {
  if (triIndex < 0 || triIndex >= buffers.triToFace.length) return null;
  return buffers.triToFace[triIndex];
}
