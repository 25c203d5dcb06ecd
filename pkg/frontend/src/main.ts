import { EditorApp } from "./app";

const DEFAULT_CUBE = `v -0.5 -0.5 -0.5
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

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const objInput = el<HTMLTextAreaElement>("obj-input");
objInput.value = DEFAULT_CUBE;

new EditorApp(el<HTMLCanvasElement>("viewport"), {
  status: el("status"),
  records: el("records"),
  objInput,
  teeInput: el<HTMLTextAreaElement>("tee-input"),
  loadMesh: el<HTMLButtonElement>("load-mesh"),
  loadProgram: el<HTMLButtonElement>("load-program"),
  forward: el<HTMLButtonElement>("step-forward"),
  back: el<HTMLButtonElement>("step-back"),
  undo: el<HTMLButtonElement>("undo"),
  exportObj: el<HTMLButtonElement>("export-obj"),
});
