/** View state and its pure transitions. Selection mirrors the server's
 * pending patch; any render state is reproducible from (session, step). */

export interface ViewState {
  sessionId: string | null;
  selected: number[];          // face ids, sorted
  hovered: number | null;
  validDisk: boolean;
  invalidReason: string | null;
  boundary: number[];
  stepIndex: number;           // extrusions applied of the loaded program
  stepCount: number;           // 0 when no program is loaded
  lastTrace: { op: string; faces: number; dtw: number | null }[];
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    selected: [],
    hovered: null,
    validDisk: false,
    invalidReason: null,
    boundary: [],
    stepIndex: 0,
    stepCount: 0,
    lastTrace: [],
  };
}

/** Toggle a face in the selection; returns the new sorted selection. */
export function toggleFace(selected: number[], faceId: number): number[] {
  const set = new Set(selected);
  if (set.has(faceId)) {
    set.delete(faceId);
  } else {
    set.add(faceId);
  }
  return [...set].sort((a, b) => a - b);
}

export function canApply(state: ViewState): boolean {
  return state.selected.length > 0 && state.validDisk;
}

export function canStep(state: ViewState, direction: "forward" | "back"): boolean {
  if (state.stepCount === 0) return false;
  if (direction === "forward") return state.stepIndex < state.stepCount;
  return state.stepIndex > 0;
}

export function describeStep(state: ViewState): string {
  if (state.stepCount === 0) return "no program";
  const last = state.lastTrace[state.lastTrace.length - 1];
  const dtw = last && last.dtw != null ? ` dtw=${last.dtw.toFixed(4)}` : "";
  return `step ${state.stepIndex}/${state.stepCount}${dtw}`;
}
