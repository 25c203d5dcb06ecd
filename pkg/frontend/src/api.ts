/** Typed client for the feqtee service (feqtee-wire-v1). The UI never
 * mutates geometry locally: every edit flows through these endpoints. */

export interface WireMesh {
  format: string;
  vertices: number[][];
  faces: number[][];
}

export interface PickResponse {
  valid_disk: boolean;
  reason: string | null;
  boundary: number[];
  reference_vertex?: number;
}

export interface TraceStep {
  index: number;
  op: string;
  faces: number;
  dtw: number | null;
}

export interface RecordInfo {
  id: number;
  boundary_count: number;
  node_count: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

export class FeqteeClient {
  constructor(readonly baseUrl: string = "") {}

  private async req<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await res.text();
    if (!res.ok) {
      let detail = text;
      try {
        detail = JSON.parse(text).detail ?? text;
      } catch {
        /* plain-text error body */
      }
      throw new ApiError(res.status, String(detail));
    }
    try {
      return JSON.parse(text) as T;
    } catch {
      return text as unknown as T;
    }
  }

  createSession(obj: string) {
    return this.req<{ session_id: string; mesh: WireMesh }>(
      "POST", "/sessions", { obj });
  }

  getMesh(sid: string) {
    return this.req<WireMesh>("GET", `/sessions/${sid}/mesh`);
  }

  pick(sid: string, faces: number[], referenceVertex?: number) {
    return this.req<PickResponse>("POST", `/sessions/${sid}/pick`, {
      faces, reference_vertex: referenceVertex ?? null,
    });
  }

  records() {
    return this.req<{ records: RecordInfo[] }>("GET", "/records");
  }

  recordPreview(id: number) {
    return this.req<WireMesh>("GET", `/records/${id}/preview`);
  }

  applyRecord(sid: string, recordId: number) {
    return this.req<{ mesh: WireMesh; trace: TraceStep[] }>(
      "POST", `/sessions/${sid}/apply`, { record_id: recordId });
  }

  applyTee(sid: string, tee: string) {
    return this.req<{ mesh: WireMesh; trace: TraceStep[] }>(
      "POST", `/sessions/${sid}/apply`, { tee });
  }

  undo(sid: string) {
    return this.req<{ mesh: WireMesh }>("POST", `/sessions/${sid}/undo`);
  }

  loadProgram(sid: string, tee: string) {
    return this.req<{ steps: number }>(
      "POST", `/sessions/${sid}/program`, { tee });
  }

  step(sid: string, direction: "forward" | "back") {
    return this.req<{
      mesh: WireMesh; step_index: number; steps: number; trace: TraceStep[];
    }>("POST", `/sessions/${sid}/step`, { direction });
  }

  exportObj(sid: string) {
    return this.req<string>("GET", `/sessions/${sid}/export`);
  }
}
