/** Thin typed client for the review service HTTP API. */

import type { ReviewTask } from "./logic.js";

export interface NextTaskResponse {
  done: boolean;
  task: ReviewTask | null;
}

export interface Progress {
  total: number;
  resolved: number;
  accepted: number;
  retention_rate: number | null;
}

export interface VerdictPayload {
  pair_id: string;
  annotator: string;
  criteria: Record<string, boolean>;
  accept: boolean;
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.baseUrl + path, init);
    if (!res.ok) {
      const body = await res.text();
      throw new Error(`${res.status} ${path}: ${body}`);
    }
    return (await res.json()) as T;
  }

  nextTask(annotator: string): Promise<NextTaskResponse> {
    return this.request(`/api/tasks/next?annotator=${encodeURIComponent(annotator)}`);
  }

  /** Server recomputes accept from the criteria; the returned record is authoritative. */
  submitVerdict(payload: VerdictPayload): Promise<{ accept: boolean; pair_id: string }> {
    return this.request("/api/verdicts", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  progress(): Promise<Progress> {
    return this.request("/api/progress");
  }
}
