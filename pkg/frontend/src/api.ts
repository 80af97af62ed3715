/**
 * Typed client for the annotation service.  All state changes flow
 * through these endpoints; the UI never mutates artifacts locally.
 */

export interface SessionInfo {
  id: string;
  width: number;
  height: number;
}

export interface JobInfo {
  state: "queued" | "running" | "done" | "failed";
  error: string | null;
  stage?: string;
  cached?: boolean;
}

export interface RunResponse {
  job: string;
  state: string;
  cached?: boolean;
}

export interface WireStroke {
  label: string;
  points: Array<[number, number]>;
  radius: number;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`service ${status}: ${detail}`);
  }
}

async function check(response: Response): Promise<Response> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ServiceError(response.status, detail);
  }
  return response;
}

export class AnnotationClient {
  constructor(readonly baseUrl: string) {}

  async createSession(png: Blob | ArrayBuffer | Uint8Array): Promise<SessionInfo> {
    const body = png instanceof Uint8Array ? new Uint8Array(png).buffer as ArrayBuffer : png;
    const response = await check(
      await fetch(`${this.baseUrl}/sessions`, {
        method: "POST",
        headers: { "content-type": "image/png" },
        body: body as BodyInit,
      }),
    );
    return (await response.json()) as SessionInfo;
  }

  async postSeeds(sessionId: string, seeds: Array<[number, number]>): Promise<void> {
    await check(
      await fetch(`${this.baseUrl}/sessions/${sessionId}/seeds`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ seeds }),
      }),
    );
  }

  async postStrokes(sessionId: string, strokes: WireStroke[]): Promise<string> {
    const response = await check(
      await fetch(`${this.baseUrl}/sessions/${sessionId}/strokes`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ strokes }),
      }),
    );
    const body = (await response.json()) as { annotation_sha256: string };
    return body.annotation_sha256;
  }

  async runStage(
    sessionId: string,
    stage: string,
    payload: { params: Record<string, number> },
  ): Promise<RunResponse> {
    const response = await check(
      await fetch(`${this.baseUrl}/sessions/${sessionId}/stages/${stage}/run`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(payload),
      }),
    );
    return (await response.json()) as RunResponse;
  }

  async getJob(sessionId: string, jobId: string): Promise<JobInfo> {
    const response = await check(
      await fetch(`${this.baseUrl}/sessions/${sessionId}/jobs/${jobId}`),
    );
    return (await response.json()) as JobInfo;
  }

  /** Poll a job until it terminates; throws with the job error on failure. */
  async waitForJob(
    sessionId: string,
    jobId: string,
    intervalMs = 250,
    timeoutMs = 600_000,
  ): Promise<JobInfo> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.getJob(sessionId, jobId);
      if (job.state === "done") return job;
      if (job.state === "failed") throw new Error(job.error ?? "stage failed");
      if (Date.now() > deadline) throw new Error(`job ${jobId} timed out`);
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
  }

  async fetchArtifact(sessionId: string, name: string): Promise<ArrayBuffer> {
    const response = await check(
      await fetch(`${this.baseUrl}/sessions/${sessionId}/artifacts/${name}`),
    );
    return response.arrayBuffer();
  }

  async stageStates(sessionId: string): Promise<Record<string, { fresh: boolean }>> {
    const response = await check(await fetch(`${this.baseUrl}/sessions/${sessionId}/stages`));
    return (await response.json()) as Record<string, { fresh: boolean }>;
  }
}
