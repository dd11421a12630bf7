/**
 * Typed client for the beautification service. Every service interaction in
 * the studio goes through this module, so the UI can never invent a score or
 * a weight — all displayed numbers arrive through these response types.
 */

import type {
  BeautifyResponse,
  ErrorEnvelope,
  HealthInfo,
  ReferenceEntry,
  ScoreResponse,
} from "./types.js";

/** A structured service failure, carrying the error-envelope fields. */
export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
    public readonly constraint?: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export interface BeautifyParams {
  target: Blob;
  /** Uploaded reference image; mutually exclusive with referenceId. */
  reference?: Blob;
  /** Gallery reference id from GET /references. */
  referenceId?: string;
  /** Number of evenly spaced weights from 0 to 1. */
  steps?: number;
  /** Explicit strictly increasing w2 values in [0, 1]; overrides steps. */
  weights?: number[];
  wantScores?: boolean;
  signal?: AbortSignal;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class StudioClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) =>
      globalThis.fetch(input, init),
  ) {}

  async health(): Promise<HealthInfo> {
    return this.request<HealthInfo>("/healthz");
  }

  async references(): Promise<ReferenceEntry[]> {
    const body = await this.request<{ references: ReferenceEntry[] }>(
      "/references",
    );
    return body.references;
  }

  async score(imageId: string): Promise<ScoreResponse> {
    return this.request<ScoreResponse>(
      `/score?image=${encodeURIComponent(imageId)}`,
    );
  }

  async beautify(params: BeautifyParams): Promise<BeautifyResponse> {
    const form = new FormData();
    form.append("target", params.target, "target.png");
    if (params.reference !== undefined) {
      form.append("reference", params.reference, "reference.png");
    }
    if (params.referenceId !== undefined) {
      form.append("reference_id", params.referenceId);
    }
    if (params.weights !== undefined) {
      form.append("weights", JSON.stringify(params.weights));
    } else if (params.steps !== undefined) {
      form.append("steps", String(params.steps));
    }
    if (params.wantScores) {
      form.append("want_scores", "true");
    }
    return this.request<BeautifyResponse>("/beautify", {
      method: "POST",
      body: form,
      signal: params.signal,
    });
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      throw await toServiceError(response);
    }
    return (await response.json()) as T;
  }
}

async function toServiceError(response: Response): Promise<ServiceError> {
  try {
    const body = (await response.json()) as ErrorEnvelope;
    return new ServiceError(
      response.status,
      body.error.code,
      body.error.message,
      body.error.constraint,
    );
  } catch {
    return new ServiceError(
      response.status,
      "unexpected_error",
      `service returned HTTP ${response.status}`,
    );
  }
}
