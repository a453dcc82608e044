// Client for the editing service JSON API (mirrors the service schemas).

export interface SynthesizeResponse {
  image: string; // base64 PNG
  pose: number[][] | null; // J x [x, y, visible]
  orientation: number;
  latency_ms: number;
}

export interface BasicPoseSet {
  version: number;
  K: number;
  J: number;
  frame: [number, number]; // [H, W]
  poses: number[][][]; // K x J x [x, y, visible]
}

export interface HealthResponse {
  status: string;
  model_version: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly field: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function readError(resp: Response): Promise<ApiError> {
  let field = "service";
  let message = `request failed with status ${resp.status}`;
  try {
    const body = (await resp.json()) as { error?: { field?: string; message?: string } };
    if (body.error) {
      field = body.error.field ?? field;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the defaults
  }
  return new ApiError(resp.status, field, message);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async health(): Promise<HealthResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/health`);
    if (!resp.ok) throw await readError(resp);
    return (await resp.json()) as HealthResponse;
  }

  async basicPoses(): Promise<BasicPoseSet> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/basic-poses`);
    if (!resp.ok) throw await readError(resp);
    return (await resp.json()) as BasicPoseSet;
  }

  async synthesize(imageBase64: string, caption: string): Promise<SynthesizeResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/synthesize`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ image: imageBase64, caption, options: { return_pose: true } }),
    });
    if (!resp.ok) throw await readError(resp);
    return (await resp.json()) as SynthesizeResponse;
  }
}
