/** Typed client for the try-on HTTP API: /health, /api/presets, /api/edit.
 *
 * Error responses carry a machine-parseable {code, message} payload which is
 * surfaced as ApiError so the UI can show it verbatim with a retry option.
 */

export interface HealthInfo {
  status: string;
  backbones: string;
  latent_layers: number;
  resolution: number;
  model_manifest?: string | null;
}

export interface Presets {
  colors: string[];
  styles: string[];
  prompts: string[];
  default_masks: string[]; // base64 PNGs
  mask_resolution: number;
}

export interface EditOptions {
  return_edit?: boolean;
  return_decoupled?: boolean;
  gamma_override?: number;
}

export interface EditRequest {
  image: string; // base64 PNG
  mask: string; // base64 PNG, values {0, 255}
  prompt: string;
  options?: EditOptions;
}

export interface EditResponse {
  edit_image?: string;
  decoupled_image?: string;
  timing_ms: number;
  model_manifest: string;
}

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.code = code;
    this.status = status;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn: FetchLike = (...args) => fetch(...args)) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError("network_error", `request to ${path} failed: ${String(err)}`, 0);
    }
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      // non-JSON body handled below
    }
    if (!resp.ok) {
      const payload = body as { code?: string; message?: string; detail?: unknown } | null;
      const code = payload?.code ?? "http_error";
      const message =
        payload?.message ?? (payload?.detail ? JSON.stringify(payload.detail) : `HTTP ${resp.status}`);
      throw new ApiError(code, message, resp.status);
    }
    if (body === null) throw new ApiError("bad_response", `non-JSON response from ${path}`, resp.status);
    return body as T;
  }

  health(): Promise<HealthInfo> {
    return this.request<HealthInfo>("/health");
  }

  presets(): Promise<Presets> {
    return this.request<Presets>("/api/presets");
  }

  edit(req: EditRequest): Promise<EditResponse> {
    return this.request<EditResponse>("/api/edit", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
  }
}
