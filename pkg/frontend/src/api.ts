// Typed client for the local prediction service. The client does no math:
// every number shown in the UI comes straight from these responses.

export interface ClassPrediction {
  name: string;
  raw_probability: number;
  calibrated_probability: number;
  operating_point: number;
}

export interface OodVerdict {
  admitted: boolean;
  metric: string;
  score: number;
  threshold: number;
  error_map_png_base64?: string;
}

export interface PredictResponse {
  ood: OodVerdict | null;
  predictions: ClassPrediction[] | null;
}

export interface HealthInfo {
  status: string;
  format_version: number;
  class_names: string[];
  input_size: number;
  ood_gate: boolean;
  ood_metric: string | null;
}

export type ExplanationMethod = 'saliency' | 'cam';

export class ApiError extends Error {
  constructor(message: string, readonly status: number, readonly kind: string = '') {
    super(message);
  }
}

async function throwApiError(response: Response): Promise<never> {
  let kind = '';
  let detail = `service responded ${response.status}`;
  try {
    const body = (await response.json()) as { error?: string; detail?: string };
    kind = body.error ?? '';
    detail = body.detail ?? detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(detail, response.status, kind);
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, '') + path;
  }

  async health(): Promise<HealthInfo> {
    const response = await fetch(this.url('/health'));
    if (!response.ok) await throwApiError(response);
    return (await response.json()) as HealthInfo;
  }

  async predict(image: Blob): Promise<PredictResponse> {
    const response = await fetch(this.url('/predict'), {
      method: 'POST',
      headers: { 'Content-Type': 'application/octet-stream' },
      body: image,
    });
    if (!response.ok) await throwApiError(response);
    return (await response.json()) as PredictResponse;
  }

  /** Fetch an explanation overlay as PNG bytes. */
  async explain(image: Blob, classIndex: number | 'all', method: ExplanationMethod): Promise<ArrayBuffer> {
    const query = `?class=${classIndex}&method=${method}`;
    const response = await fetch(this.url('/explain') + query, {
      method: 'POST',
      headers: { 'Content-Type': 'application/octet-stream' },
      body: image,
    });
    if (!response.ok) await throwApiError(response);
    return response.arrayBuffer();
  }
}

export function pngDataUrl(bytes: ArrayBuffer | Uint8Array): string {
  const view = bytes instanceof Uint8Array ? bytes : new Uint8Array(bytes);
  let binary = '';
  const chunk = 0x8000;
  for (let i = 0; i < view.length; i += chunk) {
    binary += String.fromCharCode(...view.subarray(i, i + chunk));
  }
  return `data:image/png;base64,${btoa(binary)}`;
}
