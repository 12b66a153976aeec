// Typed client for the review server JSON API.

export interface BBox {
  cx: number;
  cy: number;
  w: number;
  h: number;
}

export interface LabelRecordPayload {
  category_id: number;
  bbox?: number[]; // [cx, cy, w, h]
  polygon?: number[]; // [x1, y1, ...]
}

export interface LabelsPayload {
  pair_id: string;
  records: LabelRecordPayload[];
}

export interface MaskEntry {
  category_id: number;
  confidence: number;
  rle: number[];
}

export interface MaskPayload {
  pair_id: string;
  width: number;
  height: number;
  ontology: string[];
  masks: MaskEntry[];
}

export interface PairPayload {
  pair_id: string;
  status: string;
  bands: string[];
  images: Record<string, string>;
  labels: Record<string, LabelsPayload>;
  masks: MaskPayload | null;
}

export interface PendingPage {
  entries: { pair_id: string; status: string }[];
  pending: number;
  decided: number;
}

export interface StatsPayload {
  decisions: number;
  decided: number;
  pending: number;
  mean_elapsed_seconds: number | null;
  projected_hours_remaining: number | null;
}

export type Action = "Accept" | "Edit" | "Reject";

export interface DecisionBody {
  action: Action;
  band: string;
  reviewer: string;
  elapsed_seconds: number;
  token: string;
  edited_labels?: LabelsPayload;
}

export class ConflictError extends Error {}

export function newToken(): string {
  if (typeof crypto !== "undefined" && "randomUUID" in crypto) {
    return crypto.randomUUID();
  }
  return `tok-${Date.now()}-${Math.floor(Math.random() * 1e9)}`;
}

export class ReviewClient {
  constructor(private baseUrl: string = "") {}

  async listPending(limit = 50, offset = 0): Promise<PendingPage> {
    const res = await fetch(
      `${this.baseUrl}/api/pairs?status=pending&limit=${limit}&offset=${offset}`,
    );
    if (!res.ok) throw new Error(`listPending failed: ${res.status}`);
    return res.json();
  }

  async getPair(pairId: string): Promise<PairPayload> {
    const res = await fetch(`${this.baseUrl}/api/pairs/${pairId}`);
    if (!res.ok) throw new Error(`getPair failed: ${res.status}`);
    return res.json();
  }

  async stats(): Promise<StatsPayload> {
    const res = await fetch(`${this.baseUrl}/api/stats`);
    if (!res.ok) throw new Error(`stats failed: ${res.status}`);
    return res.json();
  }

  // Retries network failures with the SAME idempotency token, so a flaky
  // connection can never double-log a decision.
  async postDecision(
    pairId: string,
    body: DecisionBody,
    retries = 2,
  ): Promise<{ pair_id: string; status: string }> {
    let lastError: unknown = null;
    for (let attempt = 0; attempt <= retries; attempt++) {
      try {
        const res = await fetch(`${this.baseUrl}/api/pairs/${pairId}/decision`, {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify(body),
        });
        if (res.status === 409) throw new ConflictError(await res.text());
        if (!res.ok) throw new Error(`decision failed: ${res.status}`);
        return res.json();
      } catch (err) {
        if (err instanceof ConflictError) throw err;
        lastError = err;
      }
    }
    throw lastError instanceof Error ? lastError : new Error(String(lastError));
  }
}
