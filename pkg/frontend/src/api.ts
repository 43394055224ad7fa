// Typed client for the review service. The UI treats the server as the
// single source of truth: every label change goes through decide().

export interface VerdictView {
  supported: string;
  explanation: string;
  attempts: number;
}

export interface LabelOption {
  id: number;
  name: string;
}

export type DecisionStatus = "pending" | "keep" | "set_label";

export interface QueueItem {
  id: string;
  text: string;
  predicted_label: number;
  predicted_label_name: string;
  verdict: VerdictView;
  decision: DecisionStatus;
  set_label?: number;
  explanation_snippet?: string;
  label_options: LabelOption[];
}

export interface Progress {
  total: number;
  decided: number;
  pending: number;
}

export type DecisionBody =
  | { action: "keep"; reviewer?: string }
  | { action: "set_label"; label: number; reviewer?: string };

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorMessage(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { error?: string };
    return body.error ?? `HTTP ${resp.status}`;
  } catch {
    return `HTTP ${resp.status}`;
  }
}

export class ReviewApi {
  constructor(
    private base: string = "",
    private fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.base}${path}`);
    if (!resp.ok) {
      throw new ApiError(resp.status, await errorMessage(resp));
    }
    return (await resp.json()) as T;
  }

  queue(status: "pending" | "decided" | "all" = "all"): Promise<QueueItem[]> {
    return this.get<QueueItem[]>(`/api/queue?status=${status}`);
  }

  progress(): Promise<Progress> {
    return this.get<Progress>("/api/progress");
  }

  async decide(id: string, body: DecisionBody): Promise<QueueItem> {
    const resp = await this.fetchFn(
      `${this.base}/api/items/${encodeURIComponent(id)}/decision`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      },
    );
    if (!resp.ok) {
      throw new ApiError(resp.status, await errorMessage(resp));
    }
    return (await resp.json()) as QueueItem;
  }
}
