// Thin client over the survey service's four endpoints. Transport-level
// failures throw; HTTP statuses are returned so the session logic can
// branch on 409/404 without exceptions.

export interface ImageRef {
  id: string;
  url: string;
}

export interface PairPayload {
  left: ImageRef;
  right: ImageRef;
  indicator: string;
  question_text: string;
}

export interface ProgressPayload {
  participant: string;
  target: number;
  progress: Record<string, number>;
}

export interface ApiResult<T> {
  status: number;
  body: T;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<ApiResult<T>> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    let body: T;
    try {
      body = (await response.json()) as T;
    } catch {
      body = undefined as unknown as T;
    }
    return { status: response.status, body };
  }

  getPair(indicator: string, participant: string): Promise<ApiResult<PairPayload>> {
    const query = new URLSearchParams({ indicator, participant });
    return this.request(`/api/pair?${query}`);
  }

  postResponse(
    indicator: string,
    left: string,
    right: string,
    winner: "left" | "right",
    participant: string,
  ): Promise<ApiResult<{ recorded: boolean }>> {
    return this.request(`/api/response`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ indicator, left, right, winner, participant }),
    });
  }

  getProgress(participant: string): Promise<ApiResult<ProgressPayload>> {
    const query = new URLSearchParams({ participant });
    return this.request(`/api/progress?${query}`);
  }

  getScores(indicator: string): Promise<ApiResult<unknown>> {
    const query = new URLSearchParams({ indicator });
    return this.request(`/api/scores?${query}`);
  }
}
