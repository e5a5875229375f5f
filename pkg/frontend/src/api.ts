// Typed client for the advisor session API. All dialogue logic lives on the
// server; this wrapper only moves JSON.

export interface ItemCard {
  id: string;
  name: string;
  address: string;
  phone: string;
}

export interface TurnReply {
  move: string;
  prompt: string;
  item: ItemCard | null;
  values: string[] | null;
  terminal: boolean;
  terminal_status: string | null;
}

export interface SessionSnapshot {
  session_id: string;
  user_id: string;
  constrained: string[];
  rejected: string[];
  fixed: string[];
  number_of_items: number;
  last_system_move: string | null;
  last_user_move: string | null;
  last_prompt: string | null;
  last_item: ItemCard | null;
  terminal: boolean;
  created_at: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class AdvisorApi {
  constructor(
    private baseUrl = "",
    private fetchFn: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, {
        method,
        headers: body === undefined ? {} : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, `network error: ${String(err)}`);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const payload = await response.json();
        if (payload && typeof payload.detail === "string") detail = payload.detail;
      } catch {
        // keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    if (response.status === 204) return undefined as T;
    return (await response.json()) as T;
  }

  createSession(userId: string): Promise<{ session_id: string; prompt: string }> {
    return this.request("POST", "/api/sessions", { user_id: userId });
  }

  sendUtterance(sessionId: string, text: string): Promise<TurnReply> {
    return this.request("POST", `/api/sessions/${sessionId}/utterances`, { text });
  }

  getSession(sessionId: string): Promise<SessionSnapshot> {
    return this.request("GET", `/api/sessions/${sessionId}`);
  }

  closeSession(sessionId: string): Promise<void> {
    return this.request("DELETE", `/api/sessions/${sessionId}`);
  }
}
