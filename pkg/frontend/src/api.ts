/** Typed client for the gate's HTTP/JSON API. */

export interface SessionCreated {
  session_id: string;
  state: string;
  challenge_representative: string;
  expires_at: number;
}

export interface SessionView {
  session_id: string;
  payer: string;
  state: 'awaiting_ownership' | 'awaiting_payment' | 'granted' | 'expired' | 'failed';
  challenge_representative: string;
  created_at: number;
  expires_at: number;
  deposit_account?: string;
  amount_raw?: string;
  amount_xno?: string;
  payment_uri?: string;
  pay_by?: number;
}

export interface GrantResponse {
  state: 'granted';
  access_token: string;
  token_expires_at: number;
}

export interface SearchResult {
  query: string;
  result: { word_count: number; unique_words: number; echo: string };
}

export interface GateErrorBody {
  error: string;
  reason?: string;
  observed?: string;
  best_amount?: string;
}

export class GateApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: GateErrorBody,
  ) {
    super(`${status}: ${body.error}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class GateApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown, token?: string): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers['Content-Type'] = 'application/json';
    if (token !== undefined) headers['Authorization'] = `Bearer ${token}`;
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const json = await response.json();
    if (!response.ok) {
      throw new GateApiError(response.status, json as GateErrorBody);
    }
    return json as T;
  }

  createSession(account: string): Promise<SessionCreated> {
    return this.request('POST', '/v1/sessions', { account });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request('GET', `/v1/sessions/${sessionId}`);
  }

  verifyOwnership(sessionId: string): Promise<SessionView> {
    return this.request('POST', `/v1/sessions/${sessionId}/ownership/verify`);
  }

  verifyPayment(sessionId: string): Promise<GrantResponse> {
    return this.request('POST', `/v1/sessions/${sessionId}/payment/verify`);
  }

  search(token: string, query: string): Promise<SearchResult> {
    return this.request('GET', `/v1/protected/search?q=${encodeURIComponent(query)}`, undefined, token);
  }
}
