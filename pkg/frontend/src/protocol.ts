/**
 * Typed client for the rating service's versioned JSON interface.
 *
 * All session mutations go through here. Submission is idempotent from
 * the UI's point of view: a rating that the service has already stored
 * answers 409, which the client folds into a normal success so that a
 * retried request after a dropped response cannot wedge a session.
 */

export type SessionState = 'warmup' | 'active' | 'complete';

export type SessionInfo = {
  session_id: string;
  annotator_id: string;
  state: SessionState;
  rated: number;
  total: number;
};

export type RatingItem = {
  sentence_id: string;
  text: string;
  is_warmup: boolean;
  instruction: string;
  scale: { min: number; max: number };
};

export type NextResponse = SessionInfo & { item: RatingItem | null };

export type RatingAck = SessionInfo & { accepted: boolean };

export class ServiceError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

/** Everything the UI needs from the service; AnnotationClient implements it. */
export interface RatingService {
  createSession(annotatorId: string, seed?: number): Promise<SessionInfo>;
  getSession(sessionId: string): Promise<SessionInfo>;
  nextItem(sessionId: string): Promise<NextResponse>;
  submitRating(sessionId: string, sentenceId: string, value: number): Promise<RatingAck>;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ClientOptions {
  fetchFn?: FetchLike;
  /** Additional attempts after a network-level failure. */
  retries?: number;
  retryDelayMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class AnnotationClient implements RatingService {
  private base: string;
  private fetchFn: FetchLike;
  private retries: number;
  private retryDelayMs: number;
  private sleep: (ms: number) => Promise<void>;

  constructor(baseUrl: string, options: ClientOptions = {}) {
    this.base = baseUrl.replace(/\/+$/, '');
    this.fetchFn = options.fetchFn ?? ((url, init) => fetch(url, init));
    this.retries = options.retries ?? 3;
    this.retryDelayMs = options.retryDelayMs ?? 400;
    this.sleep = options.sleep ?? defaultSleep;
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let lastFailure: unknown = null;
    for (let attempt = 0; attempt <= this.retries; attempt++) {
      if (attempt > 0) {
        await this.sleep(this.retryDelayMs * attempt);
      }
      let response: Response;
      try {
        response = await this.fetchFn(`${this.base}${path}`, init);
      } catch (failure) {
        // Network-level failure: the request may or may not have been
        // applied, so retry; every mutation we send is idempotent.
        lastFailure = failure;
        continue;
      }
      const body = await response.json().catch(() => ({}));
      if (!response.ok) {
        const message =
          typeof (body as { error?: unknown }).error === 'string'
            ? (body as { error: string }).error
            : `request failed with status ${response.status}`;
        throw new ServiceError(response.status, message);
      }
      return body;
    }
    throw new ServiceError(0, `network failure after ${this.retries + 1} attempts: ${lastFailure}`);
  }

  private post(path: string, payload: unknown): Promise<unknown> {
    return this.request(path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(payload),
    });
  }

  async createSession(annotatorId: string, seed?: number): Promise<SessionInfo> {
    const payload: Record<string, unknown> = { annotator_id: annotatorId };
    if (seed !== undefined) {
      payload.seed = seed;
    }
    return (await this.post('/v1/sessions', payload)) as SessionInfo;
  }

  async getSession(sessionId: string): Promise<SessionInfo> {
    return (await this.request(`/v1/sessions/${sessionId}`)) as SessionInfo;
  }

  async nextItem(sessionId: string): Promise<NextResponse> {
    return (await this.request(`/v1/sessions/${sessionId}/next`)) as NextResponse;
  }

  async submitRating(sessionId: string, sentenceId: string, value: number): Promise<RatingAck> {
    if (!Number.isInteger(value)) {
      throw new ServiceError(0, `rating must be an integer, got ${value}`);
    }
    try {
      return (await this.post(`/v1/sessions/${sessionId}/ratings`, {
        sentence_id: sentenceId,
        value,
      })) as RatingAck;
    } catch (failure) {
      if (failure instanceof ServiceError && failure.status === 409) {
        // Already stored (a retry raced a lost response); report the
        // current session state as if this submission had succeeded.
        const info = await this.getSession(sessionId);
        return { ...info, accepted: true };
      }
      throw failure;
    }
  }
}
