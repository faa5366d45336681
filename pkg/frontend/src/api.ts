import { ApiError } from "./types.js";
import type { ControlAck, ControlVerb, SessionView, TraceEvent } from "./types.js";

/** Thin client over the control API; the base URL is the only setting. */
export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async checked(response: Response): Promise<Response> {
    if (!response.ok) {
      let detail = `HTTP ${response.status}`;
      try {
        const body = await response.json();
        if (body.detail) detail = String(body.detail);
      } catch {
        // keep the status text
      }
      throw new ApiError(detail, response.status);
    }
    return response;
  }

  async listSessions(): Promise<SessionView[]> {
    const response = await this.checked(await fetch(this.url("/sessions")));
    return response.json();
  }

  async getSession(sessionId: string): Promise<SessionView> {
    const response = await this.checked(await fetch(this.url(`/sessions/${sessionId}`)));
    return response.json();
  }

  async sendControl(sessionId: string, verb: ControlVerb, text?: string): Promise<ControlAck> {
    const response = await this.checked(
      await fetch(this.url(`/sessions/${sessionId}/control`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ kind: verb, payload: text ?? null }),
      }),
    );
    return response.json();
  }

  /** One non-streaming fetch of buffered events (polling fallback). */
  async fetchEventsOnce(sessionId: string, fromSeq: number): Promise<TraceEvent[]> {
    const response = await this.checked(
      await fetch(this.url(`/sessions/${sessionId}/events?from=${fromSeq}&follow=0`)),
    );
    const text = await response.text();
    return text
      .split("\n")
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as TraceEvent);
  }

  /**
   * Stream events as JSON lines, invoking onEvent per event, until the
   * server closes the stream (session finished) or the signal aborts.
   */
  async streamEvents(
    sessionId: string,
    fromSeq: number,
    onEvent: (event: TraceEvent) => void,
    signal?: AbortSignal,
  ): Promise<void> {
    const response = await this.checked(
      await fetch(this.url(`/sessions/${sessionId}/events?from=${fromSeq}`), { signal }),
    );
    const body = response.body;
    if (!body) throw new ApiError("response has no body to stream", 0);
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffered = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (value) {
        buffered += decoder.decode(value, { stream: true });
        let newline;
        while ((newline = buffered.indexOf("\n")) >= 0) {
          const line = buffered.slice(0, newline).trim();
          buffered = buffered.slice(newline + 1);
          if (line) onEvent(JSON.parse(line) as TraceEvent);
        }
      }
      if (done) break;
    }
    const tail = buffered.trim();
    if (tail) onEvent(JSON.parse(tail) as TraceEvent);
  }
}
