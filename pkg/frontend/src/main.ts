import { ApiClient } from "./api.js";
import { ConsoleSessionModel } from "./model.js";
import { SessionTail } from "./tail.js";
import type { ControlVerb, SessionView } from "./types.js";

const DEFAULT_BASE_URL = "http://127.0.0.1:8470";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class ConsoleApp {
  private api: ApiClient;
  private model: ConsoleSessionModel | null = null;
  private tail: SessionTail | null = null;

  constructor() {
    const params = new URLSearchParams(window.location.search);
    const baseUrl =
      params.get("api") ?? localStorage.getItem("agentrange.baseUrl") ?? DEFAULT_BASE_URL;
    el<HTMLInputElement>("base-url").value = baseUrl;
    this.api = new ApiClient(baseUrl);
    this.bind();
    void this.refreshSessions();
    window.setInterval(() => void this.refreshSessions(), 2000);
  }

  private bind(): void {
    el<HTMLButtonElement>("apply-base-url").onclick = () => {
      const baseUrl = el<HTMLInputElement>("base-url").value.trim();
      localStorage.setItem("agentrange.baseUrl", baseUrl);
      this.api = new ApiClient(baseUrl);
      void this.refreshSessions();
    };
    for (const verb of ["pause", "resume", "abort"] as ControlVerb[]) {
      el<HTMLButtonElement>(`control-${verb}`).onclick = () => void this.control(verb);
    }
    el<HTMLButtonElement>("control-inject").onclick = () => {
      const box = el<HTMLInputElement>("inject-text");
      const text = box.value.trim();
      if (!text) return this.setStatus("inject needs text");
      void this.control("inject", text);
      box.value = "";
    };
  }

  private setStatus(text: string): void {
    el("status").textContent = text;
  }

  private async refreshSessions(): Promise<void> {
    let views: SessionView[];
    try {
      views = await this.api.listSessions();
      this.setStatus("connected");
    } catch (error) {
      this.setStatus(`api unreachable: ${String(error)}`);
      return;
    }
    const list = el("session-list");
    list.replaceChildren(
      ...views.map((view) => {
        const item = document.createElement("li");
        const button = document.createElement("button");
        button.textContent = `${view.session_id.slice(0, 10)} [${view.state}] ${view.pattern}`;
        button.onclick = () => void this.open(view.session_id);
        if (this.model?.sessionId === view.session_id) button.classList.add("active");
        item.append(button);
        return item;
      }),
    );
  }

  private async open(sessionId: string): Promise<void> {
    this.tail?.stop();
    const model = new ConsoleSessionModel(sessionId);
    model.view = await this.api.getSession(sessionId);
    this.model = model;
    this.tail = new SessionTail(this.api, model, {
      onStatus: (status) => this.setStatus(status),
    });
    const render = () => this.render();
    const pump = async () => {
      const ticker = window.setInterval(render, 150);
      try {
        await this.tail!.run();
      } finally {
        window.clearInterval(ticker);
        render();
      }
    };
    void pump();
  }

  private async control(verb: ControlVerb, text?: string): Promise<void> {
    if (!this.model) return this.setStatus("open a session first");
    if (!this.model.controlsEnabled()) return this.setStatus("session finished; controls disabled");
    try {
      const ack = await this.api.sendControl(this.model.sessionId, verb, text);
      this.setStatus(
        ack.applied
          ? `${verb} applied at seq ${ack.seq}`
          : ack.noop
            ? `${verb}: no-op`
            : `${verb} queued`,
      );
    } catch (error) {
      this.setStatus(`${verb} rejected: ${String(error)}`);
    }
  }

  private render(): void {
    const model = this.model;
    if (!model) return;
    const counters = model.counters();
    el("transcript").textContent = model.transcriptLines().join("\n");
    el("counter-interactions").textContent = String(counters.interactions);
    el("counter-turns").textContent = String(counters.turns);
    el("counter-tokens").textContent = `${counters.promptTokens}+${counters.completionTokens}`;
    el("counter-cost").textContent = `$${counters.cost.toFixed(6)}`;
    el("counter-agent").textContent = counters.activeAgent ?? "-";
    const gauge = el<HTMLProgressElement>("budget-gauge");
    gauge.max = counters.maxInteractions ?? 1;
    gauge.value = counters.interactions;
    el("budget-label").textContent = counters.maxInteractions
      ? `${counters.interactions} / ${counters.maxInteractions} interactions`
      : "";
    const disabled = !model.controlsEnabled();
    for (const verb of ["pause", "inject", "resume", "abort"]) {
      el<HTMLButtonElement>(`control-${verb}`).disabled = disabled;
    }
    if (counters.finished) {
      this.setStatus(`finished: ${counters.stopReason}`);
    }
    const pane = el("transcript");
    pane.scrollTop = pane.scrollHeight;
  }
}

new ConsoleApp();
