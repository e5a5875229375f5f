// DOM chat view. No dialogue logic here: every turn is one POST to the
// service, and reloading the page rebuilds the view from GET /api/sessions.

import { AdvisorApi, ApiError, ItemCard } from "./api.js";
import { ChatViewState, appendMessage, chipsForMove, initialState } from "./state.js";

const SESSION_KEY = "advisor.session";

export function renderItemCard(item: ItemCard, onReply: (text: string) => void): HTMLElement {
  const card = document.createElement("div");
  card.className = "item-card";
  const name = document.createElement("div");
  name.className = "item-name";
  name.textContent = item.name;
  card.append(name);
  if (item.address) {
    const address = document.createElement("div");
    address.className = "item-address";
    address.textContent = item.address;
    card.append(address);
  }
  if (item.phone) {
    const phone = document.createElement("div");
    phone.className = "item-phone";
    phone.textContent = item.phone;
    card.append(phone);
  }
  const actions = document.createElement("div");
  actions.className = "item-actions";
  const accept = document.createElement("button");
  accept.type = "button";
  accept.className = "accept";
  accept.textContent = "Sounds good";
  accept.addEventListener("click", () => onReply("yes"));
  const reject = document.createElement("button");
  reject.type = "button";
  reject.className = "reject";
  reject.textContent = "What else?";
  reject.addEventListener("click", () => onReply("what else"));
  actions.append(accept, reject);
  card.append(actions);
  return card;
}

export class ChatView {
  state: ChatViewState;
  private messagesEl: HTMLElement;
  private chipsEl: HTMLElement;
  private inputEl: HTMLInputElement;
  private sendEl: HTMLButtonElement;
  private bannerEl: HTMLElement;
  private retry: (() => void) | null = null;

  constructor(
    root: HTMLElement,
    private api: AdvisorApi,
    private storage: Storage | null = null,
  ) {
    this.state = initialState();
    root.innerHTML = `
      <main class="messages"></main>
      <div class="banner" hidden></div>
      <div class="chips"></div>
      <form class="composer">
        <input type="text" autocomplete="off"
               placeholder="Say something like 'cheap chinese in palo alto'" />
        <button type="submit">Send</button>
      </form>
    `;
    this.messagesEl = root.querySelector(".messages") as HTMLElement;
    this.chipsEl = root.querySelector(".chips") as HTMLElement;
    this.inputEl = root.querySelector("input") as HTMLInputElement;
    this.sendEl = root.querySelector("button[type=submit]") as HTMLButtonElement;
    this.bannerEl = root.querySelector(".banner") as HTMLElement;
    (root.querySelector("form") as HTMLFormElement).addEventListener("submit", (event) => {
      event.preventDefault();
      const text = this.inputEl.value.trim();
      if (text) void this.send(text);
    });
  }

  async start(userId: string): Promise<void> {
    await this.guard(async () => {
      const created = await this.api.createSession(userId);
      this.state.userId = userId;
      this.state.sessionId = created.session_id;
      this.state.terminal = false;
      this.storage?.setItem(
        SESSION_KEY, JSON.stringify({ userId, sessionId: created.session_id }),
      );
      this.addAdvisorMessage(created.prompt, null);
      this.state.chips = chipsForMove("attempt-constrain");
      this.render();
    }, () => this.start(userId));
  }

  async send(text: string): Promise<void> {
    if (this.state.pending || this.state.terminal || !this.state.sessionId) return;
    this.addUserMessage(text);
    this.inputEl.value = "";
    await this.guard(async () => {
      const reply = await this.api.sendUtterance(this.state.sessionId as string, text);
      this.addAdvisorMessage(reply.prompt, reply.item);
      if (reply.terminal) {
        this.state.terminal = true;
        this.state.chips = [];
        this.storage?.removeItem(SESSION_KEY);
      } else {
        this.state.chips = chipsForMove(reply.move, reply.values);
      }
      this.render();
    }, () => this.send(text));
  }

  /** Rebuild the visible state for a stored session after a page reload. */
  async restore(): Promise<boolean> {
    const raw = this.storage?.getItem(SESSION_KEY);
    if (!raw) return false;
    let stored: { userId: string; sessionId: string };
    try {
      stored = JSON.parse(raw);
    } catch {
      this.storage?.removeItem(SESSION_KEY);
      return false;
    }
    try {
      const snapshot = await this.api.getSession(stored.sessionId);
      if (snapshot.terminal) {
        this.storage?.removeItem(SESSION_KEY);
        return false;
      }
      this.state.userId = stored.userId;
      this.state.sessionId = stored.sessionId;
      if (snapshot.constrained.length || snapshot.rejected.length) {
        const parts = [];
        if (snapshot.constrained.length) {
          parts.push(`so far: ${snapshot.constrained.join(", ")}`);
        }
        if (snapshot.rejected.length) {
          parts.push(`skipped: ${snapshot.rejected.join(", ")}`);
        }
        this.addAdvisorMessage(`(resumed - ${parts.join("; ")})`, null);
      }
      if (snapshot.last_prompt) {
        this.addAdvisorMessage(snapshot.last_prompt, snapshot.last_item);
      }
      this.state.chips = chipsForMove(snapshot.last_system_move ?? "");
      this.render();
      return true;
    } catch {
      this.storage?.removeItem(SESSION_KEY);
      return false;
    }
  }

  private async guard(action: () => Promise<void>, retry: () => void): Promise<void> {
    this.state.pending = true;
    this.state.error = null;
    this.retry = null;
    this.render();
    try {
      await action();
      this.state.error = null;
    } catch (err) {
      if (err instanceof ApiError &&
          (err.status === 404 || err.status === 409 || err.status === 410)) {
        this.state.error = "This conversation has ended. Start a new one below.";
        this.state.terminal = true;
        this.storage?.removeItem(SESSION_KEY);
      } else {
        this.state.error = `Could not reach the advisor (${String(
          err instanceof Error ? err.message : err,
        )}).`;
        this.retry = retry;
      }
    } finally {
      this.state.pending = false;
      this.render();
    }
  }

  private addUserMessage(text: string) {
    appendMessage(this.state, { speaker: "user", text });
    const row = document.createElement("div");
    row.className = "msg user";
    row.textContent = text;
    this.messagesEl.append(row);
  }

  private addAdvisorMessage(text: string, item: ItemCard | null | undefined) {
    appendMessage(this.state, { speaker: "advisor", text, item: item ?? null });
    const row = document.createElement("div");
    row.className = "msg advisor";
    if (item) {
      row.append(renderItemCard(item, (reply) => void this.send(reply)));
    }
    const line = document.createElement("div");
    line.textContent = text;
    row.append(line);
    this.messagesEl.append(row);
  }

  private render() {
    this.inputEl.disabled = this.state.pending || this.state.terminal;
    this.sendEl.disabled = this.state.pending || this.state.terminal;
    this.chipsEl.replaceChildren(
      ...(this.state.terminal || this.state.pending ? [] : this.state.chips).map((chip) => {
        const button = document.createElement("button");
        button.type = "button";
        button.className = "chip";
        button.textContent = chip;
        button.addEventListener("click", () => void this.send(chip));
        return button;
      }),
    );
    if (this.state.error) {
      this.bannerEl.hidden = false;
      this.bannerEl.replaceChildren();
      const text = document.createElement("span");
      text.textContent = this.state.error;
      this.bannerEl.append(text);
      if (this.retry) {
        const retryButton = document.createElement("button");
        retryButton.type = "button";
        retryButton.textContent = "Retry";
        const retry = this.retry;
        retryButton.addEventListener("click", () => retry());
        this.bannerEl.append(retryButton);
      }
    } else if (this.state.terminal) {
      this.bannerEl.hidden = false;
      this.bannerEl.textContent = "Done";
      this.bannerEl.className = "banner done";
    } else {
      this.bannerEl.hidden = true;
      this.bannerEl.textContent = "";
    }
  }
}
