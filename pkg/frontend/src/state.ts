// Pure view state. Messages are append-only; there is at most one pending
// request; quick-reply chips derive from the last system move tag alone, so
// the server's grammar stays authoritative.

import type { ItemCard } from "./api.js";

export type Speaker = "user" | "advisor";

export interface Message {
  speaker: Speaker;
  text: string;
  item?: ItemCard | null;
}

export interface ChatViewState {
  userId: string | null;
  sessionId: string | null;
  messages: Message[];
  pending: boolean;
  terminal: boolean;
  chips: string[];
  error: string | null;
}

export function initialState(): ChatViewState {
  return {
    userId: null,
    sessionId: null,
    messages: [],
    pending: false,
    terminal: false,
    chips: [],
    error: null,
  };
}

export function appendMessage(state: ChatViewState, message: Message): Message {
  state.messages.push(message);
  return message;
}

export function chipsForMove(move: string, values?: string[] | null): string[] {
  switch (move) {
    case "attempt-constrain":
      return ["don't care", "what are the options"];
    case "provide-values":
      return [...(values ?? []), "don't care"];
    case "suggest-relax":
      return ["yes", "no"];
    case "recommend-item":
      return ["yes", "what else"];
    case "quit-start-mod":
      return ["start over", "quit"];
    case "clarify":
      return ["don't care", "what are the options", "start over", "quit"];
    default:
      return [];
  }
}
