import { AdvisorApi } from "./api.js";
import { ChatView } from "./view.js";

async function boot() {
  const api = new AdvisorApi("");
  const root = document.getElementById("chat");
  const login = document.getElementById("login") as HTMLFormElement;
  const nameInput = document.getElementById("user-id") as HTMLInputElement;
  if (!root || !login || !nameInput) return;

  const view = new ChatView(root, api, window.localStorage);
  const restored = await view.restore();
  if (restored) {
    login.hidden = true;
    return;
  }
  login.addEventListener("submit", (event) => {
    event.preventDefault();
    const userId = nameInput.value.trim();
    if (!userId) return;
    login.hidden = true;
    void view.start(userId);
  });
}

void boot();
