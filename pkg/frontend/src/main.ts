/** Console entry point: two tabs over one Api instance. */

import { Api } from "./api.js";
import { ChatView } from "./chat.js";
import { DiagnosisView } from "./diagnosis.js";

export function mountConsole(root: HTMLElement, baseUrl: string): void {
  const api = new Api(baseUrl);
  const chat = new ChatView(api);
  const diagnosis = new DiagnosisView(api);

  const nav = document.createElement("nav");
  const chatTab = document.createElement("button");
  chatTab.textContent = "Chat";
  const diagTab = document.createElement("button");
  diagTab.textContent = "Diagnosis";
  nav.append(chatTab, diagTab);

  const body = document.createElement("main");
  const show = (view: HTMLElement) => {
    body.innerHTML = "";
    body.append(view);
  };
  chatTab.addEventListener("click", () => show(chat.element));
  diagTab.addEventListener("click", () => show(diagnosis.element));

  root.append(nav, body);
  show(chat.element);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mountConsole(document.getElementById("app") as HTMLElement, "");
}
