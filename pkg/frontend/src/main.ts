// Browser bootstrap: bind SpellerClient to a WebSocket and the DOM.

import { SpellerClient } from "./client.js";
import { render } from "./render.js";

function wsUrl(): string {
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}/ws`;
}

function start(): void {
  const root = document.getElementById("app");
  if (root === null) throw new Error("missing #app element");

  const socket = new WebSocket(wsUrl());
  const client = new SpellerClient({
    send: (raw) => socket.send(raw),
    close: () => socket.close(),
  });

  client.onChange((state) => {
    root.innerHTML = render(state);
  });

  socket.addEventListener("open", () => client.connect());
  socket.addEventListener("message", (event) => {
    if (typeof event.data === "string") client.handleRaw(event.data);
  });
  socket.addEventListener("close", () => client.handleClosed());

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement | null;
    const cell = target?.closest<HTMLElement>("[data-key]");
    if (cell?.dataset.key) {
      client.attend(cell.dataset.key);
      return;
    }
    if (target?.id === "start") client.startTrial();
    if (target?.id === "pause") client.sendFunction("pause");
    if (target?.id === "resume") client.sendFunction("resume");
  });

  const controls = document.getElementById("controls");
  if (controls !== null) {
    controls.innerHTML =
      `<button id="start">start trial</button>` +
      `<button id="pause">pause</button>` +
      `<button id="resume">resume</button>`;
  }

  root.innerHTML = render(client.state);
}

start();
