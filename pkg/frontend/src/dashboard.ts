// Browser wiring: connect to a gateway, render the view model, and turn
// Space key hold/release into simulated eye closure.

import { GatewayClient } from "./client.js";
import { KeySimulator } from "./simulator.js";
import {
  applyKey,
  applyMessage,
  applyStatus,
  initialViewModel,
  type ViewModel,
} from "./viewmodel.js";
import { wsTransport } from "./ws-transport.js";

let vm: ViewModel = initialViewModel();
let client: GatewayClient | null = null;
let simulator: KeySimulator | null = null;
let dirty = true;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function update(next: ViewModel): void {
  vm = next;
  dirty = true;
}

function connect(address: string): void {
  client?.stop();
  simulator?.stop();
  simulator = null;
  update(initialViewModel());

  client = new GatewayClient(wsTransport(address), {
    onStatus: (status) => {
      update(applyStatus(vm, status));
      if (status !== "connected") {
        simulator?.stop();
        simulator = null;
      }
    },
    onMessage: (msg) => {
      update(applyMessage(vm, msg));
      if (msg.type === "config" && !simulator) {
        // Key simulation runs at the server's frame cadence.
        simulator = new KeySimulator((t, p) => client?.send(t, p), msg.payload.fps);
        simulator.setHeld(vm.keyHeld);
        simulator.start();
      }
    },
  });
  client.start();
}

function setHeld(held: boolean): void {
  if (held === vm.keyHeld) return;
  update(applyKey(vm, held));
  simulator?.setHeld(held);
}

function bar(id: string, fraction: number): void {
  el<HTMLDivElement>(id).style.width = `${Math.round(fraction * 100)}%`;
}

function drawSparkline(canvas: HTMLCanvasElement, values: number[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (values.length < 2) return;
  const max = Math.max(...values, 1);
  ctx.beginPath();
  values.forEach((v, i) => {
    const x = (i / (values.length - 1)) * canvas.width;
    const y = canvas.height - (v / max) * (canvas.height - 2) - 1;
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.strokeStyle = "#4a90d9";
  ctx.stroke();
}

function render(): void {
  if (!dirty) {
    requestAnimationFrame(render);
    return;
  }
  dirty = false;

  const status = el<HTMLSpanElement>("status");
  status.textContent = vm.status;
  status.className = `status ${vm.status}`;

  const banner = el<HTMLDivElement>("error-banner");
  banner.textContent = vm.lastError ?? "";
  banner.hidden = !vm.lastError;

  const eye = el<HTMLDivElement>("eye");
  eye.textContent = vm.eye ?? "-";
  eye.className = `eye ${vm.eye ?? "unknown"}`;
  el<HTMLSpanElement>("confidence").textContent = vm.eye
    ? vm.confidence.toFixed(2)
    : "";

  el<HTMLDivElement>("strip").textContent = vm.strip
    .map((s) => (s === "closed" ? "█" : "▁"))
    .join("");

  bar("bar-blink", vm.blinkProgress);
  bar("bar-word", vm.wordGapProgress);
  bar("bar-toggle", vm.toggleProgress);

  el<HTMLSpanElement>("pending").textContent = String(vm.pendingBlinks);
  const session = el<HTMLSpanElement>("session");
  session.textContent = vm.inSession ? "session on" : "session off";
  session.className = vm.inSession ? "session on" : "session off";

  const list = el<HTMLUListElement>("transcript");
  list.replaceChildren(
    ...vm.transcript.map((entry) => {
      const li = document.createElement("li");
      li.className = entry.kind;
      li.textContent = `[${(entry.t_ms / 1000).toFixed(1)}s] ${entry.text}`;
      return li;
    }),
  );

  drawSparkline(el<HTMLCanvasElement>("latency"), vm.latencies);
  requestAnimationFrame(render);
}

export function main(): void {
  const addressInput = el<HTMLInputElement>("address");
  el<HTMLButtonElement>("connect").addEventListener("click", () =>
    connect(addressInput.value),
  );

  window.addEventListener("keydown", (ev) => {
    if (ev.code === "Space" && !ev.repeat) {
      ev.preventDefault();
      setHeld(true);
    }
  });
  window.addEventListener("keyup", (ev) => {
    if (ev.code === "Space") {
      ev.preventDefault();
      setHeld(false);
    }
  });
  // Losing focus mid-hold must not leave the eye stuck closed.
  window.addEventListener("blur", () => setHeld(false));

  requestAnimationFrame(render);
}

main();
