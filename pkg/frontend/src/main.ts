// Tri-pane operator console: request/interpretation, live state, history.
// Wires the view model and event stream to a minimal hand-rolled DOM.

import { ApiClient } from "./api.js";
import { EventStream } from "./events.js";
import { entityColor, segment } from "./highlight.js";
import { ConsoleViewModel } from "./viewmodel.js";

const baseUrl =
  new URLSearchParams(location.search).get("service") ??
  "http://127.0.0.1:8000";

const api = new ApiClient(baseUrl);
const vm = new ConsoleViewModel(api, render);
const stream = new EventStream(
  api,
  (frame) => vm.applyEvent(frame),
  (connected) => vm.setConnected(connected),
);

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function $(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function renderCard(): void {
  const root = $("interpretation");
  root.replaceChildren();
  if (!vm.card) return;
  const { interpretation, status } = vm.card;

  const textLine = el("div", "source-text");
  for (const seg of segment(interpretation.text, interpretation.spans)) {
    const chunk = el("span", seg.entity ? "entity" : "plain", seg.text);
    if (seg.entity) {
      chunk.style.background = entityColor(seg.entity);
      chunk.title = seg.entity;
    }
    textLine.append(chunk);
  }
  root.append(textLine);

  const labels = el("div", "span-labels");
  for (const span of interpretation.spans) {
    const chip = el("span", "chip", `${span.entity}=${span.surface}`);
    chip.style.background = entityColor(span.entity);
    labels.append(chip);
  }
  root.append(labels);

  if (interpretation.rendered) {
    root.append(el("pre", "rendered", interpretation.rendered));
  }
  for (const warning of interpretation.warnings) {
    root.append(el("div", "warning-chip", warning));
  }

  const actions = el("div", "actions");
  const confirmBtn = el("button", "confirm", "Confirm");
  confirmBtn.disabled = !vm.canConfirm;
  confirmBtn.onclick = () => void vm.confirm();
  const rejectBtn = el("button", "reject", "Reject");
  rejectBtn.disabled = !vm.canReject;
  rejectBtn.onclick = () => void vm.reject();
  actions.append(confirmBtn, rejectBtn, el("span", `status ${status}`, status));
  root.append(actions);
}

function renderState(): void {
  const root = $("state");
  root.replaceChildren();
  if (!vm.state) {
    root.append(el("div", "stale", "no state yet"));
    return;
  }
  const s = vm.state;
  const rows: Array<[string, string]> = [
    ["temperature", `${s.temperature.toFixed(1)} °C` +
      (s.ramping ? ` → ${s.temperature_setpoint.toFixed(1)}` : "")],
    ["humidity", `${s.humidity.toFixed(0)} %`],
    ["motor x", `${s.motor_x.toFixed(1)} mm`],
    ["motor y", `${s.motor_y.toFixed(1)} mm`],
    ["sample", s.sample_name ?? "none"],
    ["clock", `${s.clock.toFixed(1)} s`],
    ["status", s.status],
  ];
  for (const [name, value] of rows) {
    const row = el("div", "state-row");
    row.append(el("span", "name", name), el("span", "value", value));
    root.append(row);
  }
  root.append(
    el("div", vm.connected ? "live" : "stale",
       vm.connected ? `live (seq ${vm.lastEventSeq})` : "disconnected"),
  );
}

function renderHistory(): void {
  const root = $("history");
  root.replaceChildren();
  for (const entry of vm.history) {
    const row = el("div", `history-row ${entry.outcome}`);
    row.append(
      el("span", "outcome", entry.outcome),
      el("span", "text", entry.text),
      el("pre", "rendered", entry.rendered),
    );
    root.append(row);
  }
}

function render(): void {
  renderCard();
  renderState();
  renderHistory();
  const banner = $("banner");
  banner.textContent = vm.banner ?? "";
  banner.style.display = vm.banner ? "block" : "none";
}

function wireInput(): void {
  const input = $("request") as HTMLTextAreaElement;
  const submit = $("submit") as HTMLButtonElement;
  const update = () => {
    submit.disabled = !input.value.trim() || !vm.canSubmit;
  };
  input.addEventListener("input", update);
  submit.addEventListener("click", () => {
    void vm.submit(input.value).then(update);
  });
  update();
}

wireInput();
void vm.refresh();
void stream.run();
