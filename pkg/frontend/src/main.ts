// DOM wiring: render the pending queue and the adoption gauge, submit
// decisions with keyboard shortcuts (a accept, r reject, e edit, j/k move).

import { ApiClient } from "./api.js";
import { ReviewQueue } from "./state.js";
import type { PendingItemJson } from "./types.js";
import {
  categoryLabel,
  formatAdoption,
  pairColor,
  transcriptLines,
  warningMessages,
} from "./view.js";

const api = new ApiClient("");
const queue = new ReviewQueue(api, localStorage.getItem("qae-reviewer") ?? "");
let selected = 0;

const app = document.getElementById("app")!;

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

async function refreshGauge(): Promise<void> {
  const gauge = document.getElementById("gauge");
  if (!gauge) return;
  try {
    gauge.textContent = formatAdoption(await api.adoption());
  } catch {
    gauge.textContent = "adoption gauge unavailable";
  }
}

function banner(message: string | null): void {
  const node = document.getElementById("banner")!;
  node.textContent = message ?? "";
  node.style.display = message ? "block" : "none";
}

async function decide(
  item: PendingItemJson,
  decision: "accept" | "reject",
): Promise<void> {
  const outcome = await queue.submit(item, decision);
  banner(outcome === "ok" ? null : queue.lastError);
  render();
  void refreshGauge();
}

async function decideEdit(item: PendingItemJson, card: HTMLElement): Promise<void> {
  const question = card.querySelector<HTMLTextAreaElement>(".edit-question")!.value;
  const answer = card.querySelector<HTMLTextAreaElement>(".edit-answer")!.value;
  const outcome = await queue.submit(item, "edit", {
    question_text: question,
    answer_text: answer,
  });
  banner(outcome === "ok" ? null : queue.lastError);
  if (outcome !== "error") render();
  void refreshGauge();
}

function renderCard(item: PendingItemJson, position: number): HTMLElement {
  const card = el("section", "card" + (position === selected ? " selected" : ""));
  card.tabIndex = 0;

  const header = el("header");
  header.append(
    el("span", "session", item.session_id),
    el("span", "badge category", categoryLabel(item)),
  );
  for (const message of warningMessages(item)) {
    header.append(el("span", "badge warning", message));
  }
  card.append(header);

  const transcript = el("div", "transcript");
  for (const line of transcriptLines(item)) {
    const row = el("div", "line" + (line.highlight ? ` ${line.highlight}` : ""));
    if (line.color) row.style.borderLeftColor = line.color;
    row.append(
      el("span", "role", line.role),
      el("span", "text", line.text),
    );
    transcript.append(row);
  }
  card.append(transcript);

  const summary = el("div", "summary");
  const questionBlock = el("div", "joined question");
  questionBlock.style.borderLeftColor = pairColor(item.pair.pair_id);
  questionBlock.append(el("strong", undefined, "Q"), el("span", undefined, item.question_text));
  const answerBlock = el("div", "joined answer");
  answerBlock.style.borderLeftColor = pairColor(item.pair.pair_id);
  answerBlock.append(
    el("strong", undefined, "A"),
    el("span", undefined, item.answer_text || "(unanswered)"),
  );
  summary.append(questionBlock, answerBlock);
  card.append(summary);

  const editForm = el("div", "edit-form");
  editForm.style.display = "none";
  const editQuestion = el("textarea", "edit-question") as HTMLTextAreaElement;
  editQuestion.value = item.question_text;
  const editAnswer = el("textarea", "edit-answer") as HTMLTextAreaElement;
  editAnswer.value = item.answer_text;
  const saveButton = el("button", "save", "Save edit") as HTMLButtonElement;
  saveButton.addEventListener("click", () => void decideEdit(item, card));
  editForm.append(editQuestion, editAnswer, saveButton);
  card.append(editForm);

  const actions = el("div", "actions");
  const acceptButton = el("button", "accept", "Accept (a)") as HTMLButtonElement;
  acceptButton.addEventListener("click", () => void decide(item, "accept"));
  const rejectButton = el("button", "reject", "Reject (r)") as HTMLButtonElement;
  rejectButton.addEventListener("click", () => void decide(item, "reject"));
  const editButton = el("button", "edit", "Edit (e)") as HTMLButtonElement;
  editButton.addEventListener("click", () => {
    editForm.style.display = editForm.style.display === "none" ? "block" : "none";
  });
  actions.append(acceptButton, rejectButton, editButton);
  card.append(actions);

  card.addEventListener("focus", () => {
    selected = position;
  });
  return card;
}

function render(): void {
  const list = document.getElementById("queue")!;
  list.replaceChildren();
  if (selected >= queue.items.length) selected = Math.max(0, queue.items.length - 1);
  if (queue.items.length === 0) {
    list.append(el("p", "empty", "Queue is empty — nothing left to review."));
  }
  queue.items.forEach((item, position) => list.append(renderCard(item, position)));
  if (queue.nextCursor) {
    const more = el("button", "more", "Load more") as HTMLButtonElement;
    more.addEventListener("click", () => {
      void queue.loadMore().then(render);
    });
    list.append(more);
  }
}

function onKey(event: KeyboardEvent): void {
  if (event.target instanceof HTMLTextAreaElement || event.target instanceof HTMLInputElement) {
    return;
  }
  const item = queue.items[selected];
  switch (event.key) {
    case "j":
      selected = Math.min(selected + 1, queue.items.length - 1);
      render();
      break;
    case "k":
      selected = Math.max(selected - 1, 0);
      render();
      break;
    case "a":
      if (item) void decide(item, "accept");
      break;
    case "r":
      if (item) void decide(item, "reject");
      break;
    case "e": {
      const card = document.querySelectorAll<HTMLElement>(".card")[selected];
      const form = card?.querySelector<HTMLElement>(".edit-form");
      if (form) form.style.display = form.style.display === "none" ? "block" : "none";
      break;
    }
  }
}

async function boot(): Promise<void> {
  app.append(el("div", undefined, ""));
  const reviewerInput = document.getElementById("reviewer") as HTMLInputElement;
  reviewerInput.value = queue.reviewer;
  reviewerInput.addEventListener("change", () => {
    queue.reviewer = reviewerInput.value;
    localStorage.setItem("qae-reviewer", queue.reviewer);
  });
  const retry = document.getElementById("retry")!;
  retry.addEventListener("click", () => void boot());
  try {
    await queue.load();
    banner(null);
  } catch (error) {
    banner(`could not reach the review API: ${String(error)} — retry below`);
  }
  render();
  void refreshGauge();
}

document.addEventListener("keydown", onKey);
void boot();
