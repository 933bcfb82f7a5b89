// Review-queue state: optimistic removal on submit, rollback when the
// request fails outright, and settle-in-place on 409 (someone else already
// decided, so the card leaves the queue either way).

import { ApiClient, ApiError } from "./api.js";
import type { Decision, PendingItemJson } from "./types.js";

export type SubmitOutcome = "ok" | "conflict" | "error";

export interface EditTexts {
  question_text: string;
  answer_text: string;
}

export function validateEdit(edits: EditTexts): string | null {
  if (!edits.question_text.trim()) return "edited question text must not be empty";
  if (!edits.answer_text.trim()) return "edited answer text must not be empty";
  return null;
}

export class ReviewQueue {
  items: PendingItemJson[] = [];
  nextCursor: string | null = null;
  lastError: string | null = null;

  constructor(
    private readonly api: ApiClient,
    public reviewer: string = "",
  ) {}

  async load(): Promise<void> {
    const page = await this.api.pending();
    this.items = page.items;
    this.nextCursor = page.next_cursor;
    this.lastError = null;
  }

  async loadMore(): Promise<void> {
    if (!this.nextCursor) return;
    const page = await this.api.pending(this.nextCursor);
    this.items = this.items.concat(page.items);
    this.nextCursor = page.next_cursor;
  }

  /** Optimistically removes the card, then reconciles with the server. */
  async submit(
    item: PendingItemJson,
    decision: Decision,
    edits?: EditTexts,
  ): Promise<SubmitOutcome> {
    if (decision === "edit") {
      const problem = edits ? validateEdit(edits) : "edit requires texts";
      if (problem) {
        this.lastError = problem;
        return "error";
      }
    }
    const position = this.items.indexOf(item);
    if (position >= 0) this.items.splice(position, 1);
    try {
      await this.api.submitReview({
        session_id: item.session_id,
        pair_id: item.pair.pair_id,
        decision,
        reviewer: this.reviewer,
        ...(decision === "edit" ? edits : {}),
      });
      this.lastError = null;
      return "ok";
    } catch (error) {
      if (error instanceof ApiError && error.isConflict) {
        // already settled by another reviewer; the card stays gone
        this.lastError = "pair was already reviewed elsewhere";
        return "conflict";
      }
      // network or server trouble: put the card back where it was
      if (position >= 0) this.items.splice(position, 0, item);
      this.lastError = error instanceof Error ? error.message : String(error);
      return "error";
    }
  }
}
