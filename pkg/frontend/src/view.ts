// Pure view-model helpers: union highlighting, the per-pair color scheme and
// dashboard formatting. Kept DOM-free so they are testable in node.

import type { AdoptionJson, PendingItemJson, UtteranceJson } from "./types.js";

// one stable color per pair id within a session, cycling when pairs outnumber
// the palette
export const PALETTE = [
  "#2563eb",
  "#d97706",
  "#059669",
  "#db2777",
  "#7c3aed",
  "#0891b2",
];

export function pairColor(pairId: number): string {
  return PALETTE[(pairId - 1) % PALETTE.length];
}

export type Highlight = "question" | "answer" | null;

export interface TranscriptLine {
  index: number;
  role: string;
  text: string;
  highlight: Highlight;
  color: string | null;
}

/** Transcript lines with the current pair's unions highlighted, and only
 * those — highlights must cover exactly the pair's indices. */
export function transcriptLines(item: PendingItemJson): TranscriptLine[] {
  const color = pairColor(item.pair.pair_id);
  const questions = new Set(item.pair.question_indices);
  const answers = new Set(item.pair.answer_indices);
  return item.utterances.map((utterance: UtteranceJson) => {
    const highlight: Highlight = questions.has(utterance.index)
      ? "question"
      : answers.has(utterance.index)
        ? "answer"
        : null;
    return {
      index: utterance.index,
      role: utterance.role,
      text: utterance.text,
      highlight,
      color: highlight ? color : null,
    };
  });
}

export function categoryLabel(item: PendingItemJson): string {
  return item.pair.unanswered
    ? `${item.pair.category} (unanswered)`
    : item.pair.category;
}

export function warningMessages(item: PendingItemJson): string[] {
  return item.warnings.map((warning) => warning.message);
}

export function formatAdoption(report: AdoptionJson): string {
  const decided = report.accepted + report.edited + report.rejected;
  const percentage = (report.adoption_rate * 100).toFixed(1);
  return decided === 0
    ? `no reviews yet (${report.pending} pending)`
    : `${percentage}% adopted — ${report.accepted} accepted, ${report.edited} edited, ` +
        `${report.rejected} rejected, ${report.pending} pending`;
}
