import type { PendingItemJson } from "../src/types.js";

export function pendingItem(overrides: Partial<PendingItemJson> = {}): PendingItemJson {
  return {
    session_id: "s1",
    pair: {
      pair_id: 1,
      question_indices: [1],
      answer_indices: [3],
      category: "1-1",
      unanswered: false,
    },
    question_text: "Hi, my package hasn't arrived?",
    answer_text: "It will arrive tomorrow.",
    utterances: [
      { index: 1, role: "C", text: "Hi, my package hasn't arrived?" },
      { index: 2, role: "A", text: "Let me check." },
      { index: 3, role: "A", text: "It will arrive tomorrow." },
      { index: 4, role: "C", text: "Also how do I get a refund?" },
      { index: 5, role: "A", text: "Go to the orders page." },
      { index: 6, role: "C", text: "Thanks." },
    ],
    warnings: [],
    ...overrides,
  };
}

type Responder = (input: string, init?: RequestInit) => { status: number; body: unknown };

/** A fetch stub driven by a routing function. */
export function fetchStub(respond: Responder) {
  const calls: { input: string; init?: RequestInit }[] = [];
  const fn = async (input: string, init?: RequestInit): Promise<Response> => {
    calls.push({ input, init });
    const { status, body } = respond(input, init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fn, calls };
}
