// Payload shapes of the review API.

export interface PairJson {
  pair_id: number;
  question_indices: number[];
  answer_indices: number[];
  category: string;
  unanswered: boolean;
}

export interface WarningJson {
  kind: string;
  message: string;
  index?: number;
  pair_id?: number;
}

export interface UtteranceJson {
  index: number;
  role: string;
  text: string;
}

export interface PendingItemJson {
  session_id: string;
  pair: PairJson;
  question_text: string;
  answer_text: string;
  utterances: UtteranceJson[];
  warnings: WarningJson[];
}

export interface PendingPageJson {
  items: PendingItemJson[];
  next_cursor: string | null;
}

export interface AdoptionJson {
  accepted: number;
  rejected: number;
  edited: number;
  pending: number;
  adoption_rate: number;
}

export type Decision = "accept" | "reject" | "edit";

export interface ReviewSubmission {
  session_id: string;
  pair_id: number;
  decision: Decision;
  reviewer: string;
  question_text?: string;
  answer_text?: string;
}
