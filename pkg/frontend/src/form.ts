/** Verdict form state: submittable only when all three scores are set, and a
 * fix verdict requires a non-empty corrected answer. */

import type { Scores, VerdictBody, VerdictKind } from "./types.js";

export const ASPECTS = ["situation", "question", "answer"] as const;
export type Aspect = (typeof ASPECTS)[number];

export interface FormState {
  scores: Partial<Scores>;
  verdict: VerdictKind | null;
  fixedAnswer: string;
  activeAspect: Aspect;
}

export function emptyForm(): FormState {
  return { scores: {}, verdict: null, fixedAnswer: "", activeAspect: "situation" };
}

export function setScore(form: FormState, aspect: Aspect, value: number): FormState {
  if (!Number.isInteger(value) || value < 1 || value > 5) return form;
  const scores = { ...form.scores, [aspect]: value };
  const next = ASPECTS.find((a) => scores[a] === undefined) ?? aspect;
  return { ...form, scores, activeAspect: next };
}

export function setVerdict(form: FormState, verdict: VerdictKind): FormState {
  return { ...form, verdict };
}

export function setFixedAnswer(form: FormState, text: string): FormState {
  return { ...form, fixedAnswer: text };
}

export function isSubmittable(form: FormState): boolean {
  const scored = ASPECTS.every((a) => form.scores[a] !== undefined);
  if (!scored || form.verdict === null) return false;
  if (form.verdict === "fix" && form.fixedAnswer.trim() === "") return false;
  return true;
}

export function toBody(form: FormState, reviewer: string): VerdictBody {
  if (!isSubmittable(form)) {
    throw new Error("form is not submittable");
  }
  const body: VerdictBody = {
    scores: form.scores as Scores,
    verdict: form.verdict as VerdictKind,
    reviewer,
  };
  if (form.verdict === "fix") {
    body.fixed_answer = form.fixedAnswer.trim();
  }
  return body;
}
