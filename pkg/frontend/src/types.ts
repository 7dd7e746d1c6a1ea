/** Payload shapes of the review API. */

export interface Segment {
  kind: "text" | "image_slot";
  payload: string;
  image_ref?: string | null;
}

export interface SituationPayload {
  loc: [number, number, number];
  rot_deg: number;
  interaction: string;
  anchor_object?: number;
  action_text: Segment[];
  location_text: Segment[];
}

export interface Item {
  qa_id: string;
  scene_id: string;
  situation: SituationPayload;
  question: Segment[];
  answer: string;
  category: string;
  provenance: string;
  meta?: Record<string, unknown>;
  verdict?: VerdictRecord | null;
  needs_review?: boolean;
}

export interface ItemPage {
  items: Item[];
  cursor: number | null;
  total: number;
}

export interface SceneSummary {
  scene_id: string;
  n_objects: number;
  n_items: number;
}

export interface ObjectRect {
  id: number;
  label: string;
  cx: number;
  cy: number;
  w: number;
  h: number;
  yaw_deg: number;
  attributes: Record<string, string>;
  image_ref: string | null;
  flags: string[];
}

export interface AgentPose {
  x: number;
  y: number;
  rot_deg: number;
  interaction?: string;
}

export interface TopdownPayload {
  scene_id: string;
  floor: { polygon: [number, number][]; z: number };
  objects: ObjectRect[];
  agent: AgentPose | null;
  highlight_ids: number[];
  bounds: [number, number, number, number];
}

export interface Scores {
  situation: number;
  question: number;
  answer: number;
}

export type VerdictKind = "accept" | "reject" | "fix";

export interface VerdictBody {
  scores: Scores;
  verdict: VerdictKind;
  reviewer: string;
  fixed_answer?: string | null;
}

export interface VerdictRecord extends VerdictBody {
  qa_id: string;
  timestamp: string;
}

export interface Progress {
  total: number;
  reviewed: number;
  by_verdict: Record<string, number>;
}
