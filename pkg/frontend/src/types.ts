import type { ErrorName } from "./errors.js";

export type EntryKind = "motion" | "skill";

/**
 * One entry of the "annotations" list in the document posted to the
 * service. Motion entries carry only frame and type; skill entries add
 * target plus hand (single arm) or left_hand/right_hand (bimanual), where
 * null means the empty set.
 */
export interface AnnotationEntryDoc {
  frame: number;
  type: EntryKind;
  target?: number[] | null;
  hand?: number[] | null;
  left_hand?: number[] | null;
  right_hand?: number[] | null;
}

/** Axis-aligned bounding box as [x0, y0, x1, y1] in pixel coordinates. */
export type Box = [number, number, number, number];

export interface AnnotationDoc {
  masks: string[];
  arms: 1 | 2;
  annotations: AnnotationEntryDoc[];
  /** Boxes of the drawn polygons, keyed by mask file name. The service
   * ignores this field; it rides along for downstream segmentation. */
  metadata?: { boxes: Record<string, Box> };
}

/** A parsed segment span, frames inclusive on both ends. Skills carry
 * target ids and one hand set per arm; motions carry neither. */
export interface Segment {
  kind: EntryKind;
  start: number;
  end: number;
  target?: number[];
  hands?: number[][];
}

export type Verdict =
  | { ok: true; segments: Segment[]; horizon: number; warnings: string[] }
  | { ok: false; error: ErrorName; detail: string };

// Service response shapes.

export interface ServiceMeta {
  objects: number;
  horizon: number;
}

export interface FrameListing {
  count: number;
  files: string[];
}

export interface SubmitAccepted {
  ok: true;
  path: string;
  segments: number;
  horizon: number;
  warnings: string[];
}

export interface SubmitRejected {
  ok: false;
  error: string;
  detail: string;
}

export type SubmitResponse = SubmitAccepted | SubmitRejected;

export interface MaskUploadResponse {
  ok: boolean;
  path?: string;
  bytes?: number;
  error?: string;
  detail?: string;
}
