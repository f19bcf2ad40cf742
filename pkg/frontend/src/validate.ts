/**
 * Client-side replica of the annotation service's validation rules.
 *
 * The goal is a strict subset: any document this module rejects, the
 * service rejects too, with the same error class. The rules mirror the
 * server implementation step for step, including check order, so that
 * documents with several problems are classified identically. Documents
 * the session builds are plain JSON, so `validateAnnotation` accepts
 * `unknown` and narrows as it goes.
 */

import { AnnotationError } from "./errors.js";
import type { Segment, Verdict } from "./types.js";

const MOTION = "motion";
const SKILL = "skill";
const ID_FIELDS = ["target", "hand", "left_hand", "right_hand"];

function schema(detail: string): never {
  throw new AnnotationError("SchemaError", detail);
}

function interleave(detail: string): never {
  throw new AnnotationError("InterleaveError", detail);
}

function range(detail: string): never {
  throw new AnnotationError("RangeError", detail);
}

function isPlainObject(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

/** Parse a target/hand value: null means empty, otherwise a list of ints.
 * Returns the ids deduplicated and sorted ascending. */
function idSet(value: unknown, fieldName: string, where: string): number[] {
  if (value === null || value === undefined) return [];
  if (
    !Array.isArray(value) ||
    !value.every((i) => typeof i !== "boolean" && Number.isInteger(i))
  ) {
    schema(`${where}: ${fieldName} must be null or a list of ints`);
  }
  return [...new Set(value as number[])].sort((a, b) => a - b);
}

interface ParsedDocument {
  masks: string[];
  segments: Segment[];
  horizon: number;
  warnings: string[];
}

function parseDocument(doc: unknown, horizon: number): ParsedDocument {
  if (!isPlainObject(doc)) schema("annotation must be a JSON object");
  for (const key of ["masks", "arms", "annotations"]) {
    if (!(key in doc)) schema(`missing field '${key}'`);
  }
  const masks = doc.masks;
  if (!Array.isArray(masks) || !masks.every((m) => typeof m === "string")) {
    schema("masks must be a list of file names");
  }
  // the server compares arms against the integers 1 and 2 in a language
  // where booleans are integers, so true slips through as 1; mirror that
  const arms = doc.arms === true ? 1 : doc.arms;
  if (arms !== 1 && arms !== 2) {
    schema(`arms must be 1 or 2, got ${JSON.stringify(doc.arms)}`);
  }
  const raw = doc.annotations;
  if (!Array.isArray(raw) || raw.length === 0) {
    schema("annotations must be a non-empty list");
  }

  raw.forEach((e, i) => {
    if (!isPlainObject(e)) schema(`annotations[${i}]: must be an object`);
    for (const key of ["frame", "type"]) {
      if (!(key in e)) schema(`annotations[${i}]: missing field '${key}'`);
    }
    if (typeof e.frame === "boolean" || !Number.isInteger(e.frame)) {
      schema(`annotations[${i}]: frame must be an integer`);
    }
    if (e.type !== MOTION && e.type !== SKILL) {
      schema(`annotations[${i}]: unknown type ${JSON.stringify(e.type)}`);
    }
  });
  let entries = raw as Array<Record<string, unknown>>;

  if (entries[0].type !== MOTION) {
    interleave("first annotation entry must be a motion");
  }
  for (let i = 1; i < entries.length; i++) {
    if (entries[i - 1].type === entries[i].type) {
      interleave(`adjacent ${entries[i].type} entries at frame ${entries[i].frame}`);
    }
  }

  const warnings: string[] = [];
  let h = horizon;
  if (entries[entries.length - 1].type === MOTION) {
    // the trajectory ends at the last skill; a trailing motion is dropped
    // and the effective horizon shrinks to just before it opened
    const trailingStart = entries[entries.length - 1].frame as number;
    entries = entries.slice(0, -1);
    if (entries.length === 0) interleave("annotation contains no skill");
    h = Math.min(h, trailingStart - 1);
    warnings.push(
      `trailing motion after the last skill; trimming to frame ${h}`,
    );
  }

  // the first segment is anchored at frame 1 regardless of its written
  // frame; every later entry opens at its own frame
  const starts = [1, ...entries.slice(1).map((e) => e.frame as number)];
  const ends = [...starts.slice(1).map((s) => s - 1), h];
  const handKeys = arms === 1 ? ["hand"] : ["left_hand", "right_hand"];
  const wrongKeys = arms === 2 ? ["hand"] : ["left_hand", "right_hand"];
  const segments: Segment[] = [];

  entries.forEach((e, i) => {
    const where = `annotations entry at frame ${e.frame}`;
    if ((e.frame as number) > h) range(`${where}: beyond horizon ${h}`);
    if (starts[i] > ends[i]) range(`${where}: frames must increase`);
    if (e.type === MOTION) {
      const extra = Object.keys(e).filter((k) => ID_FIELDS.includes(k));
      if (extra.length) {
        schema(`${where}: motion entries carry only frame and type`);
      }
      segments.push({ kind: "motion", start: starts[i], end: ends[i] });
    } else {
      if (!("target" in e)) schema(`${where}: missing field 'target'`);
      const wrong = wrongKeys.filter((k) => k in e).sort();
      if (wrong.length) {
        schema(`${where}: fields ${JSON.stringify(wrong)} do not match arms = ${arms}`);
      }
      const hands: number[][] = [];
      for (const key of handKeys) {
        if (!(key in e)) schema(`${where}: missing field '${key}'`);
        hands.push(idSet(e[key], key, where));
      }
      const target = idSet(e.target, "target", where);
      if ([...target, ...hands.flat()].some((id) => id < 1)) {
        range("object ids start at 1");
      }
      segments.push({ kind: "skill", start: starts[i], end: ends[i], target, hands });
    }
  });

  return { masks: masks as string[], segments, horizon: h, warnings };
}

/**
 * Validate a decoded annotation document against a scene of `objects`
 * objects and `horizon` frames. With `objects` unknown (0 or less), the
 * mask-count rule is skipped and id ranges are checked against the mask
 * list itself, exactly as the service does at annotation time.
 */
export function validateAnnotation(
  doc: unknown,
  objects: number,
  horizon: number,
): Verdict {
  try {
    const parsed = parseDocument(doc, horizon);
    if (
      objects > 0 &&
      parsed.masks.length !== 0 &&
      parsed.masks.length !== objects + 1
    ) {
      schema(
        `expected ${objects + 1} masks (gripper + ${objects} objects), ` +
          `got ${parsed.masks.length}`,
      );
    }
    const k = objects > 0 ? objects : Math.max(parsed.masks.length - 1, 0);
    for (const s of parsed.segments) {
      if (s.kind !== SKILL) continue;
      const group = [...new Set([...(s.target ?? []), ...(s.hands ?? []).flat()])];
      for (const id of group.sort((a, b) => a - b)) {
        if (id > k) {
          range(`object id ${id} out of range (scene has ${k} objects)`);
        }
      }
    }
    return {
      ok: true,
      segments: parsed.segments,
      horizon: parsed.horizon,
      warnings: parsed.warnings,
    };
  } catch (e) {
    if (e instanceof AnnotationError) {
      return { ok: false, error: e.kind, detail: e.message };
    }
    throw e;
  }
}
