/**
 * Annotation session state: frame playback, frame-1 polygon masks, the
 * growing motion/skill entry list, and validated submission.
 *
 * Every public mutator counts as one user interaction; `tick` does not,
 * because ticks are the passage of playback time, not gestures. Entry
 * mutators enforce the rules whose violation could never be repaired by
 * later appends (ordering, alternation, frame monotonicity, id lower
 * bounds, the horizon), throwing `AnnotationError` with the same
 * classification the service would use. Everything else, notably id upper
 * bounds that depend on how many masks end up drawn, is left to the full
 * document check at submit time, which refuses to touch the network when
 * the verdict is negative.
 */

import { AnnotationError, SessionError } from "./errors.js";
import { encodeGrayPng } from "./png.js";
import {
  maskArea,
  polygonBounds,
  rasterizePolygon,
  type MaskImage,
  type Point,
} from "./raster.js";
import type {
  AnnotationDoc,
  AnnotationEntryDoc,
  Box,
  MaskUploadResponse,
  SubmitResponse,
  Verdict,
} from "./types.js";
import { validateAnnotation } from "./validate.js";

/** The slice of the service the session needs for a submission. */
export interface AnnotationService {
  uploadMask(name: string, data: Uint8Array): Promise<MaskUploadResponse>;
  submitAnnotation(doc: AnnotationDoc): Promise<SubmitResponse>;
}

export interface StoredMask {
  name: string;
  polygon: Point[];
  box: Box;
  image: MaskImage;
}

interface MotionEntry {
  frame: number;
  type: "motion";
}

interface SkillEntry {
  frame: number;
  type: "skill";
  target: number[];
  hands: number[][];
}

export type SessionEntry = MotionEntry | SkillEntry;

export interface SubmitOutcome {
  /** True when the client-side verdict failed and nothing was sent. */
  blocked: boolean;
  verdict: Verdict;
  response?: SubmitResponse;
}

const GRIPPER_MASK = "mask_gripper.png";

function normalizeIds(ids: readonly number[], field: string): number[] {
  if (ids.some((i) => !Number.isInteger(i))) {
    throw new AnnotationError("SchemaError", `${field} must be a list of ints`);
  }
  if (ids.some((i) => i < 1)) {
    throw new AnnotationError("RangeError", "object ids start at 1");
  }
  return [...new Set(ids)].sort((a, b) => a - b);
}

export class AnnotationSession {
  readonly frameCount: number;
  readonly maskWidth: number;
  readonly maskHeight: number;

  private armCount: 1 | 2 = 1;
  private currentFrame = 1;
  private isPlaying = false;
  private entryList: SessionEntry[] = [];
  private gripperMask: StoredMask | null = null;
  private objectMasks: StoredMask[] = [];
  private interactionCount = 0;
  private unsaved = false;
  private verdict: Verdict | null = null;
  readonly log: string[] = [];

  constructor(frameCount: number, maskWidth: number, maskHeight: number) {
    if (frameCount < 1) throw new SessionError("no frames to annotate");
    this.frameCount = frameCount;
    this.maskWidth = maskWidth;
    this.maskHeight = maskHeight;
  }

  get frame(): number {
    return this.currentFrame;
  }

  get playing(): boolean {
    return this.isPlaying;
  }

  get arms(): 1 | 2 {
    return this.armCount;
  }

  get interactions(): number {
    return this.interactionCount;
  }

  get hasUnsavedChanges(): boolean {
    return this.unsaved;
  }

  get entries(): readonly SessionEntry[] {
    return this.entryList;
  }

  get lastVerdict(): Verdict | null {
    return this.verdict;
  }

  /** All drawn masks in upload order: gripper first, then objects 1..K. */
  get masks(): StoredMask[] {
    return this.gripperMask
      ? [this.gripperMask, ...this.objectMasks]
      : [...this.objectMasks];
  }

  get objectCount(): number {
    return this.objectMasks.length;
  }

  private interact(what: string): void {
    this.interactionCount += 1;
    this.log.push(`${this.interactionCount}. ${what}`);
  }

  // -- playback ------------------------------------------------------------

  play(): void {
    this.interact("play");
    this.isPlaying = true;
  }

  stop(): void {
    this.interact("stop");
    this.isPlaying = false;
  }

  /** Advance one frame of playback time. Not a user interaction. */
  tick(): void {
    if (!this.isPlaying) return;
    if (this.currentFrame < this.frameCount) {
      this.currentFrame += 1;
    } else {
      this.isPlaying = false;
    }
  }

  stepForward(): void {
    this.interact("step forward");
    this.currentFrame = Math.min(this.frameCount, this.currentFrame + 1);
  }

  stepBackward(): void {
    this.interact("step backward");
    this.currentFrame = Math.max(1, this.currentFrame - 1);
  }

  /** Jump back to frame 1 and stop playback. */
  rollback(): void {
    this.interact("rollback");
    this.isPlaying = false;
    this.currentFrame = 1;
  }

  seek(frame: number): void {
    this.interact(`seek ${frame}`);
    this.currentFrame = Math.min(this.frameCount, Math.max(1, frame));
  }

  // -- setup and masks -----------------------------------------------------

  setArms(arms: 1 | 2): void {
    if (this.entryList.some((e) => e.type === "skill")) {
      throw new SessionError("cannot change arms once skills are annotated");
    }
    this.interact(`arms = ${arms}`);
    this.armCount = arms;
    this.unsaved = true;
  }

  private trace(name: string, polygon: readonly Point[]): StoredMask {
    if (this.currentFrame !== 1) {
      throw new SessionError(
        `masks are drawn on frame 1, not frame ${this.currentFrame}`,
      );
    }
    if (polygon.length < 3) {
      throw new SessionError("a mask polygon needs at least 3 points");
    }
    const image = rasterizePolygon(polygon, this.maskWidth, this.maskHeight);
    if (maskArea(image) === 0) {
      throw new SessionError("polygon does not cover any pixel");
    }
    return {
      name,
      polygon: polygon.map((p) => [p[0], p[1]] as Point),
      box: polygonBounds(polygon),
      image,
    };
  }

  /** Draw (or redraw) the gripper mask. */
  traceGripper(polygon: readonly Point[]): StoredMask {
    const mask = this.trace(GRIPPER_MASK, polygon);
    this.interact("trace gripper mask");
    this.gripperMask = mask;
    this.unsaved = true;
    return mask;
  }

  /** Draw the next object mask; objects are numbered in drawing order. */
  traceObject(polygon: readonly Point[]): StoredMask {
    const name = `mask_${this.objectMasks.length + 1}.png`;
    const mask = this.trace(name, polygon);
    this.interact(`trace object mask ${this.objectMasks.length + 1}`);
    this.objectMasks.push(mask);
    this.unsaved = true;
    return mask;
  }

  // -- entries -------------------------------------------------------------

  private guardEntry(kind: "motion" | "skill", frame: number): void {
    const last = this.entryList[this.entryList.length - 1];
    if (!last && kind === "skill") {
      throw new AnnotationError(
        "InterleaveError",
        "first annotation entry must be a motion",
      );
    }
    if (last && last.type === kind) {
      throw new AnnotationError(
        "InterleaveError",
        `adjacent ${kind} entries at frame ${frame}`,
      );
    }
    if (frame > this.frameCount) {
      throw new AnnotationError(
        "RangeError",
        `annotations entry at frame ${frame}: beyond horizon ${this.frameCount}`,
      );
    }
    if (last && frame <= last.frame) {
      throw new AnnotationError(
        "RangeError",
        `annotations entry at frame ${frame}: frames must increase`,
      );
    }
  }

  /** Open a motion segment at the current frame. */
  addMotion(): SessionEntry {
    this.guardEntry("motion", this.currentFrame);
    this.interact(`motion at frame ${this.currentFrame}`);
    const entry: MotionEntry = { frame: this.currentFrame, type: "motion" };
    this.entryList.push(entry);
    this.unsaved = true;
    return entry;
  }

  /**
   * Open a skill segment at the current frame. `hands` must hold one id
   * list per arm (null for an empty hand), in left-to-right order.
   */
  addSkill(
    target: readonly number[] | null,
    hands: ReadonlyArray<readonly number[] | null>,
  ): SessionEntry {
    if (hands.length !== this.armCount) {
      throw new AnnotationError(
        "SchemaError",
        `skill needs ${this.armCount} hand sets, got ${hands.length}`,
      );
    }
    this.guardEntry("skill", this.currentFrame);
    const entry: SkillEntry = {
      frame: this.currentFrame,
      type: "skill",
      target: normalizeIds(target ?? [], "target"),
      hands: hands.map((h, i) => normalizeIds(h ?? [], `hand ${i + 1}`)),
    };
    this.interact(`skill at frame ${this.currentFrame}`);
    this.entryList.push(entry);
    this.unsaved = true;
    return entry;
  }

  /** Remove the most recent entry. */
  undoEntry(): SessionEntry {
    const entry = this.entryList.pop();
    if (!entry) throw new SessionError("no entry to undo");
    this.interact(`undo entry at frame ${entry.frame}`);
    this.unsaved = true;
    return entry;
  }

  // -- document and submission --------------------------------------------

  buildDocument(): AnnotationDoc {
    const masks = this.masks;
    const annotations: AnnotationEntryDoc[] = this.entryList.map((e) => {
      if (e.type === "motion") return { frame: e.frame, type: "motion" };
      const doc: AnnotationEntryDoc = {
        frame: e.frame,
        type: "skill",
        target: e.target.length ? [...e.target] : null,
      };
      if (this.armCount === 1) {
        doc.hand = e.hands[0].length ? [...e.hands[0]] : null;
      } else {
        doc.left_hand = e.hands[0].length ? [...e.hands[0]] : null;
        doc.right_hand = e.hands[1].length ? [...e.hands[1]] : null;
      }
      return doc;
    });
    const doc: AnnotationDoc = {
      masks: masks.map((m) => m.name),
      arms: this.armCount,
      annotations,
    };
    if (masks.length) {
      const boxes: Record<string, Box> = {};
      for (const m of masks) boxes[m.name] = [...m.box] as Box;
      doc.metadata = { boxes };
    }
    return doc;
  }

  /** Run the client-side check on the current document. */
  validate(): Verdict {
    this.verdict = validateAnnotation(
      this.buildDocument(),
      this.objectMasks.length,
      this.frameCount,
    );
    return this.verdict;
  }

  /**
   * Validate, and only if the document passes, upload the masks (gripper
   * first) and post the annotation. A negative verdict blocks the
   * submission before any request is made.
   */
  async submit(service: AnnotationService): Promise<SubmitOutcome> {
    this.interact("submit");
    const doc = this.buildDocument();
    const verdict = validateAnnotation(
      doc,
      this.objectMasks.length,
      this.frameCount,
    );
    this.verdict = verdict;
    if (!verdict.ok) {
      return { blocked: true, verdict };
    }
    for (const mask of this.masks) {
      const up = await service.uploadMask(mask.name, encodeGrayPng(mask.image));
      if (!up.ok) {
        return {
          blocked: false,
          verdict,
          response: {
            ok: false,
            error: up.error ?? "UploadError",
            detail: up.detail ?? `mask ${mask.name} rejected`,
          },
        };
      }
    }
    const response = await service.submitAnnotation(doc);
    if (response.ok) this.unsaved = false;
    return { blocked: false, verdict, response };
  }
}
