/** Error classification shared with the annotation service. */

export type ErrorName = "SchemaError" | "InterleaveError" | "RangeError";

/**
 * A rule violation in an annotation document or in an annotation-building
 * step. `kind` matches the class name the service reports in its 400
 * responses, so client-side verdicts and server verdicts are comparable.
 */
export class AnnotationError extends Error {
  constructor(readonly kind: ErrorName, detail: string) {
    super(detail);
    this.name = kind;
  }
}

/** Misuse of the session itself (wrong frame, bad call order), not a rule
 * of the annotation format. */
export class SessionError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "SessionError";
  }
}
