export { ServiceClient } from "./client.js";
export { runReferenceSession, type DriverReport } from "./driver.js";
export { AnnotationError, SessionError, type ErrorName } from "./errors.js";
export { encodeGrayPng, crc32 } from "./png.js";
export {
  emptyMask,
  maskArea,
  maskContains,
  polygonBounds,
  rasterizePolygon,
  type MaskImage,
  type Point,
} from "./raster.js";
export {
  AnnotationSession,
  type AnnotationService,
  type SessionEntry,
  type StoredMask,
  type SubmitOutcome,
} from "./session.js";
export type {
  AnnotationDoc,
  AnnotationEntryDoc,
  Box,
  EntryKind,
  FrameListing,
  MaskUploadResponse,
  Segment,
  ServiceMeta,
  SubmitAccepted,
  SubmitRejected,
  SubmitResponse,
  Verdict,
} from "./types.js";
export { validateAnnotation } from "./validate.js";
