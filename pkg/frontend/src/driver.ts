/**
 * Scripted session driver: reproduces the reference bimanual annotation
 * (four masks, two skills, horizon 40) through the same session API the
 * interactive UI uses, counting every gesture. Playing to a frame costs
 * two interactions (play, stop) no matter how many frames elapse, which is
 * what keeps a full session under the interaction budget.
 */

import type { AnnotationService, SubmitOutcome } from "./session.js";
import { AnnotationSession } from "./session.js";
import type { Point } from "./raster.js";

export interface DriverReport {
  interactions: number;
  outcome: SubmitOutcome;
  log: string[];
}

/** Fractional polygon coordinates, scaled to the mask size at runtime:
 * one region per mask, spread over the image so they stay distinct. */
const MASK_POLYGONS: ReadonlyArray<ReadonlyArray<Point>> = [
  [[0.05, 0.05], [0.35, 0.08], [0.3, 0.3], [0.08, 0.28]], // gripper
  [[0.55, 0.1], [0.9, 0.12], [0.85, 0.4], [0.6, 0.35]], // object 1
  [[0.1, 0.55], [0.4, 0.6], [0.35, 0.9], [0.08, 0.85]], // object 2
  [[0.6, 0.55], [0.92, 0.6], [0.88, 0.92], [0.58, 0.88]], // object 3
];

function scaled(poly: ReadonlyArray<Point>, w: number, h: number): Point[] {
  return poly.map(([x, y]) => [x * w, y * h] as Point);
}

function playTo(session: AnnotationSession, frame: number): void {
  if (frame < session.frame) {
    throw new Error(`cannot play backwards to frame ${frame}`);
  }
  if (frame === session.frame) return;
  session.play();
  while (session.frame < frame) session.tick();
  session.stop();
}

/**
 * Run the reference annotation end to end against `service` and return
 * the submission outcome plus the interaction tally.
 */
export async function runReferenceSession(
  session: AnnotationSession,
  service: AnnotationService,
): Promise<DriverReport> {
  const w = session.maskWidth;
  const h = session.maskHeight;

  session.setArms(2);
  session.traceGripper(scaled(MASK_POLYGONS[0], w, h));
  for (const poly of MASK_POLYGONS.slice(1)) {
    session.traceObject(scaled(poly, w, h));
  }

  playTo(session, 4);
  session.addMotion();
  playTo(session, 12);
  session.addSkill([2], [null, null]);
  playTo(session, 23);
  session.addMotion();
  playTo(session, 31);
  session.addSkill([1, 3], [[2], null]);

  const outcome = await session.submit(service);
  return {
    interactions: session.interactions,
    outcome,
    log: [...session.log],
  };
}
