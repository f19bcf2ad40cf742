/**
 * Browser wiring: frame viewer with playback, polygon drawing on frame 1,
 * entry editing and submission. Keyboard-first: space toggles playback,
 * arrow keys step, B rolls back to frame 1, M opens a motion, K opens a
 * skill, U undoes the last entry, Enter closes the polygon in progress.
 *
 * All state lives in `AnnotationSession`; this module only reflects it
 * into the DOM, so everything below is presentation and event plumbing.
 */

import { ServiceClient } from "./client.js";
import { AnnotationError, SessionError } from "./errors.js";
import type { Point } from "./raster.js";
import { AnnotationSession } from "./session.js";

const TICK_MS = 100;

interface UiRefs {
  frameImage: HTMLImageElement;
  overlay: HTMLCanvasElement;
  status: HTMLElement;
  entryTable: HTMLElement;
  maskList: HTMLElement;
  verdictPanel: HTMLElement;
  armsSelect: HTMLSelectElement;
  submitButton: HTMLButtonElement;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function describeEntry(e: { frame: number; type: string }): string {
  return `frame ${e.frame}: ${e.type}`;
}

export class AnnotationApp {
  private session!: AnnotationSession;
  private readonly client: ServiceClient;
  private refs!: UiRefs;
  private polygon: Point[] = [];
  private timer: number | null = null;
  private gripperDrawn = false;

  constructor(baseUrl = "") {
    this.client = new ServiceClient(baseUrl);
  }

  async start(): Promise<void> {
    this.refs = {
      frameImage: el<HTMLImageElement>("frame-image"),
      overlay: el<HTMLCanvasElement>("overlay"),
      status: el("status"),
      entryTable: el("entries"),
      maskList: el("masks"),
      verdictPanel: el("verdict"),
      armsSelect: el<HTMLSelectElement>("arms"),
      submitButton: el<HTMLButtonElement>("submit"),
    };
    const listing = await this.client.frames();
    if (listing.count === 0) {
      this.refs.status.textContent = "no frames to annotate";
      return;
    }
    const size = await this.loadFrame(1);
    this.session = new AnnotationSession(listing.count, size.width, size.height);
    this.bindEvents();
    this.render();
  }

  private loadFrame(index: number): Promise<{ width: number; height: number }> {
    const img = this.refs.frameImage;
    return new Promise((resolve, reject) => {
      img.onload = () => {
        this.refs.overlay.width = img.naturalWidth;
        this.refs.overlay.height = img.naturalHeight;
        resolve({ width: img.naturalWidth, height: img.naturalHeight });
      };
      img.onerror = () => reject(new Error(`cannot load frame ${index}`));
      img.src = this.client.frameUrl(index);
    });
  }

  private bindEvents(): void {
    window.addEventListener("keydown", (ev) => this.onKey(ev));
    window.addEventListener("beforeunload", (ev) => {
      if (this.session.hasUnsavedChanges) ev.preventDefault();
    });
    this.refs.overlay.addEventListener("click", (ev) => this.onCanvasClick(ev));
    this.refs.armsSelect.addEventListener("change", () => {
      this.guarded(() =>
        this.session.setArms(this.refs.armsSelect.value === "2" ? 2 : 1),
      );
    });
    this.refs.submitButton.addEventListener("click", () => {
      void this.submit();
    });
  }

  private onKey(ev: KeyboardEvent): void {
    const key = ev.key;
    if (key === " ") {
      ev.preventDefault();
      this.session.playing ? this.stopPlayback() : this.startPlayback();
    } else if (key === "ArrowRight") {
      this.guarded(() => this.session.stepForward());
    } else if (key === "ArrowLeft") {
      this.guarded(() => this.session.stepBackward());
    } else if (key === "b" || key === "B") {
      this.stopTimer();
      this.guarded(() => this.session.rollback());
    } else if (key === "m" || key === "M") {
      this.guarded(() => this.session.addMotion());
    } else if (key === "k" || key === "K") {
      this.guarded(() => this.addSkillFromPrompt());
    } else if (key === "u" || key === "U") {
      this.guarded(() => this.session.undoEntry());
    } else if (key === "Enter") {
      this.guarded(() => this.closePolygon());
    }
  }

  private startPlayback(): void {
    this.session.play();
    this.timer = window.setInterval(() => {
      this.session.tick();
      if (!this.session.playing) this.stopTimer();
      this.render();
    }, TICK_MS);
    this.render();
  }

  private stopPlayback(): void {
    this.session.stop();
    this.stopTimer();
    this.render();
  }

  private stopTimer(): void {
    if (this.timer !== null) {
      window.clearInterval(this.timer);
      this.timer = null;
    }
  }

  private onCanvasClick(ev: MouseEvent): void {
    if (this.session.frame !== 1) return; // masks live on frame 1
    const rect = this.refs.overlay.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * this.refs.overlay.width;
    const y = ((ev.clientY - rect.top) / rect.height) * this.refs.overlay.height;
    this.polygon.push([x, y]);
    this.render();
  }

  private closePolygon(): void {
    if (this.polygon.length < 3) return;
    if (!this.gripperDrawn) {
      this.session.traceGripper(this.polygon);
      this.gripperDrawn = true;
    } else {
      this.session.traceObject(this.polygon);
    }
    this.polygon = [];
  }

  private parseIds(text: string): number[] | null {
    const trimmed = text.trim();
    if (!trimmed) return null;
    return trimmed.split(/[\s,]+/).map((t) => Number.parseInt(t, 10));
  }

  private addSkillFromPrompt(): void {
    const target = this.parseIds(
      window.prompt("target object ids (comma separated, empty for none)") ?? "",
    );
    const hands: Array<number[] | null> = [];
    const labels =
      this.session.arms === 1 ? ["hand"] : ["left hand", "right hand"];
    for (const label of labels) {
      hands.push(
        this.parseIds(window.prompt(`${label} object ids (empty for none)`) ?? ""),
      );
    }
    this.session.addSkill(target, hands);
  }

  private guarded(action: () => void): void {
    try {
      action();
      this.showVerdict("");
    } catch (e) {
      if (e instanceof AnnotationError) {
        this.showVerdict(`${e.kind}: ${e.message}`);
      } else if (e instanceof SessionError) {
        this.showVerdict(e.message);
      } else {
        throw e;
      }
    }
    this.render();
  }

  private async submit(): Promise<void> {
    const outcome = await this.session.submit(this.client);
    if (outcome.blocked && !outcome.verdict.ok) {
      this.showVerdict(
        `blocked: ${outcome.verdict.error}: ${outcome.verdict.detail}`,
      );
    } else if (outcome.response && !outcome.response.ok) {
      this.showVerdict(
        `rejected: ${outcome.response.error}: ${outcome.response.detail}`,
      );
    } else if (outcome.response) {
      const warn = outcome.response.warnings.length
        ? ` (${outcome.response.warnings.join("; ")})`
        : "";
      this.showVerdict(
        `saved ${outcome.response.path}: ${outcome.response.segments} segments${warn}`,
      );
    }
    this.render();
  }

  private showVerdict(text: string): void {
    this.refs.verdictPanel.textContent = text;
  }

  private render(): void {
    const s = this.session;
    if (s.frame !== Number(this.refs.frameImage.dataset.frame ?? "1")) {
      this.refs.frameImage.dataset.frame = String(s.frame);
      this.refs.frameImage.src = this.client.frameUrl(s.frame);
    }
    this.refs.status.textContent =
      `frame ${s.frame}/${s.frameCount}` +
      (s.playing ? " [playing]" : "") +
      (s.hasUnsavedChanges ? " *" : "");
    this.refs.entryTable.textContent = s.entries
      .map((e) => describeEntry(e))
      .join("\n");
    this.refs.maskList.textContent = s.masks.map((m) => m.name).join("\n");
    this.drawOverlay();
  }

  private drawOverlay(): void {
    const ctx = this.refs.overlay.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, this.refs.overlay.width, this.refs.overlay.height);
    if (this.session.frame !== 1 || this.polygon.length === 0) return;
    ctx.strokeStyle = "#ff4040";
    ctx.beginPath();
    ctx.moveTo(this.polygon[0][0], this.polygon[0][1]);
    for (const [x, y] of this.polygon.slice(1)) ctx.lineTo(x, y);
    ctx.stroke();
  }
}
