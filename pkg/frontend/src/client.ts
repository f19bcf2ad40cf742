/** Thin fetch wrapper for the annotation service's HTTP API. */

import type { AnnotationService } from "./session.js";
import type {
  AnnotationDoc,
  FrameListing,
  MaskUploadResponse,
  ServiceMeta,
  SubmitResponse,
} from "./types.js";

export class ServiceClient implements AnnotationService {
  private readonly base: string;
  private readonly fetchImpl: typeof fetch;

  constructor(baseUrl = "", fetchImpl?: typeof fetch) {
    this.base = baseUrl.replace(/\/+$/, "");
    // wrap the global so the call keeps its expected receiver in browsers
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private url(path: string): string {
    return this.base + path;
  }

  async meta(): Promise<ServiceMeta> {
    const r = await this.fetchImpl(this.url("/meta"));
    if (!r.ok) throw new Error(`GET /meta failed with ${r.status}`);
    return (await r.json()) as ServiceMeta;
  }

  async frames(): Promise<FrameListing> {
    const r = await this.fetchImpl(this.url("/frames"));
    if (!r.ok) throw new Error(`GET /frames failed with ${r.status}`);
    return (await r.json()) as FrameListing;
  }

  /** URL of the 1-based frame image, for use as an img source. */
  frameUrl(index: number): string {
    return this.url(`/frames/${index}`);
  }

  async uploadMask(name: string, data: Uint8Array): Promise<MaskUploadResponse> {
    const r = await this.fetchImpl(this.url(`/masks/${name}`), {
      method: "POST",
      headers: { "content-type": "application/octet-stream" },
      // copy into a plain ArrayBuffer-backed view; fetch bodies reject
      // views that might wrap a SharedArrayBuffer
      body: new Uint8Array(data),
    });
    return (await r.json()) as MaskUploadResponse;
  }

  async submitAnnotation(doc: AnnotationDoc): Promise<SubmitResponse> {
    const r = await this.fetchImpl(this.url("/annotation"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(doc),
    });
    return (await r.json()) as SubmitResponse;
  }
}
