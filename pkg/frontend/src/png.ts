/**
 * Minimal 8-bit grayscale PNG encoder for mask uploads. The zlib stream
 * uses stored (uncompressed) deflate blocks: masks are tiny, and storing
 * keeps the encoder dependency-free and byte-level verifiable.
 */

import type { MaskImage } from "./raster.js";

const SIGNATURE = Uint8Array.of(137, 80, 78, 71, 13, 10, 26, 10);

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c;
  }
  return table;
})();

export function crc32(data: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < data.length; i++) {
    c = CRC_TABLE[(c ^ data[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function adler32(data: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < data.length; i++) {
    a = (a + data[i]) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

function u32be(v: number): Uint8Array {
  return Uint8Array.of((v >>> 24) & 0xff, (v >>> 16) & 0xff, (v >>> 8) & 0xff, v & 0xff);
}

function concat(parts: Uint8Array[]): Uint8Array {
  const out = new Uint8Array(parts.reduce((n, p) => n + p.length, 0));
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}

function chunk(type: string, data: Uint8Array): Uint8Array {
  const typeBytes = Uint8Array.from(type, (c) => c.charCodeAt(0));
  const body = concat([typeBytes, data]);
  return concat([u32be(data.length), body, u32be(crc32(body))]);
}

/** Wrap raw bytes in a zlib stream of stored deflate blocks. */
function zlibStored(raw: Uint8Array): Uint8Array {
  const parts: Uint8Array[] = [Uint8Array.of(0x78, 0x01)];
  const blockSize = 0xffff;
  const blocks = Math.max(1, Math.ceil(raw.length / blockSize));
  for (let i = 0; i < blocks; i++) {
    const start = i * blockSize;
    const data = raw.subarray(start, Math.min(start + blockSize, raw.length));
    const final = i === blocks - 1 ? 1 : 0;
    const len = data.length;
    parts.push(
      Uint8Array.of(final, len & 0xff, (len >>> 8) & 0xff, ~len & 0xff, (~len >>> 8) & 0xff),
      data,
    );
  }
  parts.push(u32be(adler32(raw)));
  return concat(parts);
}

/** Encode a mask as an 8-bit grayscale PNG. */
export function encodeGrayPng(image: MaskImage): Uint8Array {
  const { width, height, data } = image;
  if (width <= 0 || height <= 0 || data.length !== width * height) {
    throw new Error(`mask shape mismatch: ${width}x${height} vs ${data.length} bytes`);
  }
  // bit depth 8, color type 0 (grayscale), default compression/filter,
  // no interlace
  const ihdr = concat([u32be(width), u32be(height), Uint8Array.of(8, 0, 0, 0, 0)]);
  const raw = new Uint8Array((width + 1) * height);
  for (let y = 0; y < height; y++) {
    raw[y * (width + 1)] = 0; // filter: none
    raw.set(data.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
  }
  return concat([
    SIGNATURE,
    chunk("IHDR", ihdr),
    chunk("IDAT", zlibStored(raw)),
    chunk("IEND", new Uint8Array(0)),
  ]);
}
