// Self-contained binary codecs: just enough PNG and WAV for the stubs.

import { deflateSync } from "node:zlib";

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(data: Buffer): number {
  let crc = 0xffffffff;
  for (const byte of data) {
    crc = CRC_TABLE[(crc ^ byte) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}

function pngChunk(type: string, payload: Buffer): Buffer {
  const header = Buffer.alloc(8);
  header.writeUInt32BE(payload.length, 0);
  header.write(type, 4, "ascii");
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(Buffer.concat([header.subarray(4), payload])), 0);
  return Buffer.concat([header, payload, crc]);
}

/** Encode RGB pixel rows (width*height*3 bytes) as a PNG. Deterministic. */
export function encodePng(width: number, height: number, rgb: Buffer): Buffer {
  if (rgb.length !== width * height * 3) {
    throw new Error(`pixel buffer is ${rgb.length} bytes, expected ${width * height * 3}`);
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 2; // color type: truecolor
  const raw = Buffer.alloc(height * (1 + width * 3));
  for (let y = 0; y < height; y++) {
    const offset = y * (1 + width * 3);
    raw[offset] = 0; // filter: none
    rgb.copy(raw, offset + 1, y * width * 3, (y + 1) * width * 3);
  }
  return Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    pngChunk("IHDR", ihdr),
    pngChunk("IDAT", deflateSync(raw, { level: 6 })),
    pngChunk("IEND", Buffer.alloc(0)),
  ]);
}

/** Read width/height out of a PNG buffer (for tests). */
export function pngSize(png: Buffer): { width: number; height: number } {
  return { width: png.readUInt32BE(16), height: png.readUInt32BE(20) };
}

export const WAV_SAMPLE_RATE = 24_000;

/** Wrap mono 16-bit little-endian PCM in a RIFF/WAV container. */
export function encodeWav(pcm: Buffer, sampleRate = WAV_SAMPLE_RATE): Buffer {
  const header = Buffer.alloc(44);
  header.write("RIFF", 0, "ascii");
  header.writeUInt32LE(36 + pcm.length, 4);
  header.write("WAVE", 8, "ascii");
  header.write("fmt ", 12, "ascii");
  header.writeUInt32LE(16, 16);
  header.writeUInt16LE(1, 20); // PCM
  header.writeUInt16LE(1, 22); // mono
  header.writeUInt32LE(sampleRate, 24);
  header.writeUInt32LE(sampleRate * 2, 28);
  header.writeUInt16LE(2, 32);
  header.writeUInt16LE(16, 34);
  header.write("data", 36, "ascii");
  header.writeUInt32LE(pcm.length, 40);
  return Buffer.concat([header, pcm]);
}

/** Minimal WAV reader: returns PCM payload and sample rate, or throws. */
export function decodeWav(wav: Buffer): { pcm: Buffer; sampleRate: number } {
  if (wav.length < 44 || wav.toString("ascii", 0, 4) !== "RIFF" || wav.toString("ascii", 8, 12) !== "WAVE") {
    throw new Error("not a RIFF/WAVE buffer");
  }
  let offset = 12;
  let sampleRate = 0;
  while (offset + 8 <= wav.length) {
    const chunkId = wav.toString("ascii", offset, offset + 4);
    const chunkLen = wav.readUInt32LE(offset + 4);
    if (chunkId === "fmt ") {
      sampleRate = wav.readUInt32LE(offset + 12);
    } else if (chunkId === "data") {
      return { pcm: wav.subarray(offset + 8, offset + 8 + chunkLen), sampleRate };
    }
    offset += 8 + chunkLen + (chunkLen % 2);
  }
  throw new Error("WAV has no data chunk");
}

/**
 * Parse a multipart/form-data body into name -> raw bytes.
 * Handles binary parts; tolerant of missing filename attributes.
 */
export function parseMultipart(contentType: string, body: Buffer): Map<string, Buffer> {
  const match = /boundary=(?:"([^"]+)"|([^;]+))/i.exec(contentType);
  if (!match) {
    throw new Error("multipart body without a boundary parameter");
  }
  const boundary = Buffer.from(`--${(match[1] ?? match[2]).trim()}`);
  const fields = new Map<string, Buffer>();
  let cursor = body.indexOf(boundary);
  while (cursor !== -1) {
    const partStart = cursor + boundary.length;
    if (body.toString("ascii", partStart, partStart + 2) === "--") break;
    const headerEnd = body.indexOf("\r\n\r\n", partStart);
    if (headerEnd === -1) break;
    const next = body.indexOf(boundary, headerEnd);
    if (next === -1) break;
    const headers = body.toString("utf-8", partStart, headerEnd);
    const nameMatch = /name="([^"]+)"/i.exec(headers);
    if (nameMatch) {
      // payload ends with the CRLF that precedes the next boundary
      fields.set(nameMatch[1], body.subarray(headerEnd + 4, next - 2));
    }
    cursor = next;
  }
  return fields;
}
