/**
 * Minimal binary PGM (P5) / PPM (P6) codec.
 *
 * These are the 8-bit lossless raster formats the engine exchanges on
 * disk: one byte per pixel (labels, value 255 = ignore) or three bytes
 * per pixel (RGB images).
 */

export interface LabelView {
  /** Row-major class indices, one byte per pixel. */
  data: Uint8Array;
  width: number;
  height: number;
}

export interface ImageView {
  /** Row-major interleaved RGB, three bytes per pixel. */
  data: Uint8Array;
  width: number;
  height: number;
}

function header(magic: string, width: number, height: number): Uint8Array {
  return new TextEncoder().encode(`${magic}\n${width} ${height}\n255\n`);
}

export function encodePgm(label: LabelView): Uint8Array {
  if (label.data.length !== label.width * label.height) {
    throw new Error(
      `label buffer has ${label.data.length} bytes, expected ${label.width * label.height}`,
    );
  }
  const head = header("P5", label.width, label.height);
  const out = new Uint8Array(head.length + label.data.length);
  out.set(head, 0);
  out.set(label.data, head.length);
  return out;
}

export function encodePpm(image: ImageView): Uint8Array {
  if (image.data.length !== image.width * image.height * 3) {
    throw new Error(
      `image buffer has ${image.data.length} bytes, expected ${image.width * image.height * 3}`,
    );
  }
  const head = header("P6", image.width, image.height);
  const out = new Uint8Array(head.length + image.data.length);
  out.set(head, 0);
  out.set(image.data, head.length);
  return out;
}

const WHITESPACE = new Set([0x20, 0x09, 0x0a, 0x0d, 0x0b, 0x0c]);

/** Read the next ASCII token, skipping whitespace and # comment lines. */
function nextToken(bytes: Uint8Array, pos: number): [string, number] {
  while (pos < bytes.length) {
    if (WHITESPACE.has(bytes[pos])) {
      pos += 1;
    } else if (bytes[pos] === 0x23) {
      while (pos < bytes.length && bytes[pos] !== 0x0a) pos += 1;
    } else {
      break;
    }
  }
  const start = pos;
  while (pos < bytes.length && !WHITESPACE.has(bytes[pos])) pos += 1;
  if (start === pos) throw new Error("truncated raster header");
  return [new TextDecoder().decode(bytes.subarray(start, pos)), pos];
}

export function decodePgm(bytes: Uint8Array): LabelView {
  let pos = 0;
  let magic: string, w: string, h: string, maxval: string;
  [magic, pos] = nextToken(bytes, pos);
  if (magic !== "P5") throw new Error(`expected P5 raster, got ${magic}`);
  [w, pos] = nextToken(bytes, pos);
  [h, pos] = nextToken(bytes, pos);
  [maxval, pos] = nextToken(bytes, pos);
  if (maxval !== "255") throw new Error(`expected 8-bit raster, maxval ${maxval}`);
  pos += 1; // single whitespace byte after maxval
  const width = Number(w);
  const height = Number(h);
  if (!Number.isInteger(width) || !Number.isInteger(height) || width <= 0 || height <= 0) {
    throw new Error(`bad raster size ${w} x ${h}`);
  }
  if (bytes.length - pos < width * height) throw new Error("truncated raster data");
  return { data: bytes.slice(pos, pos + width * height), width, height };
}
