/** Deterministic test-data helpers. */

import type { ImageView, LabelView } from "../src/raster.js";

/** mulberry32: tiny seeded PRNG, good enough for fixture data. */
export function prng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomLabel(
  seed: number,
  width: number,
  height: number,
  numClasses = 4,
  ignoreFrac = 0.1,
): LabelView {
  const rand = prng(seed);
  const data = new Uint8Array(width * height);
  for (let i = 0; i < data.length; i++) {
    data[i] = rand() < ignoreFrac ? 255 : Math.floor(rand() * numClasses);
  }
  return { data, width, height };
}

export function randomImage(seed: number, width: number, height: number): ImageView {
  const rand = prng(seed);
  const data = new Uint8Array(width * height * 3);
  for (let i = 0; i < data.length; i++) data[i] = Math.floor(rand() * 256);
  return { data, width, height };
}

export function squareLabel(size: number, side: number): LabelView {
  const data = new Uint8Array(size * size);
  const lo = Math.floor((size - side) / 2);
  for (let y = lo; y < lo + side; y++) {
    for (let x = lo; x < lo + side; x++) data[y * size + x] = 1;
  }
  return { data, width: size, height: size };
}

export async function pool<T, R>(
  items: T[],
  limit: number,
  fn: (item: T, index: number) => Promise<R>,
): Promise<R[]> {
  const results: R[] = new Array(items.length);
  let next = 0;
  const workers = Array.from({ length: Math.min(limit, items.length) }, async () => {
    while (next < items.length) {
      const index = next++;
      results[index] = await fn(items[index], index);
    }
  });
  await Promise.all(workers);
  return results;
}
