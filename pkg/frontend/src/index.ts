/**
 * Node bindings for the nsegment label-deformation engine.
 *
 * Exposes the engine's transforms, perturbations and overlap metric as
 * async calls over typed array views, by driving the `nseg` CLI through
 * a per-call temp workspace (labels travel as PGM rasters, outcomes as
 * manifest records). Outputs are bit-identical to the engine's own: the
 * pixels are produced by the same process the Python library runs.
 */

import { readFile, writeFile, mkdir } from "node:fs/promises";
import { join } from "node:path";

import { runNseg, withTempDir } from "./cli.js";
import {
  decodePgm,
  encodePgm,
  encodePpm,
  type ImageView,
  type LabelView,
} from "./raster.js";

export { decodePgm, encodePgm, encodePpm };
export type { ImageView, LabelView };

/** Matches the primary library version. */
export const VERSION = "0.1.0";

export interface TransformConfig {
  /** Transform probability; the deformation fires iff u < p. Default 0.5. */
  p?: number;
  /** Small-mask area threshold in pixels². Default 1000. */
  theta?: number;
  /** (alpha, sigma) pool; default is the 15-pair product {1,15,30,50,100}x{3,5,10}. */
  omega?: [number, number][];
  /** "nsegment" (no suppression) or "nsegment+" (default). */
  mode?: "nsegment" | "nsegment+";
  /** What the field warps: "label" (default), "image" or "both". */
  target?: "label" | "image" | "both";
  /** Off-contract variant: suppress per connected component. */
  perComponent?: boolean;
}

export interface TransformOutcome {
  applied: boolean;
  paramsUsed: [number, number] | null;
  suppressedClasses: number[];
}

export interface TransformResult {
  label: LabelView;
  outcome: TransformOutcome;
}

export type PerturbKind = "elastic" | "erode" | "dilate" | "shift";

export interface PerturbSpec {
  kind: PerturbKind;
  /** [alpha, sigma] for elastic; odd kernel size or shift distance otherwise. */
  magnitude: number | [number, number];
  /** "label" (default) or "sync". */
  target?: "label" | "sync";
}

export interface PerturbResult {
  label: LabelView;
  /** Mean IoU of the perturbed label against the input. */
  meanMiou: number;
}

export interface MiouResult {
  /** Per-class IoU; null for classes with zero union. */
  perClass: (number | null)[];
  mean: number;
}

function checkLabel(label: LabelView): void {
  if (
    !Number.isInteger(label.width) ||
    !Number.isInteger(label.height) ||
    label.width <= 0 ||
    label.height <= 0
  ) {
    throw new Error(`bad label size ${label.width} x ${label.height}`);
  }
  if (label.data.length !== label.width * label.height) {
    throw new Error(
      `label buffer has ${label.data.length} bytes, expected ${label.width * label.height}`,
    );
  }
}

function omegaText(omega: [number, number][]): string {
  if (omega.length === 0) throw new Error("omega must contain at least one pair");
  return omega.map(([a, s]) => `${a}:${s}`).join(",");
}

function configArgs(config: TransformConfig): string[] {
  const args: string[] = [];
  if (config.p !== undefined) args.push("--p", String(config.p));
  if (config.theta !== undefined) args.push("--theta", String(config.theta));
  if (config.omega !== undefined) args.push("--omega", omegaText(config.omega));
  if (config.mode !== undefined) args.push("--mode", config.mode);
  if (config.target !== undefined) args.push("--target", config.target);
  if (config.perComponent) args.push("--per-component");
  return args;
}

/**
 * Apply the stochastic label deformation to one sample.
 *
 * Semantics and randomness are exactly the engine's: the sample runs on
 * the substream derived from (seed, epoch 0, index 0), so the returned
 * label is bit-identical to an engine run over a one-sample dataset.
 * The input views are never written; pass `out` to receive the label
 * pixels in a caller-allocated buffer.
 */
export async function transform(
  image: ImageView | null,
  label: LabelView,
  config: TransformConfig,
  seed: number,
  out?: Uint8Array,
): Promise<TransformResult> {
  checkLabel(label);
  if (image !== null) {
    if (image.width !== label.width || image.height !== label.height) {
      throw new Error(
        `image ${image.width}x${image.height} does not match label ${label.width}x${label.height}`,
      );
    }
    if (image.data.length !== image.width * image.height * 3) {
      throw new Error(
        `image buffer has ${image.data.length} bytes, expected ${image.width * image.height * 3}`,
      );
    }
  }
  if (out !== undefined && out.length !== label.width * label.height) {
    throw new Error(`out buffer has ${out.length} bytes, expected ${label.width * label.height}`);
  }
  return withTempDir(async (dir) => {
    const imageDir = join(dir, "img");
    const labelDir = join(dir, "ann");
    const outDir = join(dir, "out");
    await mkdir(imageDir);
    await mkdir(labelDir);
    const imageView: ImageView = image ?? {
      data: new Uint8Array(label.width * label.height * 3),
      width: label.width,
      height: label.height,
    };
    await writeFile(join(imageDir, "sample.ppm"), encodePpm(imageView));
    await writeFile(join(labelDir, "sample.pgm"), encodePgm(label));
    await runNseg([
      "augment",
      "--images", imageDir,
      "--labels", labelDir,
      "--out", outDir,
      "--label-format", "pgm",
      "--epochs", "1",
      "--seed", String(seed),
      ...configArgs(config),
    ]);
    const manifest = await readFile(join(outDir, "manifest.jsonl"), "utf-8");
    const lines = manifest.trim().split("\n");
    const record = JSON.parse(lines[1]);
    const produced = decodePgm(await readFile(join(outDir, record.output_label_path)));
    let data = produced.data;
    if (out !== undefined) {
      out.set(produced.data);
      data = out;
    }
    return {
      label: { data, width: produced.width, height: produced.height },
      outcome: {
        applied: record.applied,
        paramsUsed: record.params_used === null ? null : [record.params_used[0], record.params_used[1]],
        suppressedClasses: record.suppressed_classes,
      },
    };
  });
}

function magnitudeText(spec: PerturbSpec): string {
  if (Array.isArray(spec.magnitude)) {
    if (spec.kind !== "elastic") {
      throw new Error(`${spec.kind} takes a single magnitude value`);
    }
    return `${spec.magnitude[0]}:${spec.magnitude[1]}`;
  }
  return String(spec.magnitude);
}

/** Apply one perturbation to a label and report its overlap with the input. */
export async function perturb(
  label: LabelView,
  spec: PerturbSpec,
  seed = 0,
): Promise<PerturbResult> {
  checkLabel(label);
  const magnitude = magnitudeText(spec);
  return withTempDir(async (dir) => {
    const labelDir = join(dir, "ann");
    const savedDir = join(dir, "pert");
    await mkdir(labelDir);
    await writeFile(join(labelDir, "sample.pgm"), encodePgm(label));
    await runNseg([
      "perturb",
      "--labels", labelDir,
      "--kind", spec.kind,
      "--grid", magnitude,
      "--target", spec.target ?? "label",
      "--seed", String(seed),
      "--out", join(dir, "sweep.csv"),
      "--save-perturbed", savedDir,
    ]);
    const csv = await readFile(join(dir, "sweep.csv"), "utf-8");
    const row = csv.trim().split("\n")[1].split(",");
    const slug = `${spec.kind}_${magnitude.replace(":", "x")}`;
    const produced = decodePgm(await readFile(join(savedDir, slug, "sample.pgm")));
    return { label: produced, meanMiou: Number(row[3]) };
  });
}

/** Per-class IoU and mean between two label views of the same size. */
export async function miou(
  reference: LabelView,
  other: LabelView,
  numClasses?: number,
): Promise<MiouResult> {
  checkLabel(reference);
  checkLabel(other);
  if (reference.width !== other.width || reference.height !== other.height) {
    throw new Error("label views differ in size");
  }
  return withTempDir(async (dir) => {
    const refDir = join(dir, "ref");
    const predDir = join(dir, "pred");
    await mkdir(refDir);
    await mkdir(predDir);
    await writeFile(join(refDir, "sample.pgm"), encodePgm(reference));
    await writeFile(join(predDir, "sample.pgm"), encodePgm(other));
    const csvPath = join(dir, "iou.csv");
    const args = ["evaluate", "--ref", refDir, "--pred", predDir, "--csv", csvPath];
    if (numClasses !== undefined) args.push("--classes", String(numClasses));
    await runNseg(args);
    const lines = (await readFile(csvPath, "utf-8")).trim().split("\n");
    const perClass: (number | null)[] = [];
    let mean = NaN;
    for (const line of lines.slice(1)) {
      const [name, value] = line.split(",");
      if (name === "mean") {
        mean = Number(value);
      } else {
        perClass.push(value === "" ? null : Number(value));
      }
    }
    return { perClass, mean };
  });
}
