/**
 * Drives a runtime over (frame, step, layer) and records spatial
 * features plus cross-attention Q/K as tensor files, finishing with the
 * manifest so a dump is only discoverable once it is complete.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { ManifestRecord, writeManifest } from "./manifest.js";
import { DiffusionRuntime, LayerSpec } from "./runtime.js";
import { writeTensor } from "./tensorfile.js";

export interface ExportPlan {
  framePaths: string[];
  prompt: string;
  wordIndices: number[];
  steps: number;
  layers: LayerSpec[];
  outDir: string;
  seed: number;
}

export class PlanError extends Error {}

export function listFrames(framesDir: string): string[] {
  let entries: string[];
  try {
    entries = fs.readdirSync(framesDir);
  } catch {
    throw new PlanError(`frames directory not readable: ${framesDir}`);
  }
  const frames = entries
    .filter((name) => !name.startsWith("."))
    .sort()
    .map((name) => path.join(framesDir, name))
    .filter((p) => fs.statSync(p).isFile());
  if (frames.length === 0) throw new PlanError(`no frame files in ${framesDir}`);
  return frames;
}

export function parseLayers(spec: string): LayerSpec[] {
  const layers = spec
    .split(",")
    .map((s) => s.trim())
    .filter(Boolean)
    .map((entry) => {
      const [id, side] = entry.split("=");
      const parsed = side === undefined ? 16 : Number(side);
      if (!id || /\s/.test(id)) throw new PlanError(`bad layer id ${JSON.stringify(id)}`);
      if (!Number.isInteger(parsed) || parsed < 1) {
        throw new PlanError(`bad layer side in ${JSON.stringify(entry)}`);
      }
      return { id, side: parsed };
    });
  if (layers.length === 0) throw new PlanError("at least one layer is required");
  return layers;
}

export function validatePlan(plan: ExportPlan): void {
  if (plan.framePaths.length === 0) throw new PlanError("plan has no frames");
  if (plan.steps < 1) throw new PlanError(`steps must be >= 1, got ${plan.steps}`);
  if (plan.layers.length === 0) throw new PlanError("plan has no layers");
  if (plan.wordIndices.length === 0) throw new PlanError("at least one word index is required");
  for (const p of plan.framePaths) {
    if (!fs.existsSync(p)) throw new PlanError(`frame file missing: ${p}`);
  }
}

/** Probe writability before the runtime loads anything heavy. */
function ensureWritable(outDir: string): void {
  try {
    fs.mkdirSync(outDir, { recursive: true });
    const probe = path.join(outDir, ".write-probe");
    fs.writeFileSync(probe, "");
    fs.rmSync(probe);
  } catch (err) {
    throw new PlanError(`output directory not writable: ${outDir} (${(err as Error).message})`);
  }
}

export function exportRun(plan: ExportPlan, runtime: DiffusionRuntime): ManifestRecord[] {
  validatePlan(plan);
  ensureWritable(plan.outDir);
  runtime.load();

  const records: ManifestRecord[] = [];
  const put = (
    name: string,
    dims: number[],
    values: Float32Array,
    meta: Omit<ManifestRecord, "path">,
  ) => {
    writeTensor(path.join(plan.outDir, name), dims, values);
    records.push({ ...meta, path: name });
  };

  for (let f = 0; f < plan.framePaths.length; f++) {
    for (let s = 0; s < plan.steps; s++) {
      for (const layer of plan.layers) {
        const cap = runtime.capture(f, s, layer);
        const n = layer.side * layer.side;
        const base = `f${String(f).padStart(3, "0")}_s${String(s).padStart(3, "0")}_${layer.id}`;
        const shape: [number, number] = [layer.side, layer.side];
        put(`${base}_feat.eyit`, [n, cap.featureDim], cap.features, {
          frameIndex: f,
          stepIndex: s,
          layerId: layer.id,
          headIndex: null,
          kind: "spatial_features",
          spatialShape: shape,
        });
        put(`${base}_q.eyit`, [n, cap.keyDim], cap.q, {
          frameIndex: f,
          stepIndex: s,
          layerId: layer.id,
          headIndex: 0,
          kind: "cross_q",
          spatialShape: shape,
        });
        put(`${base}_k.eyit`, [cap.nWords, cap.keyDim], cap.k, {
          frameIndex: f,
          stepIndex: s,
          layerId: layer.id,
          headIndex: 0,
          kind: "cross_k",
          spatialShape: shape,
        });
      }
    }
  }
  writeManifest(path.join(plan.outDir, "manifest.tsv"), records);
  return records;
}
