/**
 * The diffusion-runtime boundary.
 *
 * A runtime owns the actual denoising loop; the exporter only asks it to
 * surface, for every (frame, step, layer), the spatial self-attention
 * output tokens and the cross-attention query/key matrices. The
 * synthetic runtime generates deterministic stand-ins so exports can be
 * produced and tested on machines without model weights; the
 * stable-diffusion adapter is the integration point for a real host.
 */

import * as fs from "node:fs";

export interface LayerSpec {
  id: string;
  /** spatial side of the attention grid at this layer (tokens = side^2) */
  side: number;
}

export interface StepCapture {
  /** (side*side) x featureDim spatial self-attention output tokens */
  features: Float32Array;
  featureDim: number;
  /** (side*side) x keyDim cross-attention queries */
  q: Float32Array;
  /** nWords x keyDim cross-attention keys */
  k: Float32Array;
  keyDim: number;
  nWords: number;
}

export interface DiffusionRuntime {
  /** Acquire weights/resources. Must fail with an actionable message. */
  load(): void;
  /** Deterministic capture for one (frame, step, layer). */
  capture(frameIndex: number, stepIndex: number, layer: LayerSpec): StepCapture;
}

/** Deterministic 32-bit PRNG (mulberry32); stable across platforms. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function hashKey(...parts: number[]): number {
  let h = 2166136261 >>> 0;
  for (const p of parts) {
    h = Math.imul(h ^ (p >>> 0), 16777619) >>> 0;
  }
  return h;
}

export interface SyntheticOptions {
  seed: number;
  featureDim?: number;
  keyDim?: number;
  nWords?: number;
  driftRate?: number;
  hotspotWord?: number;
}

/**
 * Unit-norm token features rotating in per-token planes by a fixed angle
 * per frame, and a moving one-word attention hotspot: the same toy
 * geometry the engine's pipeline tests use, so replays behave sensibly.
 */
export class SyntheticRuntime implements DiffusionRuntime {
  private readonly seed: number;
  private readonly featureDim: number;
  private readonly keyDim: number;
  private readonly nWords: number;
  private readonly driftRate: number;
  private readonly hotspotWord: number;
  private readonly planes = new Map<string, { u: Float64Array; w: Float64Array }>();

  constructor(opts: SyntheticOptions) {
    this.seed = opts.seed;
    this.featureDim = opts.featureDim ?? 64;
    this.keyDim = opts.keyDim ?? 32;
    this.nWords = opts.nWords ?? 8;
    this.driftRate = opts.driftRate ?? 0.05;
    this.hotspotWord = opts.hotspotWord ?? 1;
  }

  load(): void {
    // nothing to acquire
  }

  private tokenPlanes(layer: LayerSpec): { u: Float64Array; w: Float64Array } {
    const cacheKey = `${layer.id}:${layer.side}`;
    const cached = this.planes.get(cacheKey);
    if (cached) return cached;
    const n = layer.side * layer.side;
    const d = this.featureDim;
    let layerHash = 0;
    for (const ch of layer.id) layerHash = hashKey(layerHash, ch.charCodeAt(0));
    const rand = mulberry32(hashKey(this.seed, layerHash, layer.side));
    const u = new Float64Array(n * d);
    const w = new Float64Array(n * d);
    for (let i = 0; i < n; i++) {
      let nu = 0;
      for (let j = 0; j < d; j++) {
        const v = rand() * 2 - 1;
        u[i * d + j] = v;
        nu += v * v;
      }
      nu = Math.sqrt(nu);
      let dot = 0;
      for (let j = 0; j < d; j++) {
        u[i * d + j] /= nu;
        const v = rand() * 2 - 1;
        w[i * d + j] = v;
        dot += v * u[i * d + j];
      }
      let nw = 0;
      for (let j = 0; j < d; j++) {
        w[i * d + j] -= dot * u[i * d + j];
        nw += w[i * d + j] * w[i * d + j];
      }
      nw = Math.sqrt(nw);
      for (let j = 0; j < d; j++) w[i * d + j] /= nw;
    }
    const planes = { u, w };
    this.planes.set(cacheKey, planes);
    return planes;
  }

  capture(frameIndex: number, stepIndex: number, layer: LayerSpec): StepCapture {
    const n = layer.side * layer.side;
    const d = this.featureDim;
    const { u, w } = this.tokenPlanes(layer);
    const angle = frameIndex * this.driftRate;
    const c = Math.cos(angle);
    const s = Math.sin(angle);
    const features = new Float32Array(n * d);
    for (let i = 0; i < n * d; i++) features[i] = c * u[i] + s * w[i];

    const q = new Float32Array(n * this.keyDim);
    const spot = (this.seed + frameIndex) % n;
    for (let i = 0; i < n; i++) {
      if (i === spot) q[i * this.keyDim + this.hotspotWord] = 30.0;
      else q[i * this.keyDim] = 30.0;
    }
    const k = new Float32Array(this.nWords * this.keyDim);
    for (let word = 0; word < this.nWords; word++) k[word * this.keyDim + word] = 1.0;

    return { features, featureDim: d, q, k, keyDim: this.keyDim, nWords: this.nWords };
  }
}

export interface StableDiffusionOptions {
  weightsPath?: string;
}

/**
 * Integration point for a real latent-diffusion host. Loading verifies
 * the weights exist up front so a misconfigured run fails before any
 * export work starts.
 */
export class StableDiffusionRuntime implements DiffusionRuntime {
  constructor(private readonly opts: StableDiffusionOptions) {}

  load(): void {
    const where = this.opts.weightsPath ?? "(not configured)";
    if (!this.opts.weightsPath || !fs.existsSync(this.opts.weightsPath)) {
      throw new Error(
        `stable-diffusion weights not found at ${where}; ` +
          `pass --weights /path/to/checkpoint or use --runtime synthetic`,
      );
    }
    throw new Error(
      "stable-diffusion runtime adapter is not wired to a host in this build; " +
        "use --runtime synthetic",
    );
  }

  capture(): StepCapture {
    throw new Error("stable-diffusion runtime not loaded");
  }
}
