/**
 * attn-exporter CLI.
 *
 *   attn-exporter export --frames DIR --prompt STR --word-idx LIST \
 *       --steps N --layers SPEC --out DIR --seed S [--runtime synthetic|sd]
 *   attn-exporter verify DIR
 */

import { parseArgs } from "node:util";

import { ExportPlan, exportRun, listFrames, parseLayers, PlanError } from "./exportRun.js";
import { DiffusionRuntime, StableDiffusionRuntime, SyntheticRuntime } from "./runtime.js";
import { verifyManifest } from "./verify.js";

const USAGE = `usage:
  attn-exporter export --frames DIR --prompt STR --word-idx LIST --steps N
                       --layers SPEC --out DIR --seed S
                       [--runtime synthetic|sd] [--weights PATH]
  attn-exporter verify DUMP_DIR

LIST is comma-separated word indices (e.g. 4,5); SPEC is comma-separated
layer ids with optional grid side (e.g. sa.mid.0=16,sa.up.1=32).`;

function makeRuntime(kind: string, seed: number, weights?: string): DiffusionRuntime {
  if (kind === "synthetic") return new SyntheticRuntime({ seed });
  if (kind === "sd" || kind === "stable-diffusion") {
    return new StableDiffusionRuntime({ weightsPath: weights });
  }
  throw new PlanError(`unknown runtime ${JSON.stringify(kind)}`);
}

function cmdExport(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      frames: { type: "string" },
      prompt: { type: "string" },
      "word-idx": { type: "string" },
      steps: { type: "string" },
      layers: { type: "string", default: "sa.mid.0=16" },
      out: { type: "string" },
      seed: { type: "string", default: "0" },
      runtime: { type: "string", default: "synthetic" },
      weights: { type: "string" },
    },
  });
  for (const required of ["frames", "prompt", "word-idx", "steps", "out"] as const) {
    if (!values[required]) throw new PlanError(`--${required} is required`);
  }
  const plan: ExportPlan = {
    framePaths: listFrames(values.frames!),
    prompt: values.prompt!,
    wordIndices: values["word-idx"]!
      .split(",")
      .filter(Boolean)
      .map((s) => {
        const n = Number(s);
        if (!Number.isInteger(n) || n < 0) throw new PlanError(`bad word index ${s}`);
        return n;
      }),
    steps: Number(values.steps),
    layers: parseLayers(values.layers!),
    outDir: values.out!,
    seed: Number(values.seed),
  };
  const runtime = makeRuntime(values.runtime!, plan.seed, values.weights);
  const records = exportRun(plan, runtime);
  console.log(
    `exported ${records.length} records ` +
      `(${plan.framePaths.length} frames x ${plan.steps} steps x ${plan.layers.length} layers x 3) ` +
      `to ${plan.outDir}`,
  );
  return 0;
}

function cmdVerify(argv: string[]): number {
  if (argv.length !== 1) throw new PlanError("verify takes exactly one dump directory");
  const report = verifyManifest(argv[0]);
  for (const issue of report.issues) console.error(`FAIL ${issue.message}`);
  console.log(`checked ${report.checked} records, ${report.issues.length} problem(s)`);
  return report.issues.length === 0 ? 0 : 1;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "export") return cmdExport(rest);
    if (command === "verify") return cmdVerify(rest);
    console.error(USAGE);
    return 2;
  } catch (err) {
    if (err instanceof Error && err.message.startsWith("Unknown option")) {
      console.error(USAGE);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

process.exitCode = main(process.argv.slice(2));
