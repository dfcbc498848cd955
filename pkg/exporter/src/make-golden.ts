/**
 * Writes the checked-in golden tensor the engine's acceptance suite
 * loads to prove cross-language bit-exactness. Values are chosen to be
 * exactly representable in float32.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { writeTensor } from "./tensorfile.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const goldenDir = path.resolve(here, "..", "golden");
fs.mkdirSync(goldenDir, { recursive: true });

const values = new Float32Array([0.0, 0.5, 1.0, -1.5, 2.25, -3.5, 4096.5, -0.125]);
const target = path.join(goldenDir, "feature.eyit");
writeTensor(target, [2, 4], values);
console.log(`wrote ${target}`);
