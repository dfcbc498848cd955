/**
 * Bit-exact tensor file writer/reader shared with the framebank engine.
 *
 * Layout (little-endian throughout): magic "EYIT", u16 version (1),
 * u8 dtype code (1 = float32), u8 rank, rank x u64 dims, then the
 * row-major float32 payload.
 */

import { randomBytes } from "node:crypto";
import * as fs from "node:fs";
import * as path from "node:path";

export const TENSOR_MAGIC = "EYIT";
export const TENSOR_VERSION = 1;
export const DTYPE_FLOAT32 = 1;

export interface Tensor {
  dims: number[];
  values: Float32Array;
}

export class TensorFormatError extends Error {}

function countOf(dims: number[]): number {
  return dims.reduce((a, b) => a * b, 1);
}

export function encodeTensor(dims: number[], values: Float32Array): Buffer {
  if (countOf(dims) !== values.length) {
    throw new TensorFormatError(
      `dims ${JSON.stringify(dims)} do not match ${values.length} values`,
    );
  }
  for (const v of values) {
    if (!Number.isFinite(v)) throw new TensorFormatError("refusing to write non-finite values");
  }
  const header = Buffer.alloc(8 + 8 * dims.length);
  header.write(TENSOR_MAGIC, 0, "ascii");
  header.writeUInt16LE(TENSOR_VERSION, 4);
  header.writeUInt8(DTYPE_FLOAT32, 6);
  header.writeUInt8(dims.length, 7);
  dims.forEach((d, i) => header.writeBigUInt64LE(BigInt(d), 8 + 8 * i));
  const payload = Buffer.alloc(values.length * 4);
  for (let i = 0; i < values.length; i++) payload.writeFloatLE(values[i], i * 4);
  return Buffer.concat([header, payload]);
}

/** Atomic write: the file appears under its final name only when complete. */
export function writeTensor(filePath: string, dims: number[], values: Float32Array): void {
  const tmp = path.join(
    path.dirname(filePath),
    `.${path.basename(filePath)}.${randomBytes(6).toString("hex")}.tmp`,
  );
  fs.writeFileSync(tmp, encodeTensor(dims, values));
  fs.renameSync(tmp, filePath);
}

export function readTensor(filePath: string): Tensor {
  const data = fs.readFileSync(filePath);
  if (data.length < 8) throw new TensorFormatError(`${filePath}: header truncated`);
  if (data.toString("ascii", 0, 4) !== TENSOR_MAGIC) {
    throw new TensorFormatError(`${filePath}: bad magic ${JSON.stringify(data.toString("ascii", 0, 4))}`);
  }
  const version = data.readUInt16LE(4);
  if (version !== TENSOR_VERSION) {
    throw new TensorFormatError(`${filePath}: unsupported version ${version}`);
  }
  const dtype = data.readUInt8(6);
  if (dtype !== DTYPE_FLOAT32) {
    throw new TensorFormatError(`${filePath}: unsupported dtype code ${dtype}`);
  }
  const rank = data.readUInt8(7);
  const dimsEnd = 8 + 8 * rank;
  if (data.length < dimsEnd) throw new TensorFormatError(`${filePath}: dims truncated`);
  const dims: number[] = [];
  for (let i = 0; i < rank; i++) {
    const d = data.readBigUInt64LE(8 + 8 * i);
    if (d > BigInt(Number.MAX_SAFE_INTEGER)) {
      throw new TensorFormatError(`${filePath}: dim overflow`);
    }
    dims.push(Number(d));
  }
  const count = countOf(dims);
  if (count * 4 !== data.length - dimsEnd) {
    throw new TensorFormatError(
      `${filePath}: payload has ${data.length - dimsEnd} bytes, expected ${count * 4}`,
    );
  }
  const values = new Float32Array(count);
  for (let i = 0; i < count; i++) values[i] = data.readFloatLE(dimsEnd + i * 4);
  return { dims, values };
}
