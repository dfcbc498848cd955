/**
 * Post-export validation: every manifest row's file must exist, parse as
 * a tensor, and agree with the declared spatial shape.
 */

import * as path from "node:path";

import { ManifestRecord, readManifest } from "./manifest.js";
import { readTensor } from "./tensorfile.js";

export interface VerifyIssue {
  record: ManifestRecord | null;
  message: string;
}

export interface VerifyReport {
  checked: number;
  issues: VerifyIssue[];
}

export function verifyManifest(dumpDir: string): VerifyReport {
  const manifestPath = path.join(dumpDir, "manifest.tsv");
  let records: ManifestRecord[];
  try {
    records = readManifest(manifestPath);
  } catch (err) {
    return { checked: 0, issues: [{ record: null, message: (err as Error).message }] };
  }
  const issues: VerifyIssue[] = [];
  for (const record of records) {
    const where = `frame=${record.frameIndex} step=${record.stepIndex} layer=${record.layerId} kind=${record.kind}`;
    try {
      const tensor = readTensor(path.join(dumpDir, record.path));
      const [h, w] = record.spatialShape;
      const spatial = record.kind === "spatial_features" || record.kind === "cross_q";
      if (spatial) {
        if (tensor.dims.length !== 2 || tensor.dims[0] !== h * w) {
          issues.push({
            record,
            message: `${where}: dims ${JSON.stringify(tensor.dims)} do not match spatial shape ${h}x${w}`,
          });
        }
      } else if (tensor.dims.length !== 2) {
        issues.push({ record, message: `${where}: expected a 2-D tensor` });
      }
    } catch (err) {
      issues.push({ record, message: `${where}: ${(err as Error).message}` });
    }
  }
  return { checked: records.length, issues };
}
