/** Readers for memorization-scan outputs written by the primary component. */

import * as fs from "node:fs";

import { FormatError } from "./errors.js";

export interface ScanRecord {
  ordinal: number;
  matched: number;
  memorized: boolean;
}

/** Parse a `scan_records.csv` file (header: ordinal,matched,memorized). */
export function loadScan(path: string): ScanRecord[] {
  const lines = fs.readFileSync(path, "utf8").trim().split("\n");
  if (lines[0] !== "ordinal,matched,memorized") {
    throw new FormatError(`${path}: not a scan record CSV`);
  }
  return lines.slice(1).map((line) => {
    const [o, m, z] = line.split(",");
    return {
      ordinal: Number.parseInt(o, 10),
      matched: Number.parseInt(m, 10),
      memorized: z === "1",
    };
  });
}

/** Parse a `scan_summary.json` file as written by `provkit scan-mem`. */
export function loadScanSummary(path: string): Record<string, unknown> {
  return JSON.parse(fs.readFileSync(path, "utf8"));
}
