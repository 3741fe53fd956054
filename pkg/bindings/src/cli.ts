/**
 * Subprocess bridge to the primary provkit CLI. Every value returned here is
 * produced by the primary component and parsed verbatim from its outputs;
 * no dataloader logic lives on this side.
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { CliError } from "./errors.js";

/** Mirrors the primary plan JSON plus the dataset the plan runs over. */
export interface BoundPlan {
  data: string;
  seed: number;
  batchSize: number;
  seqLen: number;
  trainIters: number;
  eodToken?: number | null;
}

function provkitCommand(): string[] {
  const override = process.env.PROVKIT_BIN;
  if (override) return override.split(" ");
  return ["python3", "-m", "provkit.cli"];
}

export function runCli(args: string[]): string {
  const [cmd, ...prefix] = provkitCommand();
  const res = spawnSync(cmd, [...prefix, ...args], {
    encoding: "utf8",
    maxBuffer: 1 << 28,
  });
  if (res.error) throw res.error;
  if (res.status !== 0) {
    throw new CliError(
      (res.stderr || `provkit exited with code ${res.status}`).trim(),
      res.status ?? -1,
    );
  }
  return res.stdout;
}

function planArgs(plan: BoundPlan): string[] {
  const args = [
    "--data", plan.data,
    "--seed", String(plan.seed),
    "--batch-size", String(plan.batchSize),
    "--seq-len", String(plan.seqLen),
    "--train-iters", String(plan.trainIters),
  ];
  if (plan.eodToken !== undefined && plan.eodToken !== null) {
    args.push("--eod-token", String(plan.eodToken));
  }
  return args;
}

/** Checkpoint steps for a training-iteration count, via `provkit schedule`. */
export function schedule(trainIters: number, interval = 1000): number[] {
  const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "pvk-"));
  try {
    const out = runCli([
      "schedule",
      "--train-iters", String(trainIters),
      "--interval", String(interval),
      "--out-dir", tmp,
    ]);
    return out
      .trim()
      .split("\n")
      .map((line) => Number.parseInt(line, 10));
  } finally {
    fs.rmSync(tmp, { recursive: true, force: true });
  }
}

/** The batch served at a training step, via `provkit reconstruct`. */
export function batchAt(plan: BoundPlan, step: number): number[][] {
  const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "pvk-"));
  try {
    runCli([
      "reconstruct",
      ...planArgs(plan),
      "--step", String(step),
      "--count", "1",
      "--out-dir", tmp,
    ]);
    const csv = fs.readFileSync(path.join(tmp, `batch_${step}.csv`), "utf8");
    return parseBatchCsv(csv);
  } finally {
    fs.rmSync(tmp, { recursive: true, force: true });
  }
}

/** Rows of a `batch_<step>.csv` dump, in slot order. */
export function parseBatchCsv(csv: string): number[][] {
  const lines = csv.trim().split("\n");
  if (lines[0] !== "step,slot,context_id,tokens") {
    throw new CliError(`unexpected batch CSV header: ${lines[0]}`, -1);
  }
  return lines.slice(1).map((line) => {
    const tokens = line.split(",")[3];
    return tokens.split(" ").map((t) => Number.parseInt(t, 10));
  });
}
