export { BoundDataset, open } from "./dataset.js";
export { batchAt, parseBatchCsv, runCli, schedule } from "./cli.js";
export type { BoundPlan } from "./cli.js";
export { loadScan, loadScanSummary } from "./scan.js";
export type { ScanRecord } from "./scan.js";
export { CliError, FormatError } from "./errors.js";

export const VERSION = "0.1.0";
