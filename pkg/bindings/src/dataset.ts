/**
 * Read-only access to the .bin/.idx token dataset pair.
 *
 * idx layout (little-endian): magic "PVK1", version u32, dtype code u8
 * (1 = u16, 2 = u32), doc_count u64, (doc_count + 1) u64 offsets,
 * vocab_size u64. bin is the concatenated token payload.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { FormatError } from "./errors.js";

const MAGIC = "PVK1";
const FORMAT_VERSION = 1;
const HEADER_SIZE = 4 + 4 + 1 + 8;

const ITEM_SIZE: Record<number, number> = { 1: 2, 2: 4 };

function resolveBase(p: string): string {
  const ext = path.extname(p);
  return ext === ".bin" || ext === ".idx" ? p.slice(0, -ext.length) : p;
}

function toSafeNumber(v: bigint, what: string): number {
  if (v > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new FormatError(`${what} ${v} exceeds the safe integer range`);
  }
  return Number(v);
}

export class BoundDataset {
  readonly docCount: number;
  readonly totalTokens: number;
  readonly vocabSize: number;
  readonly dtypeCode: number;
  private readonly offsets: number[];
  private readonly fd: number;
  private readonly itemSize: number;

  private constructor(
    fd: number,
    offsets: number[],
    dtypeCode: number,
    vocabSize: number,
  ) {
    this.fd = fd;
    this.offsets = offsets;
    this.dtypeCode = dtypeCode;
    this.vocabSize = vocabSize;
    this.itemSize = ITEM_SIZE[dtypeCode];
    this.docCount = offsets.length - 1;
    this.totalTokens = offsets[offsets.length - 1];
  }

  static open(p: string): BoundDataset {
    const base = resolveBase(p);
    const idxPath = `${base}.idx`;
    const binPath = `${base}.bin`;
    if (!fs.existsSync(idxPath) || !fs.existsSync(binPath)) {
      throw new FormatError(`dataset files not found at ${base}.bin/.idx`);
    }
    const raw = fs.readFileSync(idxPath);
    if (raw.length < HEADER_SIZE) {
      throw new FormatError(`${idxPath}: truncated header`);
    }
    const magic = raw.toString("latin1", 0, 4);
    if (magic !== MAGIC) {
      throw new FormatError(`${idxPath}: bad magic ${JSON.stringify(magic)}`);
    }
    const version = raw.readUInt32LE(4);
    if (version !== FORMAT_VERSION) {
      throw new FormatError(`${idxPath}: unsupported format version ${version}`);
    }
    const dtypeCode = raw.readUInt8(8);
    if (!(dtypeCode in ITEM_SIZE)) {
      throw new FormatError(`${idxPath}: unknown dtype code ${dtypeCode}`);
    }
    const docCount = toSafeNumber(raw.readBigUInt64LE(9), "doc_count");
    const expected = HEADER_SIZE + 8 * (docCount + 1) + 8;
    if (raw.length !== expected) {
      throw new FormatError(
        `${idxPath}: expected ${expected} bytes for ${docCount} docs, got ${raw.length}`,
      );
    }
    const offsets = new Array<number>(docCount + 1);
    for (let i = 0; i <= docCount; i++) {
      offsets[i] = toSafeNumber(raw.readBigUInt64LE(HEADER_SIZE + 8 * i), "offset");
      if (i > 0 && offsets[i] < offsets[i - 1]) {
        throw new FormatError(`${idxPath}: offsets not monotone non-decreasing`);
      }
    }
    if (offsets[0] !== 0) {
      throw new FormatError(`${idxPath}: first offset must be 0`);
    }
    const vocabSize = toSafeNumber(
      raw.readBigUInt64LE(HEADER_SIZE + 8 * (docCount + 1)),
      "vocab_size",
    );
    const itemSize = ITEM_SIZE[dtypeCode];
    const binSize = fs.statSync(binPath).size;
    if (binSize % itemSize !== 0) {
      throw new FormatError(`${binPath}: size is not a whole number of tokens`);
    }
    if (offsets[docCount] !== binSize / itemSize) {
      throw new FormatError(
        `${binPath}: index declares ${offsets[docCount]} tokens, payload has ${binSize / itemSize}`,
      );
    }
    const fd = fs.openSync(binPath, "r");
    return new BoundDataset(fd, offsets, dtypeCode, vocabSize);
  }

  /** Tokens of document `index`, read on demand. */
  document(index: number): number[] {
    if (index < 0 || index >= this.docCount) {
      throw new RangeError(`document index ${index} out of range [0, ${this.docCount})`);
    }
    return this.readRange(this.offsets[index], this.offsets[index + 1]);
  }

  token(i: number): number {
    if (i < 0 || i >= this.totalTokens) {
      throw new RangeError(`token index ${i} out of range [0, ${this.totalTokens})`);
    }
    return this.readRange(i, i + 1)[0];
  }

  close(): void {
    fs.closeSync(this.fd);
  }

  private readRange(start: number, stop: number): number[] {
    const n = stop - start;
    const buf = Buffer.alloc(n * this.itemSize);
    fs.readSync(this.fd, buf, 0, buf.length, start * this.itemSize);
    const out = new Array<number>(n);
    for (let i = 0; i < n; i++) {
      out[i] =
        this.itemSize === 2 ? buf.readUInt16LE(i * 2) : buf.readUInt32LE(i * 4);
    }
    return out;
  }
}

export function open(p: string): BoundDataset {
  return BoundDataset.open(p);
}
