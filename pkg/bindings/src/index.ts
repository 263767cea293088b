// Node bindings for the tempdet core. Each call shells out to the tempdet
// CLI in structured mode and parses the JSON; the CLI prints floats in
// shortest round-trip form, so every number arrives bit-identical to the
// core's own float64.
import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

// mirrors the core's usage/input failures (CLI exit code 2)
export class InputError extends Error {}
// mirrors the core's numeric failures (CLI exit code 1)
export class NumericError extends Error {}

export interface BoundHandle {
  cliPath: string;
  version: string;
}

export type Variant = "unit" | "sqrt_m" | "plain" | "csg" | "cn" | "csgcn";

export interface EstimateRequest {
  m: number;
  cn?: number;
  csg?: number;
  variant: Variant;
  coeffsFile?: string;
}

export interface CsgConfig {
  k?: number;
  samplesPerClass?: number;
  seed?: number;
  laplacian?: "unnormalized" | "symmetric-normalized";
}

export interface CsgResult {
  csg: number;
  similarity: number[][];
  eigenvalues: number[];
}

export interface FitOptions {
  variant: "plain" | "csg" | "cn" | "csgcn";
  seed?: number;
  mode?: "global" | "cross-validated";
  aggregate?: "mean" | "median";
}

export interface FitResult {
  variant: string;
  alpha: number;
  beta: number;
  gamma: number;
  delta: number;
  clipLo: number;
  clipHi: number;
  objective: number;
  diagnostics: Record<string, unknown>;
}

export function loadCore(cliPath = "tempdet"): BoundHandle {
  const res = spawnSync(cliPath, ["--version"], { encoding: "utf8" });
  if (res.error) {
    throw new InputError(`cannot run ${cliPath}: ${res.error.message}`);
  }
  if (res.status !== 0) {
    throw new InputError(`${cliPath} --version failed: ${res.stderr.trim()}`);
  }
  const version = res.stdout.trim().split(/\s+/).pop() ?? "";
  return { cliPath, version };
}

function run(handle: BoundHandle, args: string[]): string {
  const res = spawnSync(handle.cliPath, args, {
    encoding: "utf8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (res.error) {
    throw new InputError(`cannot run ${handle.cliPath}: ${res.error.message}`);
  }
  if (res.status === 0) {
    return res.stdout;
  }
  const message = res.stderr.trim().replace(/^error:\s*/, "");
  if (res.status === 2) {
    throw new InputError(message);
  }
  if (res.status === 1) {
    throw new NumericError(message);
  }
  throw new Error(message || `${handle.cliPath} exited with ${res.status}`);
}

export function estimateTemperature(
  handle: BoundHandle,
  req: EstimateRequest,
): number {
  const args = [
    "estimate",
    "--m", String(req.m),
    "--variant", req.variant,
    "--format", "structured",
  ];
  if (req.cn !== undefined) args.push("--cn", String(req.cn));
  if (req.csg !== undefined) args.push("--csg", String(req.csg));
  if (req.coeffsFile !== undefined) args.push("--coeffs-file", req.coeffsFile);
  const doc = JSON.parse(run(handle, args));
  return doc.temperature as number;
}

// Labeled features in the core's binary container: magic, u32 version,
// u32 flags, u64 count, u64 dimension, then i64 labels and row-major f64
// features, all little-endian.
function packContainer(features: number[][], labels: number[]): Buffer {
  const n = features.length;
  const d = n > 0 ? features[0].length : 0;
  const buf = Buffer.alloc(32 + 8 * n + 8 * n * d);
  buf.write("TDLFSET1", 0, "ascii");
  buf.writeUInt32LE(1, 8);
  buf.writeUInt32LE(0, 12);
  buf.writeBigUInt64LE(BigInt(n), 16);
  buf.writeBigUInt64LE(BigInt(d), 24);
  let off = 32;
  for (const label of labels) {
    buf.writeBigInt64LE(BigInt(label), off);
    off += 8;
  }
  for (const row of features) {
    for (const v of row) {
      buf.writeDoubleLE(v, off);
      off += 8;
    }
  }
  return buf;
}

export function computeCsg(
  handle: BoundHandle,
  features: number[][],
  labels: number[],
  config: CsgConfig = {},
): CsgResult {
  const n = features.length;
  if (labels.length !== n) {
    throw new InputError(
      `labels length ${labels.length} does not match ${n} feature rows`,
    );
  }
  const d = n > 0 ? features[0].length : 0;
  for (const row of features) {
    if (row.length !== d) {
      throw new InputError("feature rows have unequal lengths");
    }
  }
  for (const label of labels) {
    if (!Number.isInteger(label)) {
      throw new InputError(`labels must be integers, got ${label}`);
    }
  }
  const dir = mkdtempSync(join(tmpdir(), "tempdet-"));
  try {
    const file = join(dir, "points.tds");
    writeFileSync(file, packContainer(features, labels));
    const args = [
      "csg",
      "--input", file,
      "--format", "structured",
      "--threads", "1",
    ];
    if (config.k !== undefined) args.push("--k", String(config.k));
    if (config.samplesPerClass !== undefined) {
      args.push("--samples-per-class", String(config.samplesPerClass));
    }
    if (config.seed !== undefined) args.push("--seed", String(config.seed));
    if (config.laplacian !== undefined) {
      args.push("--laplacian", config.laplacian);
    }
    const doc = JSON.parse(run(handle, args));
    return {
      csg: doc.csg as number,
      similarity: doc.similarity as number[][],
      eigenvalues: doc.eigenvalues as number[],
    };
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

export function fit(
  handle: BoundHandle,
  gridText: string,
  options: FitOptions,
): FitResult {
  const dir = mkdtempSync(join(tmpdir(), "tempdet-"));
  try {
    const gridFile = join(dir, "grid.txt");
    const outFile = join(dir, "coeffs.json");
    writeFileSync(gridFile, gridText);
    const args = [
      "fit",
      "--grid", gridFile,
      "--variant", options.variant,
      "--out", outFile,
      "--format", "structured",
    ];
    if (options.seed !== undefined) args.push("--seed", String(options.seed));
    if (options.mode !== undefined) args.push("--mode", options.mode);
    if (options.aggregate !== undefined) {
      args.push("--aggregate", options.aggregate);
    }
    const doc = JSON.parse(run(handle, args));
    return {
      variant: doc.variant as string,
      alpha: doc.alpha as number,
      beta: doc.beta as number,
      gamma: doc.gamma as number,
      delta: doc.delta as number,
      clipLo: doc.clip_lo as number,
      clipHi: doc.clip_hi as number,
      objective: doc.objective as number,
      diagnostics: doc.diagnostics as Record<string, unknown>,
    };
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
