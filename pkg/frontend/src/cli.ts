/** Process plumbing: temp workspaces and `nseg` invocations. */

import { execFile } from "node:child_process";
import { mkdtemp, rm } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** Binary to drive; override with the NSEG_BIN environment variable. */
export function nsegBinary(): string {
  return process.env.NSEG_BIN ?? "nseg";
}

export interface CliResult {
  stdout: string;
  stderr: string;
}

export function runNseg(args: string[]): Promise<CliResult> {
  return new Promise((resolve, reject) => {
    execFile(nsegBinary(), args, { maxBuffer: 64 * 1024 * 1024 }, (error, stdout, stderr) => {
      if (error) {
        reject(new Error(`nseg ${args[0]} failed: ${stderr.trim() || error.message}`));
      } else {
        resolve({ stdout, stderr });
      }
    });
  });
}

export async function withTempDir<T>(fn: (dir: string) => Promise<T>): Promise<T> {
  const dir = await mkdtemp(join(tmpdir(), "nseg-"));
  try {
    return await fn(dir);
  } finally {
    await rm(dir, { recursive: true, force: true });
  }
}
