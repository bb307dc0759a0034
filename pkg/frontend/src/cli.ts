/**
 * Process plumbing for the voxgrid command-line tool, which is the only
 * interface this package talks to: points go in as CSV files, grids come
 * back as NPY tensors.
 */

import { spawn, spawnSync } from 'node:child_process';

/** Resolve the CLI command; override with VOXGRID_CLI="python3 -m voxgrid". */
export function cliCommand(): string[] {
  const env = process.env.VOXGRID_CLI;
  if (env && env.trim().length > 0) return env.trim().split(/\s+/);
  return ['voxgrid'];
}

export function runCli(args: string[]): void {
  const [cmd, ...prefix] = cliCommand();
  const result = spawnSync(cmd, [...prefix, ...args], { encoding: 'utf8' });
  if (result.error) {
    throw new Error(`failed to launch ${cmd}: ${result.error.message}`);
  }
  if (result.status !== 0) {
    const detail = (result.stderr || result.stdout || '').trim();
    throw new Error(`voxgrid exited with ${result.status}: ${detail}`);
  }
}

/** Async variant so batch work can overlap across worker processes. */
export function runCliAsync(args: string[]): Promise<void> {
  const [cmd, ...prefix] = cliCommand();
  return new Promise((resolve, reject) => {
    const child = spawn(cmd, [...prefix, ...args], { stdio: ['ignore', 'pipe', 'pipe'] });
    let stderr = '';
    child.stderr.on('data', (chunk) => (stderr += chunk));
    child.on('error', (err) => reject(new Error(`failed to launch ${cmd}: ${err.message}`)));
    child.on('close', (code) => {
      if (code === 0) resolve();
      else reject(new Error(`voxgrid exited with ${code}: ${stderr.trim()}`));
    });
  });
}
