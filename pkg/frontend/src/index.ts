/**
 * High-level bindings: typed point clouds to Gaussian-density voxel grids
 * and back, backed by the voxgrid CLI and its file formats.
 *
 * Grids come back as `{shape, data}` where `data` is a zero-copy
 * Float32Array view over the NPY payload read from disk, ready to feed
 * tensor libraries without another copy.
 */

import { mkdtempSync, readFileSync, rmSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { runCli, runCliAsync } from './cli.js';
import { csvToPoints, pointsToCsv, type PointRow } from './csv.js';
import { parseNpy, serializeNpy, type NdArray } from './npy.js';

export { parseNpy, serializeNpy, elementCount, type NdArray } from './npy.js';
export { pointsToCsv, csvToPoints, type PointRow } from './csv.js';
export { cliCommand } from './cli.js';

export interface GridOptions {
  /** Box extent along x. */
  width: number;
  /** Box extent along y. */
  height: number;
  /** Box extent along z. */
  depth: number;
  num_channels: number;
  /** Voxels per axis, cubic when a single number. */
  grid_size: number | [number, number, number];
  /** Gaussian width (standard deviation) of each particle. */
  variance: number;
}

export interface ReverseOptions {
  variance: number;
  width?: number;
  height?: number;
  depth?: number;
  learning_rate?: number;
  tolerance?: number;
  max_iters?: number;
  persistence_threshold?: number;
}

function gridSizeFlag(size: GridOptions['grid_size']): string {
  if (typeof size === 'number') return String(size);
  return size.join(',');
}

function inTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), 'voxgrid-'));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

function gridArgs(csvPath: string, npyPath: string, opts: GridOptions): string[] {
  return [
    'grid',
    '--input', csvPath,
    '--grid-size', gridSizeFlag(opts.grid_size),
    '--variance', String(opts.variance),
    '--channels', String(opts.num_channels),
    '--box', `0,0,0,${opts.width},${opts.height},${opts.depth}`,
    '--output', npyPath,
  ];
}

/**
 * Voxelize (channel, x, y, z) points over the box [0,width] x [0,height]
 * x [0,depth]. Returns a (num_channels, H, W, D) grid whose data is a
 * zero-copy view over the bytes produced by the generator.
 */
export function coord_to_grid(
  points: ArrayLike<ArrayLike<number>>,
  opts: GridOptions,
): NdArray {
  return inTempDir((dir) => {
    const csvPath = join(dir, 'points.csv');
    const npyPath = join(dir, 'grid.npy');
    writeFileSync(csvPath, pointsToCsv(points));
    runCli(gridArgs(csvPath, npyPath, opts));
    return parseNpy(readFileSync(npyPath));
  });
}

/** Async batch variant: grids for many molecules, computed concurrently. */
export async function coord_to_grid_batch(
  pointSets: ArrayLike<ArrayLike<number>>[],
  opts: GridOptions,
  concurrency = 4,
): Promise<NdArray[]> {
  const out: NdArray[] = new Array(pointSets.length);
  let next = 0;
  async function worker(dir: string): Promise<void> {
    for (;;) {
      const index = next++;
      if (index >= pointSets.length) return;
      const csvPath = join(dir, `points-${index}.csv`);
      const npyPath = join(dir, `grid-${index}.npy`);
      writeFileSync(csvPath, pointsToCsv(pointSets[index]));
      await runCliAsync(gridArgs(csvPath, npyPath, opts));
      out[index] = parseNpy(readFileSync(npyPath));
    }
  }
  const dir = mkdtempSync(join(tmpdir(), 'voxgrid-batch-'));
  try {
    const workers = Array.from(
      { length: Math.max(1, Math.min(concurrency, pointSets.length)) },
      () => worker(dir),
    );
    await Promise.all(workers);
    return out;
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/**
 * Recover (channel, x, y, z) rows from a (channels, H, W, D) grid. The
 * box defaults to the unit cube used by coord_to_grid's defaults; pass
 * width/height/depth to match how the grid was generated.
 */
export function grid_to_coords(grid: NdArray, opts: ReverseOptions): PointRow[] {
  if (grid.shape.length !== 4) {
    throw new Error(`expected a (channels, H, W, D) grid, got shape ${JSON.stringify(grid.shape)}`);
  }
  return inTempDir((dir) => {
    const npyPath = join(dir, 'grid.npy');
    const csvPath = join(dir, 'coords.csv');
    writeFileSync(npyPath, serializeNpy(grid));
    const args = [
      'reverse',
      '--input', npyPath,
      '--variance', String(opts.variance),
      '--box', `0,0,0,${opts.width ?? 1},${opts.height ?? 1},${opts.depth ?? 1}`,
      '--output', csvPath,
    ];
    if (opts.learning_rate !== undefined) args.push('--learning-rate', String(opts.learning_rate));
    if (opts.tolerance !== undefined) args.push('--tolerance', String(opts.tolerance));
    if (opts.max_iters !== undefined) args.push('--max-iters', String(opts.max_iters));
    if (opts.persistence_threshold !== undefined) {
      args.push('--persistence-threshold', String(opts.persistence_threshold));
    }
    runCli(args);
    return csvToPoints(readFileSync(csvPath, 'utf8'));
  });
}
