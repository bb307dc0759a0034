/** (channel, x, y, z) rows <-> the CSV wire format the CLI speaks. */

export type PointRow = [number, number, number, number];

export function pointsToCsv(points: ArrayLike<ArrayLike<number>>): string {
  const lines: string[] = [];
  for (let i = 0; i < points.length; i++) {
    const row = points[i];
    if (row.length !== 4) {
      throw new Error(`point ${i} must be (channel, x, y, z), got ${row.length} fields`);
    }
    const channel = row[0];
    if (!Number.isInteger(channel) || channel < 0) {
      throw new Error(`point ${i}: channel must be a nonnegative integer, got ${channel}`);
    }
    for (let c = 1; c < 4; c++) {
      if (!Number.isFinite(row[c])) {
        throw new Error(`point ${i}: coordinate ${c - 1} is not finite`);
      }
    }
    lines.push(`${channel},${row[1]},${row[2]},${row[3]}`);
  }
  return lines.length ? lines.join('\n') + '\n' : '';
}

export function csvToPoints(text: string): PointRow[] {
  const rows: PointRow[] = [];
  for (const line of text.split(/\r?\n/)) {
    if (!line.trim()) continue;
    const fields = line.split(',').map((f) => Number(f));
    if (fields.length !== 4 || fields.some((v) => !Number.isFinite(v))) {
      throw new Error(`malformed CSV row: ${line}`);
    }
    rows.push(fields as PointRow);
  }
  return rows;
}
