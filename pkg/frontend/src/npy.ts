/**
 * Minimal NPY v1.0 reader/writer for little-endian float32 C-order tensors.
 *
 * Parsing never copies the payload: the returned Float32Array is a view
 * into the source buffer at the data offset, so grid tensors read from
 * disk can be handed to consumers without duplicating memory.
 */

const MAGIC = Buffer.from('\x93NUMPY', 'latin1');

export interface NdArray {
  /** Tensor dimensions, outermost first. */
  shape: number[];
  /** Flat C-order payload; a view, not a copy, when parsed from a buffer. */
  data: Float32Array;
}

export function elementCount(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

/** Parse an NPY v1.0 buffer into a zero-copy float32 view. */
export function parseNpy(buffer: Buffer): NdArray {
  if (buffer.length < 10 || !buffer.subarray(0, 6).equals(MAGIC)) {
    throw new Error('not an NPY buffer (bad magic)');
  }
  const major = buffer[6];
  const minor = buffer[7];
  if (major !== 1 || minor !== 0) {
    throw new Error(`unsupported NPY version ${major}.${minor}, need 1.0`);
  }
  const headerLen = buffer.readUInt16LE(8);
  const dataOffset = 10 + headerLen;
  if (buffer.length < dataOffset) {
    throw new Error('truncated NPY header');
  }
  const header = buffer.subarray(10, dataOffset).toString('latin1');

  const descr = header.match(/'descr'\s*:\s*'([^']+)'/);
  if (!descr || descr[1] !== '<f4') {
    throw new Error(`unsupported dtype ${descr ? descr[1] : '?'}, need little-endian float32`);
  }
  const fortran = header.match(/'fortran_order'\s*:\s*(True|False)/);
  if (!fortran || fortran[1] !== 'False') {
    throw new Error('Fortran-order layout is not supported');
  }
  const shapeMatch = header.match(/'shape'\s*:\s*\(([^)]*)\)/);
  if (!shapeMatch) {
    throw new Error('NPY header is missing the shape');
  }
  const shape = shapeMatch[1]
    .split(',')
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => {
      const n = Number(s);
      if (!Number.isInteger(n) || n < 0) throw new Error(`bad shape entry ${s}`);
      return n;
    });

  const count = elementCount(shape);
  if (buffer.length < dataOffset + 4 * count) {
    throw new Error(`truncated NPY payload: need ${count} float32 values`);
  }
  const byteOffset = buffer.byteOffset + dataOffset;
  if (byteOffset % 4 !== 0) {
    // misaligned source buffer; realign with a single copy rather than fail
    const copy = Buffer.from(buffer.subarray(dataOffset, dataOffset + 4 * count));
    return { shape, data: new Float32Array(copy.buffer, copy.byteOffset, count) };
  }
  return { shape, data: new Float32Array(buffer.buffer, byteOffset, count) };
}

/** Serialize a float32 tensor as NPY v1.0 (C order, little endian). */
export function serializeNpy(array: NdArray): Buffer {
  const count = elementCount(array.shape);
  if (array.data.length !== count) {
    throw new Error(`shape ${JSON.stringify(array.shape)} wants ${count} values, got ${array.data.length}`);
  }
  const shapeText =
    array.shape.length === 1 ? `(${array.shape[0]},)` : `(${array.shape.join(', ')})`;
  let header = `{'descr': '<f4', 'fortran_order': False, 'shape': ${shapeText}, }`;
  // pad so the payload starts on a 64-byte boundary, newline-terminated
  const unpadded = 10 + header.length + 1;
  header = header + ' '.repeat((64 - (unpadded % 64)) % 64) + '\n';

  const head = Buffer.alloc(10 + header.length);
  MAGIC.copy(head, 0);
  head[6] = 1;
  head[7] = 0;
  head.writeUInt16LE(header.length, 8);
  head.write(header, 10, 'latin1');

  const payload = Buffer.from(array.data.buffer, array.data.byteOffset, 4 * count);
  return Buffer.concat([head, payload]);
}
