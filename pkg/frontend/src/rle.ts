/** Run-length masks as served by the backend: alternating run lengths
 * of zeros and ones, row-major, starting with the zero run (possibly
 * of length 0). */

export function rleDecode(runs: number[], size: number): Uint8Array {
  const out = new Uint8Array(size);
  let pos = 0;
  let val = 0;
  for (const r of runs) {
    if (r < 0 || !Number.isInteger(r)) {
      throw new Error(`bad run length ${r}`);
    }
    if (val === 1) {
      out.fill(1, pos, pos + r);
    }
    pos += r;
    val = 1 - val;
  }
  if (pos !== size) {
    throw new Error(`run lengths cover ${pos} pixels, expected ${size}`);
  }
  return out;
}

export function rleEncode(bits: Uint8Array): number[] {
  if (bits.length === 0) return [];
  const runs: number[] = [];
  let val = 0;
  let count = 0;
  for (const b of bits) {
    const bit = b ? 1 : 0;
    if (bit === val) {
      count += 1;
    } else {
      runs.push(count);
      val = bit;
      count = 1;
    }
  }
  runs.push(count);
  return runs;
}
