import { describe, expect, it } from "vitest";
import { rleDecode, rleEncode } from "../src/rle.js";

describe("run-length masks", () => {
  it("round-trips random bit strings", () => {
    let seed = 12345;
    const rand = () => (seed = (seed * 1103515245 + 12345) % 2 ** 31) / 2 ** 31;
    for (let t = 0; t < 50; t++) {
      const n = 1 + Math.floor(rand() * 300);
      const bits = new Uint8Array(n);
      for (let i = 0; i < n; i++) bits[i] = rand() < 0.5 ? 0 : 1;
      const back = rleDecode(rleEncode(bits), n);
      expect(back).toEqual(bits);
    }
  });

  it("starts with the zero run", () => {
    expect(rleEncode(new Uint8Array([1, 1, 0]))).toEqual([0, 2, 1]);
    expect(rleEncode(new Uint8Array([0, 0, 1]))).toEqual([2, 1]);
  });

  it("rejects coverage mismatches", () => {
    expect(() => rleDecode([2, 1], 5)).toThrow(/expected 5/);
  });

  it("handles empty masks", () => {
    expect(rleEncode(new Uint8Array(0))).toEqual([]);
    expect(rleDecode([], 0)).toEqual(new Uint8Array(0));
  });
});
