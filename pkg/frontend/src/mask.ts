/** Mask rendering helpers (browser only). */

import { rleDecode } from "./rle.js";
import type { MaskResponse } from "./api.js";

export function maskBits(mask: MaskResponse): Uint8Array {
  return rleDecode(mask.mask_rle, mask.width * mask.height);
}

/** Paint the mask into an RGBA buffer (green, configurable opacity);
 * pixel-for-pixel, no resampling. */
export function maskToImageData(mask: MaskResponse, opacity: number): ImageData {
  const bits = maskBits(mask);
  const data = new Uint8ClampedArray(mask.width * mask.height * 4);
  const alpha = Math.round(255 * Math.min(1, Math.max(0, opacity)));
  for (let i = 0; i < bits.length; i++) {
    if (bits[i]) {
      data[i * 4 + 1] = 255;
      data[i * 4 + 3] = alpha;
    }
  }
  return new ImageData(data, mask.width, mask.height);
}

/** Black/white PNG of the mask at the exact image dimensions. */
export async function maskToPngBlob(mask: MaskResponse): Promise<Blob> {
  const bits = maskBits(mask);
  const canvas = document.createElement("canvas");
  canvas.width = mask.width;
  canvas.height = mask.height;
  const ctx = canvas.getContext("2d")!;
  const data = ctx.createImageData(mask.width, mask.height);
  for (let i = 0; i < bits.length; i++) {
    const v = bits[i] ? 255 : 0;
    data.data[i * 4] = v;
    data.data[i * 4 + 1] = v;
    data.data[i * 4 + 2] = v;
    data.data[i * 4 + 3] = 255;
  }
  ctx.putImageData(data, 0, 0);
  return new Promise((resolve, reject) =>
    canvas.toBlob((b) => (b ? resolve(b) : reject(new Error("toBlob failed"))), "image/png"),
  );
}
