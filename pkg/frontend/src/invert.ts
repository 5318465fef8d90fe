// Colour inversion of an 8-bit RGB(A) raster. Inverting twice restores
// the original image exactly.

export interface Raster {
  width: number;
  height: number;
  /** RGBA bytes, row-major, 4 per pixel (alpha is left untouched). */
  pixels: Uint8ClampedArray;
}

export function invertPixels(raster: Raster): Raster {
  const out = new Uint8ClampedArray(raster.pixels.length);
  for (let i = 0; i < raster.pixels.length; i += 4) {
    out[i] = 255 - raster.pixels[i];
    out[i + 1] = 255 - raster.pixels[i + 1];
    out[i + 2] = 255 - raster.pixels[i + 2];
    out[i + 3] = raster.pixels[i + 3];
  }
  return { width: raster.width, height: raster.height, pixels: out };
}
