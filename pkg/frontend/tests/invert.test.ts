import { describe, expect, it } from 'vitest';

import { invertPixels, Raster } from '../src/invert';

function raster(width: number, height: number, fill: (i: number) => number): Raster {
  const pixels = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = i % 4 === 3 ? 255 : fill(i);
  }
  return { width, height, pixels };
}

describe('invertPixels', () => {
  it('turns black into white', () => {
    const out = invertPixels(raster(2, 2, () => 0));
    for (let i = 0; i < out.pixels.length; i += 4) {
      expect([...out.pixels.slice(i, i + 3)]).toEqual([255, 255, 255]);
      expect(out.pixels[i + 3]).toBe(255);
    }
  });

  it('is an involution on a random raster', () => {
    let seed = 1234567;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) % 2 ** 31;
      return seed % 256;
    };
    const original = raster(7, 5, rand);
    const twice = invertPixels(invertPixels(original));
    expect([...twice.pixels]).toEqual([...original.pixels]);
  });

  it('maps mid-gray 128 to 127', () => {
    const out = invertPixels(raster(1, 1, () => 128));
    expect([...out.pixels.slice(0, 3)]).toEqual([127, 127, 127]);
  });
});
