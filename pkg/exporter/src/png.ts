/**
 * Minimal PNG codec on top of node:zlib.
 *
 * Supports 8-bit depth with grayscale (color type 0), RGB (2), and RGBA (6),
 * no interlacing. Scanline filters 0..4 are implemented in both directions.
 * That covers every frame this package writes and the common output of
 * standard encoders at these color types.
 */

import { deflateSync, inflateSync } from "node:zlib";

export interface Image {
  width: number;
  height: number;
  /** 1 = grayscale, 3 = RGB, 4 = RGBA; row-major, no padding. */
  channels: 1 | 3 | 4;
  data: Uint8Array;
}

const SIGNATURE = Uint8Array.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(...parts: Uint8Array[]): number {
  let c = 0xffffffff;
  for (const part of parts) {
    for (let i = 0; i < part.length; i++) {
      c = (CRC_TABLE[(c ^ part[i]!) & 0xff]! ^ (c >>> 8)) >>> 0;
    }
  }
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, data: Uint8Array): Buffer {
  const head = Buffer.alloc(8);
  head.writeUInt32BE(data.length, 0);
  head.write(type, 4, "latin1");
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(head.subarray(4), data), 0);
  return Buffer.concat([head, data, crc]);
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

function colorType(channels: number): number {
  switch (channels) {
    case 1:
      return 0;
    case 3:
      return 2;
    case 4:
      return 6;
    default:
      throw new Error(`unsupported channel count ${channels}`);
  }
}

function channelsOf(colorTypeByte: number): 1 | 3 | 4 {
  switch (colorTypeByte) {
    case 0:
      return 1;
    case 2:
      return 3;
    case 6:
      return 4;
    default:
      throw new Error(`unsupported PNG color type ${colorTypeByte}`);
  }
}

/**
 * Encode an image. `filterType` selects the scanline filter applied to every
 * row (0 none, 1 sub, 2 up, 3 average, 4 paeth); the pixel content is
 * identical in all cases.
 */
export function encodePng(image: Image, filterType = 0): Buffer {
  const { width, height, channels, data } = image;
  if (width < 1 || height < 1) throw new Error("image must be at least 1x1");
  if (data.length !== width * height * channels) {
    throw new Error(`pixel buffer has ${data.length} bytes, expected ${width * height * channels}`);
  }
  if (filterType < 0 || filterType > 4) throw new Error(`bad filter type ${filterType}`);

  const bpp = channels;
  const stride = width * channels;
  const filtered = Buffer.alloc((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    filtered[y * (stride + 1)] = filterType;
    const rowOut = filtered.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    for (let x = 0; x < stride; x++) {
      const raw = data[y * stride + x]!;
      const a = x >= bpp ? data[y * stride + x - bpp]! : 0;
      const b = y > 0 ? data[(y - 1) * stride + x]! : 0;
      const c = x >= bpp && y > 0 ? data[(y - 1) * stride + x - bpp]! : 0;
      let value: number;
      switch (filterType) {
        case 1:
          value = raw - a;
          break;
        case 2:
          value = raw - b;
          break;
        case 3:
          value = raw - ((a + b) >> 1);
          break;
        case 4:
          value = raw - paeth(a, b, c);
          break;
        default:
          value = raw;
      }
      rowOut[x] = value & 0xff;
    }
  }

  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = colorType(channels);
  ihdr[10] = 0; // compression
  ihdr[11] = 0; // filter method
  ihdr[12] = 0; // no interlace

  return Buffer.concat([
    SIGNATURE,
    chunk("IHDR", ihdr),
    chunk("IDAT", deflateSync(filtered)),
    chunk("IEND", new Uint8Array(0)),
  ]);
}

export function decodePng(bytes: Uint8Array): Image {
  if (bytes.length < SIGNATURE.length || !SIGNATURE.every((v, i) => bytes[i] === v)) {
    throw new Error("not a PNG file (bad signature)");
  }
  const buf = Buffer.from(bytes.buffer, bytes.byteOffset, bytes.byteLength);

  let width = 0;
  let height = 0;
  let channels: 1 | 3 | 4 = 1;
  let sawHeader = false;
  const idat: Buffer[] = [];
  let offset = SIGNATURE.length;
  let sawEnd = false;

  while (offset < buf.length) {
    if (offset + 8 > buf.length) throw new Error("truncated PNG chunk header");
    const length = buf.readUInt32BE(offset);
    const type = buf.toString("latin1", offset + 4, offset + 8);
    const dataStart = offset + 8;
    const dataEnd = dataStart + length;
    if (dataEnd + 4 > buf.length) throw new Error(`truncated PNG chunk ${type}`);
    const data = buf.subarray(dataStart, dataEnd);
    const declaredCrc = buf.readUInt32BE(dataEnd);
    if (crc32(buf.subarray(offset + 4, offset + 8), data) !== declaredCrc) {
      throw new Error(`bad CRC in PNG chunk ${type}`);
    }

    if (type === "IHDR") {
      width = data.readUInt32BE(0);
      height = data.readUInt32BE(4);
      const bitDepth = data[8]!;
      if (bitDepth !== 8) throw new Error(`unsupported PNG bit depth ${bitDepth}`);
      channels = channelsOf(data[9]!);
      if (data[12] !== 0) throw new Error("interlaced PNG not supported");
      sawHeader = true;
    } else if (type === "IDAT") {
      idat.push(data);
    } else if (type === "IEND") {
      sawEnd = true;
      break;
    }
    // ancillary chunks (tEXt, pHYs, ...) are skipped
    offset = dataEnd + 4;
  }

  if (!sawHeader) throw new Error("PNG has no IHDR chunk");
  if (!sawEnd) throw new Error("PNG has no IEND chunk");
  if (idat.length === 0) throw new Error("PNG has no image data");

  const raw = inflateSync(Buffer.concat(idat));
  const bpp = channels;
  const stride = width * channels;
  if (raw.length !== (stride + 1) * height) {
    throw new Error(`PNG data is ${raw.length} bytes, expected ${(stride + 1) * height}`);
  }

  const out = new Uint8Array(stride * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)]!;
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    for (let x = 0; x < stride; x++) {
      const a = x >= bpp ? out[y * stride + x - bpp]! : 0;
      const b = y > 0 ? out[(y - 1) * stride + x]! : 0;
      const c = x >= bpp && y > 0 ? out[(y - 1) * stride + x - bpp]! : 0;
      let value: number;
      switch (filter) {
        case 0:
          value = row[x]!;
          break;
        case 1:
          value = row[x]! + a;
          break;
        case 2:
          value = row[x]! + b;
          break;
        case 3:
          value = row[x]! + ((a + b) >> 1);
          break;
        case 4:
          value = row[x]! + paeth(a, b, c);
          break;
        default:
          throw new Error(`bad PNG filter byte ${filter} on row ${y}`);
      }
      out[y * stride + x] = value & 0xff;
    }
  }

  return { width, height, channels, data: out };
}

/** Integer-arithmetic luma conversion; grayscale input is copied through. */
export function toGrayscale(image: Image): Image {
  if (image.channels === 1) {
    return { ...image, data: image.data.slice() };
  }
  const { width, height, channels, data } = image;
  const out = new Uint8Array(width * height);
  for (let i = 0; i < width * height; i++) {
    const r = data[i * channels]!;
    const g = data[i * channels + 1]!;
    const b = data[i * channels + 2]!;
    out[i] = Math.round((299 * r + 587 * g + 114 * b) / 1000);
  }
  return { width, height, channels: 1, data: out };
}
