/**
 * Lightweight image-header parsing: enough to recover pixel dimensions
 * from PNG and JPEG payloads without decoding pixel data.
 */

export interface ImageMeta {
  width: number;
  height: number;
  format: "png" | "jpeg";
}

const PNG_SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

export function parseImageMeta(data: Buffer): ImageMeta | null {
  if (data.length >= 24 && data.subarray(0, 8).equals(PNG_SIGNATURE)) {
    // IHDR is always the first chunk: width/height at byte offsets 16/20.
    return {
      width: data.readUInt32BE(16),
      height: data.readUInt32BE(20),
      format: "png",
    };
  }
  if (data.length >= 4 && data[0] === 0xff && data[1] === 0xd8) {
    return parseJpegMeta(data);
  }
  return null;
}

function parseJpegMeta(data: Buffer): ImageMeta | null {
  let offset = 2;
  while (offset + 9 < data.length) {
    if (data[offset] !== 0xff) {
      offset += 1;
      continue;
    }
    const marker = data[offset + 1];
    // SOF0..SOF15 carry frame dimensions (excluding DHT/DAC/RST markers).
    const isSof =
      marker >= 0xc0 && marker <= 0xcf && ![0xc4, 0xc8, 0xcc].includes(marker);
    if (isSof) {
      return {
        height: data.readUInt16BE(offset + 5),
        width: data.readUInt16BE(offset + 7),
        format: "jpeg",
      };
    }
    const length = data.readUInt16BE(offset + 2);
    if (length < 2) return null;
    offset += 2 + length;
  }
  return null;
}
