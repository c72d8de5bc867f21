use super::markers::*;
use super::tables::*;
use super::{canonical_codes, fdct, quality_to_tables, JpegBlob};
use crate::error::Result;
use crate::image::Image;

struct HuffTable {
    bits: &'static [u8; 16],
    vals: &'static [u8],
    /// (code, length) indexed by symbol.
    lookup: [(u16, u8); 256],
}

impl HuffTable {
    fn new(bits: &'static [u8; 16], vals: &'static [u8]) -> Self {
        let mut lookup = [(0u16, 0u8); 256];
        for (&sym, code) in vals.iter().zip(canonical_codes(bits)) {
            lookup[sym as usize] = code;
        }
        HuffTable { bits, vals, lookup }
    }
}

struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    nbits: u32,
}

impl BitWriter {
    fn new(out: Vec<u8>) -> Self {
        BitWriter { out, acc: 0, nbits: 0 }
    }

    fn put(&mut self, code: u32, len: u8) {
        debug_assert!(len <= 16);
        self.acc = (self.acc << len) | (code & ((1 << len) - 1));
        self.nbits += len as u32;
        while self.nbits >= 8 {
            let byte = (self.acc >> (self.nbits - 8)) as u8;
            self.out.push(byte);
            if byte == 0xFF {
                self.out.push(0x00);
            }
            self.nbits -= 8;
        }
        self.acc &= (1 << self.nbits) - 1;
    }

    fn flush(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            let pad = 8 - self.nbits as u8;
            self.put((1 << pad) - 1, pad);
        }
        self.out
    }
}

/// Magnitude category and the low bits that encode `v`.
fn category(v: i32) -> (u8, u32) {
    let mag = v.unsigned_abs();
    let size = 32 - mag.leading_zeros();
    let bits = if v < 0 { (v - 1) as u32 & ((1 << size) - 1) } else { v as u32 };
    (size as u8, bits)
}

fn write_segment(out: &mut Vec<u8>, marker: u8, payload: &[u8]) {
    out.extend([0xFF, marker]);
    out.extend(((payload.len() + 2) as u16).to_be_bytes());
    out.extend_from_slice(payload);
}

/// Edge-replicated copy of a plane padded to `pw x ph`.
fn pad_plane(plane: &[f64], w: usize, h: usize, pw: usize, ph: usize) -> Vec<f64> {
    let mut out = vec![0.0; pw * ph];
    for y in 0..ph {
        let sy = y.min(h - 1);
        for x in 0..pw {
            out[y * pw + x] = plane[sy * w + x.min(w - 1)];
        }
    }
    out
}

fn downsample_2x2(plane: &[f64], w: usize, h: usize) -> Vec<f64> {
    let (ow, oh) = (w / 2, h / 2);
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let i = 2 * y * w + 2 * x;
            out[y * ow + x] = 0.25 * (plane[i] + plane[i + 1] + plane[i + w] + plane[i + w + 1]);
        }
    }
    out
}

struct ComponentCoder<'a> {
    qtable: &'a [u16; 64],
    dc: &'a HuffTable,
    ac: &'a HuffTable,
    pred: i32,
}

impl ComponentCoder<'_> {
    fn encode_block(&mut self, w: &mut BitWriter, plane: &[f64], stride: usize, bx: usize, by: usize) {
        let mut block = [0.0; 64];
        for y in 0..8 {
            for x in 0..8 {
                block[y * 8 + x] = plane[(by * 8 + y) * stride + bx * 8 + x] - 128.0;
            }
        }
        let coef = fdct(&block);
        let mut zz = [0i32; 64];
        for (k, &nat) in UNZIGZAG.iter().enumerate() {
            zz[k] = (coef[nat] / self.qtable[nat] as f64).round() as i32;
        }

        let diff = zz[0] - self.pred;
        self.pred = zz[0];
        let (size, bits) = category(diff);
        let (code, len) = self.dc.lookup[size as usize];
        w.put(code as u32, len);
        if size > 0 {
            w.put(bits, size);
        }

        let mut run = 0;
        for &v in &zz[1..] {
            if v == 0 {
                run += 1;
                continue;
            }
            while run > 15 {
                let (code, len) = self.ac.lookup[0xF0];
                w.put(code as u32, len);
                run -= 16;
            }
            let (size, bits) = category(v);
            let (code, len) = self.ac.lookup[((run << 4) | size as usize) & 0xFF];
            w.put(code as u32, len);
            w.put(bits, size);
            run = 0;
        }
        if run > 0 {
            let (code, len) = self.ac.lookup[0x00];
            w.put(code as u32, len);
        }
    }
}

/// Encodes `img` as baseline JFIF at quality `q` (1..=100).
pub fn jpeg_compress(img: &Image, q: u32) -> Result<JpegBlob> {
    let qt = quality_to_tables(q)?;
    let (h, w, c) = img.dims();
    let color = c == 3;

    let mut out = vec![0xFF, SOI];
    write_segment(
        &mut out,
        APP0,
        &[b'J', b'F', b'I', b'F', 0, 1, 1, 0, 0, 1, 0, 1, 0, 0],
    );

    let mut dqt = vec![0x00];
    dqt.extend(UNZIGZAG.iter().map(|&n| qt.luma[n] as u8));
    if color {
        dqt.push(0x01);
        dqt.extend(UNZIGZAG.iter().map(|&n| qt.chroma[n] as u8));
    }
    write_segment(&mut out, DQT, &dqt);

    let mut sof = vec![8];
    sof.extend((h as u16).to_be_bytes());
    sof.extend((w as u16).to_be_bytes());
    if color {
        sof.extend([3, 1, 0x22, 0, 2, 0x11, 1, 3, 0x11, 1]);
    } else {
        sof.extend([1, 1, 0x11, 0]);
    }
    write_segment(&mut out, SOF0, &sof);

    let dc_l = HuffTable::new(&STD_LUMA_DC_CODE_LENGTHS, &STD_LUMA_DC_VALUES);
    let ac_l = HuffTable::new(&STD_LUMA_AC_CODE_LENGTHS, &STD_LUMA_AC_VALUES);
    let dc_c = HuffTable::new(&STD_CHROMA_DC_CODE_LENGTHS, &STD_CHROMA_DC_VALUES);
    let ac_c = HuffTable::new(&STD_CHROMA_AC_CODE_LENGTHS, &STD_CHROMA_AC_VALUES);
    let mut dht = Vec::new();
    let mut push_table = |class_id: u8, t: &HuffTable| {
        dht.push(class_id);
        dht.extend_from_slice(t.bits);
        dht.extend_from_slice(t.vals);
    };
    push_table(0x00, &dc_l);
    push_table(0x10, &ac_l);
    if color {
        push_table(0x01, &dc_c);
        push_table(0x11, &ac_c);
    }
    write_segment(&mut out, DHT, &dht);

    if color {
        write_segment(&mut out, SOS, &[3, 1, 0x00, 2, 0x11, 3, 0x11, 0, 63, 0]);
    } else {
        write_segment(&mut out, SOS, &[1, 1, 0x00, 0, 63, 0]);
    }

    let mut bw = BitWriter::new(out);
    let mut luma = ComponentCoder { qtable: &qt.luma, dc: &dc_l, ac: &ac_l, pred: 0 };
    if color {
        let (mut yp, mut cbp, mut crp) = (
            Vec::with_capacity(h * w),
            Vec::with_capacity(h * w),
            Vec::with_capacity(h * w),
        );
        for px in img.data().chunks_exact(3) {
            let (r, g, b) = (px[0] * 255.0, px[1] * 255.0, px[2] * 255.0);
            yp.push(0.299 * r + 0.587 * g + 0.114 * b);
            cbp.push(-0.168736 * r - 0.331264 * g + 0.5 * b + 128.0);
            crp.push(0.5 * r - 0.418688 * g - 0.081312 * b + 128.0);
        }
        let (pw, ph) = (w.div_ceil(16) * 16, h.div_ceil(16) * 16);
        let yp = pad_plane(&yp, w, h, pw, ph);
        let cbp = downsample_2x2(&pad_plane(&cbp, w, h, pw, ph), pw, ph);
        let crp = downsample_2x2(&pad_plane(&crp, w, h, pw, ph), pw, ph);
        let mut cb = ComponentCoder { qtable: &qt.chroma, dc: &dc_c, ac: &ac_c, pred: 0 };
        let mut cr = ComponentCoder { qtable: &qt.chroma, dc: &dc_c, ac: &ac_c, pred: 0 };
        for my in 0..ph / 16 {
            for mx in 0..pw / 16 {
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    luma.encode_block(&mut bw, &yp, pw, 2 * mx + dx, 2 * my + dy);
                }
                cb.encode_block(&mut bw, &cbp, pw / 2, mx, my);
                cr.encode_block(&mut bw, &crp, pw / 2, mx, my);
            }
        }
    } else {
        let yp: Vec<f64> = img.data().iter().map(|v| v * 255.0).collect();
        let (bw_, bh) = (w.div_ceil(8), h.div_ceil(8));
        let yp = pad_plane(&yp, w, h, bw_ * 8, bh * 8);
        for by in 0..bh {
            for bx in 0..bw_ {
                luma.encode_block(&mut bw, &yp, bw_ * 8, bx, by);
            }
        }
    }
    let mut out = bw.flush();
    out.extend([0xFF, EOI]);
    Ok(JpegBlob::from_bytes(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_bits() {
        assert_eq!(category(0), (0, 0));
        assert_eq!(category(1), (1, 1));
        assert_eq!(category(-1), (1, 0));
        assert_eq!(category(5), (3, 5));
        assert_eq!(category(-5), (3, 2));
        assert_eq!(category(-1023), (10, 0));
    }

    #[test]
    fn bitwriter_stuffs_ff() {
        let mut w = BitWriter::new(Vec::new());
        w.put(0xFF, 8);
        w.put(0b1, 1);
        assert_eq!(w.flush(), vec![0xFF, 0x00, 0xFF, 0x00]);
    }

    #[test]
    fn encoder_is_deterministic() {
        let im = Image::from_fn(20, 13, 3, |i, j, c| ((i * 3 + j * 5 + c * 7) % 17) as f64 / 16.0);
        assert_eq!(jpeg_compress(&im, 37).unwrap(), jpeg_compress(&im, 37).unwrap());
    }
}
