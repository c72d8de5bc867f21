use super::markers::*;
use super::tables::UNZIGZAG;
use super::{canonical_codes, idct, JpegBlob};
use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Clone)]
struct HuffDecoder {
    /// Per code length: (first code, last code + 1, index of first symbol).
    ranges: [(u32, u32, usize); 17],
    symbols: Vec<u8>,
}

impl HuffDecoder {
    fn new(bits: &[u8; 16], vals: Vec<u8>) -> Self {
        let codes = canonical_codes(bits);
        let mut ranges = [(0u32, 0u32, 0usize); 17];
        let mut idx = 0;
        for len in 1..=16u8 {
            let n = bits[len as usize - 1] as usize;
            if n > 0 {
                let first = codes[idx].0 as u32;
                ranges[len as usize] = (first, first + n as u32, idx);
            }
            idx += n;
        }
        HuffDecoder { ranges, symbols: vals }
    }
}

#[derive(Clone, Copy)]
struct Component {
    id: u8,
    h: usize,
    v: usize,
    tq: usize,
    td: usize,
    ta: usize,
}

struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u32,
    nbits: u32,
    /// Set when a marker interrupts the entropy-coded segment.
    hit_marker: bool,
}

impl<'a> BitReader<'a> {
    fn new(data: &'a [u8], pos: usize) -> Self {
        BitReader { data, pos, acc: 0, nbits: 0, hit_marker: false }
    }

    fn fill(&mut self) -> Result<()> {
        if self.hit_marker {
            return Err(Error::decode(self.pos, "entropy data interrupted by marker"));
        }
        let b = *self
            .data
            .get(self.pos)
            .ok_or_else(|| Error::decode(self.pos, "truncated entropy-coded data"))?;
        if b == 0xFF {
            match self.data.get(self.pos + 1) {
                Some(0x00) => self.pos += 2,
                Some(_) => {
                    self.hit_marker = true;
                    return Err(Error::decode(self.pos, "entropy data interrupted by marker"));
                }
                None => return Err(Error::decode(self.pos, "truncated entropy-coded data")),
            }
        } else {
            self.pos += 1;
        }
        self.acc = (self.acc << 8) | b as u32;
        self.nbits += 8;
        Ok(())
    }

    fn bit(&mut self) -> Result<u32> {
        if self.nbits == 0 {
            self.fill()?;
        }
        self.nbits -= 1;
        Ok((self.acc >> self.nbits) & 1)
    }

    fn bits(&mut self, n: u8) -> Result<u32> {
        let mut v = 0;
        for _ in 0..n {
            v = (v << 1) | self.bit()?;
        }
        Ok(v)
    }

    fn decode(&mut self, t: &HuffDecoder) -> Result<u8> {
        let mut code = 0u32;
        for len in 1..=16 {
            code = (code << 1) | self.bit()?;
            let (first, end, idx) = t.ranges[len];
            if code >= first && code < end {
                return t
                    .symbols
                    .get(idx + (code - first) as usize)
                    .copied()
                    .ok_or_else(|| Error::decode(self.pos, "huffman symbol out of range"));
            }
        }
        Err(Error::decode(self.pos, "invalid huffman code"))
    }

    /// Drops buffered bits and consumes an expected RSTn marker.
    fn restart(&mut self) -> Result<()> {
        self.acc = 0;
        self.nbits = 0;
        self.hit_marker = false;
        match (self.data.get(self.pos), self.data.get(self.pos + 1)) {
            (Some(0xFF), Some(m)) if (0xD0..=0xD7).contains(m) => {
                self.pos += 2;
                Ok(())
            }
            _ => Err(Error::decode(self.pos, "expected restart marker")),
        }
    }
}

fn extend(v: u32, size: u8) -> i32 {
    if size == 0 {
        0
    } else if v < (1 << (size - 1)) {
        v as i32 - (1 << size) + 1
    } else {
        v as i32
    }
}

fn read_u16(data: &[u8], pos: usize) -> Result<usize> {
    match (data.get(pos), data.get(pos + 1)) {
        (Some(&a), Some(&b)) => Ok(((a as usize) << 8) | b as usize),
        _ => Err(Error::decode(pos, "truncated segment")),
    }
}

struct Frame {
    width: usize,
    height: usize,
    comps: Vec<Component>,
}

/// Decodes a baseline JFIF stream into an image cropped to the frame size.
pub fn jpeg_decompress(blob: &JpegBlob) -> Result<Image> {
    let data = blob.as_bytes();
    if data.len() < 2 || data[0] != 0xFF || data[1] != SOI {
        return Err(Error::decode(0, "missing SOI marker"));
    }
    let mut pos = 2;
    let mut qtables: [Option<[u16; 64]>; 4] = [None; 4];
    let mut dc_tables: [Option<HuffDecoder>; 4] = Default::default();
    let mut ac_tables: [Option<HuffDecoder>; 4] = Default::default();
    let mut frame: Option<Frame> = None;
    let mut restart_interval = 0usize;
    let mut planes: Option<Vec<Vec<f64>>> = None;

    loop {
        // Skip fill bytes before a marker.
        while data.get(pos) == Some(&0xFF) && data.get(pos + 1) == Some(&0xFF) {
            pos += 1;
        }
        if data.get(pos) != Some(&0xFF) {
            return Err(Error::decode(pos, "expected marker"));
        }
        let marker = *data
            .get(pos + 1)
            .ok_or_else(|| Error::decode(pos, "truncated marker"))?;
        let marker_pos = pos;
        pos += 2;
        match marker {
            EOI => break,
            SOF0 | SOF1 | DHT | DQT | DRI | SOS | COM | 0xE0..=0xEF => {}
            0xC2 | 0xC3 | 0xC5..=0xC7 | 0xC9..=0xCB | 0xCD..=0xCF => {
                return Err(Error::decode(marker_pos, format!("non-baseline frame type 0x{marker:02X}")));
            }
            _ => {
                return Err(Error::decode(marker_pos, format!("unknown marker 0x{marker:02X}")));
            }
        }
        let len = read_u16(data, pos)?;
        if len < 2 || pos + len > data.len() {
            return Err(Error::decode(pos, "segment length exceeds stream"));
        }
        let seg = &data[pos + 2..pos + len];
        let seg_start = pos + 2;
        pos += len;
        match marker {
            DQT => {
                let mut i = 0;
                while i < seg.len() {
                    let pq = seg[i] >> 4;
                    let tq = (seg[i] & 0x0F) as usize;
                    if tq > 3 {
                        return Err(Error::decode(seg_start + i, "bad quantization table id"));
                    }
                    i += 1;
                    let mut t = [0u16; 64];
                    for &nat in UNZIGZAG.iter() {
                        t[nat] = if pq == 0 {
                            let v = *seg.get(i).ok_or_else(|| Error::decode(seg_start + i, "truncated DQT"))?;
                            i += 1;
                            v as u16
                        } else {
                            let v = read_u16(seg, i).map_err(|_| Error::decode(seg_start + i, "truncated DQT"))?;
                            i += 2;
                            v as u16
                        };
                    }
                    qtables[tq] = Some(t);
                }
            }
            DHT => {
                let mut i = 0;
                while i < seg.len() {
                    let tc = seg[i] >> 4;
                    let th = (seg[i] & 0x0F) as usize;
                    if tc > 1 || th > 3 || i + 17 > seg.len() {
                        return Err(Error::decode(seg_start + i, "bad huffman table header"));
                    }
                    let mut bits = [0u8; 16];
                    bits.copy_from_slice(&seg[i + 1..i + 17]);
                    let n: usize = bits.iter().map(|&b| b as usize).sum();
                    i += 17;
                    if i + n > seg.len() {
                        return Err(Error::decode(seg_start + i, "truncated DHT"));
                    }
                    let t = HuffDecoder::new(&bits, seg[i..i + n].to_vec());
                    i += n;
                    if tc == 0 {
                        dc_tables[th] = Some(t);
                    } else {
                        ac_tables[th] = Some(t);
                    }
                }
            }
            DRI => {
                restart_interval = read_u16(seg, 0).map_err(|_| Error::decode(seg_start, "truncated DRI"))?;
            }
            SOF0 | SOF1 => {
                if seg.len() < 6 || seg[0] != 8 {
                    return Err(Error::decode(seg_start, "only 8-bit precision frames are supported"));
                }
                let height = read_u16(seg, 1)?;
                let width = read_u16(seg, 3)?;
                let nc = seg[5] as usize;
                if width == 0 || height == 0 || (nc != 1 && nc != 3) || seg.len() < 6 + 3 * nc {
                    return Err(Error::decode(seg_start, "unsupported frame header"));
                }
                let mut comps = Vec::with_capacity(nc);
                for k in 0..nc {
                    let b = &seg[6 + 3 * k..9 + 3 * k];
                    let (h, v) = ((b[1] >> 4) as usize, (b[1] & 0x0F) as usize);
                    if !(1..=2).contains(&h) || !(1..=2).contains(&v) || b[2] > 3 {
                        return Err(Error::decode(seg_start + 6 + 3 * k, "unsupported sampling factors"));
                    }
                    comps.push(Component { id: b[0], h, v, tq: b[2] as usize, td: 0, ta: 0 });
                }
                frame = Some(Frame { width, height, comps });
            }
            SOS => {
                let f = frame
                    .as_mut()
                    .ok_or_else(|| Error::decode(marker_pos, "SOS before SOF"))?;
                let ns = *seg.first().ok_or_else(|| Error::decode(seg_start, "empty SOS"))? as usize;
                if ns != f.comps.len() || seg.len() < 1 + 2 * ns + 3 {
                    return Err(Error::decode(seg_start, "only single interleaved scans are supported"));
                }
                for k in 0..ns {
                    let id = seg[1 + 2 * k];
                    let tables = seg[2 + 2 * k];
                    let c = f
                        .comps
                        .iter_mut()
                        .find(|c| c.id == id)
                        .ok_or_else(|| Error::decode(seg_start + 1 + 2 * k, "scan references unknown component"))?;
                    c.td = (tables >> 4) as usize;
                    c.ta = (tables & 0x0F) as usize;
                    if c.td > 3 || c.ta > 3 {
                        return Err(Error::decode(seg_start + 2 + 2 * k, "bad table selector"));
                    }
                }
                let (ss, se, a) = (seg[1 + 2 * ns], seg[2 + 2 * ns], seg[3 + 2 * ns]);
                if ss != 0 || se != 63 || a != 0 {
                    return Err(Error::decode(seg_start, "non-baseline scan parameters"));
                }
                let (p, end) = decode_scan(data, pos, f, &qtables, &dc_tables, &ac_tables, restart_interval)?;
                planes = Some(p);
                pos = end;
            }
            _ => {}
        }
    }

    let f = frame.ok_or_else(|| Error::decode(pos, "no frame header"))?;
    let planes = planes.ok_or_else(|| Error::decode(pos, "no scan"))?;
    assemble(&f, &planes)
}

#[allow(clippy::type_complexity)]
fn decode_scan(
    data: &[u8],
    start: usize,
    f: &Frame,
    qtables: &[Option<[u16; 64]>; 4],
    dc_tables: &[Option<HuffDecoder>; 4],
    ac_tables: &[Option<HuffDecoder>; 4],
    restart_interval: usize,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let hmax = f.comps.iter().map(|c| c.h).max().unwrap_or(1);
    let vmax = f.comps.iter().map(|c| c.v).max().unwrap_or(1);
    let single = f.comps.len() == 1;
    // A single-component scan is non-interleaved: one block per MCU.
    let (mcux, mcuy) = if single {
        (f.width.div_ceil(8), f.height.div_ceil(8))
    } else {
        (f.width.div_ceil(8 * hmax), f.height.div_ceil(8 * vmax))
    };

    let mut planes = Vec::with_capacity(f.comps.len());
    let mut strides = Vec::with_capacity(f.comps.len());
    for c in &f.comps {
        let (bw, bh) = if single { (mcux, mcuy) } else { (mcux * c.h, mcuy * c.v) };
        strides.push(bw * 8);
        planes.push(vec![0.0; bw * 8 * bh * 8]);
        if qtables[c.tq].is_none() {
            return Err(Error::decode(start, "missing quantization table"));
        }
        if dc_tables[c.td].is_none() || ac_tables[c.ta].is_none() {
            return Err(Error::decode(start, "missing huffman table"));
        }
    }

    let mut rd = BitReader::new(data, start);
    let mut preds = vec![0i32; f.comps.len()];
    let total = mcux * mcuy;
    for m in 0..total {
        if restart_interval > 0 && m > 0 && m % restart_interval == 0 {
            rd.restart()?;
            preds.iter_mut().for_each(|p| *p = 0);
        }
        let (mx, my) = (m % mcux, m / mcux);
        for (ci, c) in f.comps.iter().enumerate() {
            let (nh, nv) = if single { (1, 1) } else { (c.h, c.v) };
            let q = qtables[c.tq].as_ref().expect("checked");
            let dc = dc_tables[c.td].as_ref().expect("checked");
            let ac = ac_tables[c.ta].as_ref().expect("checked");
            for by in 0..nv {
                for bx in 0..nh {
                    let mut coef = [0.0; 64];
                    let size = rd.decode(dc)?;
                    if size > 11 {
                        return Err(Error::decode(rd.pos, "bad DC magnitude category"));
                    }
                    let diff = extend(rd.bits(size)?, size);
                    preds[ci] += diff;
                    coef[0] = (preds[ci] * q[0] as i32) as f64;
                    let mut k = 1;
                    while k < 64 {
                        let rs = rd.decode(ac)?;
                        let (run, size) = ((rs >> 4) as usize, rs & 0x0F);
                        if size == 0 {
                            if run == 15 {
                                k += 16;
                                continue;
                            }
                            break;
                        }
                        k += run;
                        if k > 63 {
                            return Err(Error::decode(rd.pos, "AC run past end of block"));
                        }
                        let nat = UNZIGZAG[k];
                        coef[nat] = (extend(rd.bits(size)?, size) * q[nat] as i32) as f64;
                        k += 1;
                    }
                    let px = idct(&coef);
                    let ox = (mx * nh + bx) * 8;
                    let oy = (my * nv + by) * 8;
                    let stride = strides[ci];
                    for y in 0..8 {
                        for x in 0..8 {
                            planes[ci][(oy + y) * stride + ox + x] = px[y * 8 + x] + 128.0;
                        }
                    }
                }
            }
        }
    }
    // Skip to the marker that ends the entropy-coded segment.
    let mut end = rd.pos;
    while end + 1 < data.len() && !(data[end] == 0xFF && data[end + 1] != 0x00) {
        end += 1;
    }
    if end + 1 >= data.len() {
        return Err(Error::decode(end, "missing EOI after scan"));
    }
    let mut out = Vec::with_capacity(planes.len());
    for (ci, c) in f.comps.iter().enumerate() {
        let (sx, sy) = if single { (1, 1) } else { (hmax / c.h, vmax / c.v) };
        out.push(upsample(&planes[ci], strides[ci], f.width, f.height, sx, sy));
    }
    Ok((out, end))
}

/// Taps and weights of centered linear interpolation from a grid subsampled
/// by `factor` back to `len` samples.
fn linear_taps(len: usize, factor: usize) -> Vec<(usize, usize, f64)> {
    let last = len.div_ceil(factor) - 1;
    (0..len)
        .map(|x| {
            let s = ((x as f64 + 0.5) / factor as f64 - 0.5).clamp(0.0, last as f64);
            let i0 = s.floor() as usize;
            (i0, (i0 + 1).min(last), s - i0 as f64)
        })
        .collect()
}

/// Full-resolution plane from a (possibly subsampled) component plane.
fn upsample(plane: &[f64], stride: usize, width: usize, height: usize, sx: usize, sy: usize) -> Vec<f64> {
    if sx == 1 && sy == 1 {
        return (0..height).flat_map(|y| plane[y * stride..y * stride + width].iter().copied()).collect();
    }
    let (tx, ty) = (linear_taps(width, sx), linear_taps(height, sy));
    let mut full = Vec::with_capacity(width * height);
    for &(y0, y1, fy) in &ty {
        for &(x0, x1, fx) in &tx {
            let at = |y: usize, x: usize| plane[y * stride + x];
            let top = (1.0 - fx) * at(y0, x0) + fx * at(y0, x1);
            let bottom = (1.0 - fx) * at(y1, x0) + fx * at(y1, x1);
            full.push((1.0 - fy) * top + fy * bottom);
        }
    }
    full
}

fn to_unit(v: f64) -> f64 {
    v.round().clamp(0.0, 255.0) / 255.0
}

fn assemble(f: &Frame, planes: &[Vec<f64>]) -> Result<Image> {
    let n = f.width * f.height;
    if planes.len() == 1 {
        let data = planes[0].iter().map(|&v| to_unit(v)).collect();
        return Image::from_vec(f.height, f.width, 1, data);
    }
    let mut data = Vec::with_capacity(n * 3);
    for k in 0..n {
        let y = planes[0][k];
        let cb = planes[1][k] - 128.0;
        let cr = planes[2][k] - 128.0;
        data.push(to_unit(y + 1.402 * cr));
        data.push(to_unit(y - 0.344136 * cb - 0.714136 * cr));
        data.push(to_unit(y + 1.772 * cb));
    }
    Image::from_vec(f.height, f.width, 3, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jpeg::jpeg_compress;

    #[test]
    fn extend_sign() {
        assert_eq!(extend(0, 1), -1);
        assert_eq!(extend(1, 1), 1);
        assert_eq!(extend(2, 3), -5);
        assert_eq!(extend(5, 3), 5);
    }

    #[test]
    fn flat_gray_roundtrip() {
        let im = Image::filled(16, 16, 3, 0.5);
        let out = jpeg_decompress(&jpeg_compress(&im, 90).unwrap()).unwrap();
        for (a, b) in im.data().iter().zip(out.data()) {
            assert!((a - b).abs() <= 2.0 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn odd_sizes_crop() {
        for (h, w, c) in [(1, 1, 1), (9, 17, 3), (23, 5, 1), (8, 8, 3)] {
            let im = Image::from_fn(h, w, c, |i, j, k| ((i * 5 + j * 3 + k) % 9) as f64 / 8.0);
            let out = jpeg_decompress(&jpeg_compress(&im, 75).unwrap()).unwrap();
            assert_eq!(out.dims(), (h, w, c));
        }
    }

    #[test]
    fn errors_carry_positions() {
        let im = Image::filled(8, 8, 1, 0.3);
        let blob = jpeg_compress(&im, 50).unwrap();
        let bytes = blob.as_bytes();

        assert!(matches!(
            jpeg_decompress(&JpegBlob::from_bytes(vec![0, 1, 2])),
            Err(Error::Decode { pos: 0, .. })
        ));

        let truncated = JpegBlob::from_bytes(bytes[..bytes.len() - 4].to_vec());
        assert!(matches!(jpeg_decompress(&truncated), Err(Error::Decode { .. })));

        // Rewrite SOF0 as progressive SOF2.
        let mut prog = bytes.to_vec();
        let sof = prog.windows(2).position(|w| w == [0xFF, SOF0]).unwrap();
        prog[sof + 1] = 0xC2;
        match jpeg_decompress(&JpegBlob::from_bytes(prog)) {
            Err(Error::Decode { pos, reason }) => {
                assert_eq!(pos, sof);
                assert!(reason.contains("non-baseline"));
            }
            other => panic!("{other:?}"),
        }

        let mut unknown = bytes.to_vec();
        let app = unknown.windows(2).position(|w| w == [0xFF, APP0]).unwrap();
        unknown[app + 1] = 0x02;
        assert!(matches!(
            jpeg_decompress(&JpegBlob::from_bytes(unknown)),
            Err(Error::Decode { pos, .. }) if pos == app
        ));
    }
}
