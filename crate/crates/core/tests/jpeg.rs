mod common;

use common::corpus;
use gfr::jpeg::{jpeg_compress, jpeg_decompress, jpeg_roundtrip, JpegBlob};
use gfr::metrics::psnr;
use gfr::ppm::quantize_u8;
use gfr::Image;
use image::ImageFormat;

fn quantized(img: &Image) -> Image {
    let (h, w, c) = img.dims();
    Image::from_fn(h, w, c, |i, j, k| quantize_u8(img.get(i, j, k)) as f64 / 255.0)
}

fn reference_decode(bytes: &[u8]) -> Image {
    let dec = image::load_from_memory_with_format(bytes, ImageFormat::Jpeg).expect("reference decoder accepts the stream");
    let rgb = dec.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
    Image::from_vec(h as usize, w as usize, 3, data).unwrap()
}

#[test]
fn high_quality_roundtrip_is_faithful() {
    for (i, img) in corpus().iter().enumerate() {
        let out = jpeg_roundtrip(img, 90).unwrap();
        assert_eq!(out.dims(), img.dims());
        let p = psnr(&out, img).unwrap();
        assert!(p >= 30.0, "image {i}: {p:.2} dB");
    }
}

#[test]
fn quality_is_monotone() {
    for (i, img) in corpus().iter().enumerate() {
        let mut last = 0.0;
        for q in [10, 20, 30, 40, 90] {
            let p = psnr(&jpeg_roundtrip(img, q).unwrap(), img).unwrap();
            assert!(p >= last, "image {i}: q={q} gives {p:.3} < {last:.3}");
            last = p;
        }
    }
}

#[test]
fn streams_decode_with_an_independent_decoder() {
    for img in corpus() {
        for q in [10, 50, 90] {
            let blob = jpeg_compress(&img, q).unwrap();
            let ours = jpeg_decompress(&blob).unwrap();
            let theirs = reference_decode(blob.as_bytes());
            assert_eq!(ours.dims(), theirs.dims());
            // Decoders may differ in IDCT rounding and chroma upsampling.
            assert!(psnr(&ours, &theirs).unwrap() > 30.0);
            assert!(psnr(&theirs, &img).unwrap() > psnr(&jpeg_roundtrip(&img, 10).unwrap(), &img).unwrap() - 1.0);
        }
    }
}

#[test]
fn decoder_reads_reference_encoder_output() {
    for img in corpus().into_iter().take(4) {
        let (h, w, _) = img.dims();
        let raw: Vec<u8> = img.data().iter().map(|&v| quantize_u8(v)).collect();
        let mut bytes = Vec::new();
        let mut enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut bytes, 85);
        enc.encode(&raw, w as u32, h as u32, image::ExtendedColorType::Rgb8).unwrap();
        let ours = jpeg_decompress(&JpegBlob::from_bytes(bytes.clone())).unwrap();
        let theirs = reference_decode(&bytes);
        assert!(psnr(&ours, &theirs).unwrap() > 30.0);
    }
}

#[test]
fn grayscale_streams_roundtrip() {
    let img = corpus()[0].clone();
    let (h, w, _) = img.dims();
    let gray = Image::from_fn(h, w, 1, |i, j, _| img.get(i, j, 1));
    let out = jpeg_roundtrip(&gray, 90).unwrap();
    assert_eq!(out.dims(), (h, w, 1));
    assert!(psnr(&out, &gray).unwrap() > 30.0);
}

#[test]
fn quality_zero_bypasses_compression() {
    for img in corpus() {
        assert_eq!(jpeg_roundtrip(&img, 0).unwrap(), img);
    }
    assert!(jpeg_compress(&corpus()[0], 0).is_err());
}

#[test]
fn encoding_is_deterministic_and_smaller_at_low_quality() {
    let img = quantized(&corpus()[3]);
    let a = jpeg_compress(&img, 40).unwrap();
    assert_eq!(a, jpeg_compress(&img, 40).unwrap());
    assert!(jpeg_compress(&img, 10).unwrap().len() < jpeg_compress(&img, 90).unwrap().len());
}

#[test]
fn corrupt_streams_are_rejected() {
    let blob = jpeg_compress(&corpus()[0], 50).unwrap();
    let bytes = blob.as_bytes();
    assert!(jpeg_decompress(&JpegBlob::from_bytes(bytes[..bytes.len() / 3].to_vec())).is_err());
    assert!(jpeg_decompress(&JpegBlob::from_bytes(vec![0, 1, 2, 3])).is_err());
}
