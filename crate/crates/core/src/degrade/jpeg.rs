use alloc::format;
use alloc::vec::Vec;

use jpeg_encoder::{ColorType, Encoder, SamplingFactor};
use zune_core::bytestream::ZCursor;
use zune_core::colorspace::ColorSpace;
use zune_core::options::DecoderOptions;
use zune_jpeg::JpegDecoder;

use crate::error::{Error, Result};
use crate::raster::RasterPatch;

/// Baseline JPEG encode (4:2:0 chroma, Annex K tables scaled by quality)
/// followed by a decode. Channels are quantized to 8 bits on the way in.
pub fn jpeg_roundtrip(patch: &RasterPatch, quality: u8) -> Result<RasterPatch> {
    if !(1..=100).contains(&quality) {
        return Err(Error::param("JPEG quality must lie in [1, 100]"));
    }
    let (w, h) = (patch.width(), patch.height());
    if w > u16::MAX as usize || h > u16::MAX as usize {
        return Err(Error::param("raster too large for JPEG"));
    }
    let rgb = patch.to_rgb8();
    let mut bytes: Vec<u8> = Vec::new();
    let mut enc = Encoder::new(&mut bytes, quality);
    enc.set_sampling_factor(SamplingFactor::R_4_2_0);
    enc.encode(&rgb, w as u16, h as u16, ColorType::Rgb)
        .map_err(|e| Error::Codec(format!("jpeg encode: {e:?}")))?;

    let opts = DecoderOptions::default().jpeg_set_out_colorspace(ColorSpace::RGB);
    let mut dec = JpegDecoder::new_with_options(ZCursor::new(&bytes[..]), opts);
    let decoded = dec.decode().map_err(|e| Error::Codec(format!("jpeg decode: {e:?}")))?;
    let mut out = RasterPatch::from_rgb8(w, h, &decoded)?;
    out.pixel_size_um = patch.pixel_size_um;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psnr(a: &RasterPatch, b: &RasterPatch) -> f64 {
        let mse = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
            / a.data().len() as f64;
        10.0 * (1.0 / mse).log10()
    }

    fn textured(n: usize) -> RasterPatch {
        RasterPatch::from_fn(n, n, |x, y| {
            let (fx, fy) = (x as f64, y as f64);
            [
                0.5 + 0.3 * (fx * 0.31).sin() * (fy * 0.17).cos(),
                0.4 + 0.25 * ((fx + fy) * 0.23).sin(),
                0.6 + 0.2 * (fx * 0.05).cos() + 0.1 * (((x * 7 + y * 13) % 11) as f64 / 11.0 - 0.5),
            ]
        })
    }

    #[test]
    fn constant_patch_survives() {
        let p = RasterPatch::filled(64, 48, [0.8, 0.45, 0.6]);
        let out = jpeg_roundtrip(&p, 75).unwrap();
        for ch in 0..3 {
            let a = p.channel(ch);
            let b = out.channel(ch);
            let mae = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
            assert!(mae <= 0.02, "channel {ch}: {mae}");
        }
    }

    #[test]
    fn higher_quality_has_higher_psnr() {
        let p = textured(96);
        let q90 = psnr(&p, &jpeg_roundtrip(&p, 90).unwrap());
        let q70 = psnr(&p, &jpeg_roundtrip(&p, 70).unwrap());
        assert!(q90 > q70, "{q90} vs {q70}");
    }

    #[test]
    fn dimensions_preserved() {
        let p = textured(64);
        let out = jpeg_roundtrip(&p, 80).unwrap();
        assert_eq!((out.width(), out.height()), (64, 64));
        let odd = RasterPatch::filled(139, 37, [0.3; 3]);
        let out = jpeg_roundtrip(&odd, 80).unwrap();
        assert_eq!((out.width(), out.height()), (139, 37));
    }

    #[test]
    fn quality_bounds() {
        let p = RasterPatch::filled(8, 8, [0.5; 3]);
        assert!(jpeg_roundtrip(&p, 0).is_err());
        assert!(jpeg_roundtrip(&p, 101).is_err());
        assert!(jpeg_roundtrip(&p, 1).is_ok());
        assert!(jpeg_roundtrip(&p, 100).is_ok());
    }
}
