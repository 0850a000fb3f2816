//! PNG raster I/O and the tile-directory image reader.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use oofkit_core::heatmap::TiledImage;
use oofkit_core::raster::reflect_index;
use oofkit_core::RasterPatch;
use serde::{Deserialize, Serialize};

use crate::error::{require_input, Error, Result};

/// Reads an 8-bit RGB(A) PNG; alpha is dropped.
pub fn read_png(path: &Path) -> Result<RasterPatch> {
    require_input(path, "image")?;
    let img = image::open(path).map_err(|source| Error::Image { path: path.into(), source })?.to_rgb8();
    Ok(RasterPatch::from_rgb8(img.width() as usize, img.height() as usize, img.as_raw())?)
}

pub fn write_png(path: &Path, patch: &RasterPatch) -> Result<()> {
    let buf = image::RgbImage::from_raw(patch.width() as u32, patch.height() as u32, patch.to_rgb8())
        .expect("buffer matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png).map_err(|source| Error::Image { path: path.into(), source })
}

/// `descriptor.json` of a tile directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileDescriptor {
    pub width: usize,
    pub height: usize,
    pub tile_size: usize,
}

const TILE_CACHE: usize = 64;

/// Image stored as `{z}/{row}_{col}.png` tiles next to a JSON descriptor.
pub struct TileDirectory {
    root: PathBuf,
    z: String,
    desc: TileDescriptor,
    cache: Mutex<HashMap<(usize, usize), Arc<RasterPatch>>>,
}

impl TileDirectory {
    pub fn open(descriptor: &Path, z: &str) -> Result<Self> {
        require_input(descriptor, "tile descriptor")?;
        let text = std::fs::read_to_string(descriptor).map_err(Error::io(descriptor))?;
        let desc: TileDescriptor = serde_json::from_str(&text).map_err(|e| Error::parse(descriptor, e))?;
        if desc.tile_size == 0 || desc.width == 0 || desc.height == 0 {
            return Err(Error::parse(descriptor, "width, height and tile_size must be positive"));
        }
        let root = descriptor.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(TileDirectory { root, z: z.to_string(), desc, cache: Mutex::new(HashMap::new()) })
    }

    pub fn descriptor(&self) -> TileDescriptor {
        self.desc
    }

    fn tile(&self, row: usize, col: usize) -> Result<Arc<RasterPatch>> {
        if let Some(t) = self.cache.lock().unwrap().get(&(row, col)) {
            return Ok(t.clone());
        }
        let path = self.root.join(&self.z).join(format!("{row}_{col}.png"));
        let t = read_png(&path)?;
        let ts = self.desc.tile_size;
        let (want_w, want_h) = (ts.min(self.desc.width - col * ts), ts.min(self.desc.height - row * ts));
        if t.width() < want_w || t.height() < want_h {
            return Err(Error::parse(&path, format!("tile smaller than {want_w}x{want_h}")));
        }
        let t = Arc::new(t);
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= TILE_CACHE {
            cache.clear();
        }
        cache.insert((row, col), t.clone());
        Ok(t)
    }

    /// Writes `image` as a tile directory with descriptor at `descriptor`.
    pub fn write(image: &RasterPatch, descriptor: &Path, z: &str, tile_size: usize) -> Result<()> {
        if tile_size == 0 {
            return Err(Error::Usage("tile size must be >= 1".into()));
        }
        let root = descriptor.parent().unwrap_or(Path::new("."));
        let dir = root.join(z);
        std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
        let desc = TileDescriptor { width: image.width(), height: image.height(), tile_size };
        for row in 0..image.height().div_ceil(tile_size) {
            for col in 0..image.width().div_ceil(tile_size) {
                let (x0, y0) = (col * tile_size, row * tile_size);
                let tile = image.crop(x0, y0, tile_size.min(image.width() - x0), tile_size.min(image.height() - y0))?;
                write_png(&dir.join(format!("{row}_{col}.png")), &tile)?;
            }
        }
        let text = serde_json::to_string_pretty(&desc).expect("descriptor serializes");
        std::fs::write(descriptor, text).map_err(Error::io(descriptor))
    }
}

impl TiledImage for TileDirectory {
    fn width(&self) -> usize {
        self.desc.width
    }

    fn height(&self) -> usize {
        self.desc.height
    }

    fn read_region(&self, x0: isize, y0: isize, w: usize, h: usize) -> oofkit_core::Result<RasterPatch> {
        let ts = self.desc.tile_size;
        let mut out = RasterPatch::filled(w, h, [0.0; 3]);
        let mut current: Option<((usize, usize), Arc<RasterPatch>)> = None;
        for y in 0..h {
            let sy = reflect_index(y0 + y as isize, self.desc.height);
            for x in 0..w {
                let sx = reflect_index(x0 + x as isize, self.desc.width);
                let key = (sy / ts, sx / ts);
                if current.as_ref().map(|c| c.0) != Some(key) {
                    let t = self.tile(key.0, key.1).map_err(|e| oofkit_core::Error::Codec(e.to_string()))?;
                    current = Some((key, t));
                }
                let t = &current.as_ref().unwrap().1;
                out.set(x, y, t.get(sx % ts, sy % ts));
            }
        }
        Ok(out)
    }
}

/// A whole-slide style input: a PNG or a tile-directory descriptor (`.json`).
pub enum SlideImage {
    Png(RasterPatch),
    Tiles(TileDirectory),
}

impl SlideImage {
    pub fn open(path: &Path, z: &str) -> Result<Self> {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Ok(SlideImage::Tiles(TileDirectory::open(path, z)?))
        } else {
            Ok(SlideImage::Png(read_png(path)?))
        }
    }

    pub fn as_tiled(&self) -> &(dyn TiledImage + Sync) {
        match self {
            SlideImage::Png(p) => p,
            SlideImage::Tiles(t) => t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: usize, h: usize) -> RasterPatch {
        RasterPatch::from_fn(w, h, |x, y| [(x % 256) as f64 / 255.0, (y % 256) as f64 / 255.0, ((x + y) % 7) as f64 / 255.0])
    }

    #[test]
    fn png_roundtrip_is_exact_on_8bit_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = gradient(37, 21);
        write_png(&p, &img).unwrap();
        assert_eq!(read_png(&p).unwrap(), img);
        assert!(matches!(read_png(&dir.path().join("missing.png")), Err(Error::Usage(_))));
    }

    #[test]
    fn tile_directory_matches_whole_image() {
        let dir = tempfile::tempdir().unwrap();
        let desc = dir.path().join("slide.json");
        let img = gradient(300, 170);
        TileDirectory::write(&img, &desc, "0", 64).unwrap();
        let tiles = TileDirectory::open(&desc, "0").unwrap();
        assert_eq!(tiles.descriptor(), TileDescriptor { width: 300, height: 170, tile_size: 64 });
        for (x0, y0, w, h) in [(0, 0, 300, 170), (-5, -5, 139, 139), (250, 100, 139, 139)] {
            assert_eq!(tiles.read_region(x0, y0, w, h).unwrap(), img.window_reflect(x0, y0, w, h));
        }
        assert!(TileDirectory::open(&desc, "1").unwrap().read_region(0, 0, 4, 4).is_err());
    }
}
