//! MPI directories: one 16-bit RGBA PNG per plane plus a text header.
//! The layout is described in `docs/mpi_format.md`.

use std::fs;
use std::path::Path;

use image::{ImageBuffer, Rgba};

use super::{codec_err, io_err, open_image, DataError};
use crate::camera::CameraIntrinsics;
use crate::mpi::{density_from_alpha, Mpi, MpiPlane};
use crate::raster::{MaskImage, Raster};

pub const MPI_HEADER: &str = "planes.txt";
const MAGIC: &str = "flowgen-mpi 1";

fn plane_file(k: usize) -> String {
    format!("plane_{k:03}.png")
}

pub fn save_mpi_dir(mpi: &Mpi, dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let (w, h) = mpi.dims();
    let k = mpi.intrinsics();
    let mut header = format!("{MAGIC}\nsize {w} {h}\nintrinsics {} {} {} {}\nplanes {}\n", k.fx, k.fy, k.cx, k.cy, mpi.len());
    for (i, plane) in mpi.planes().iter().enumerate() {
        header.push_str(&format!("{i} {}\n", plane.depth()));
        let q = |v: f64| (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        let img = ImageBuffer::<Rgba<u16>, _>::from_fn(w as u32, h as u32, |x, y| {
            let (x, y) = (x as usize, y as usize);
            let [r, g, b] = plane.color_at(x, y);
            Rgba([q(r), q(g), q(b), q(plane.alpha_at(x, y))])
        });
        let path = dir.join(plane_file(i));
        img.save_with_format(&path, image::ImageFormat::Png).map_err(codec_err(&path))?;
    }
    let path = dir.join(MPI_HEADER);
    fs::write(&path, header).map_err(io_err(&path))
}

/// Loads a saved MPI. Object masks are not stored; every plane is marked as
/// object so that [`Mpi::with_object_mask`] can narrow it down.
pub fn load_mpi_dir(dir: &Path) -> Result<Mpi, DataError> {
    let path = dir.join(MPI_HEADER);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let fail = |line: usize, message: String| DataError::ParseFailure { line, column: 1, message };
    let lines: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, t)| !t.is_empty())
        .collect();
    let mut it = lines.iter();
    let mut next = |key: &str, count: usize| -> Result<(usize, Vec<f64>), DataError> {
        let (line, tokens) = it.next().ok_or_else(|| fail(0, format!("missing `{key}` line")))?;
        if tokens[0] != key || tokens.len() != count + 1 {
            return Err(fail(*line, format!("expected `{key}` with {count} values")));
        }
        let values = tokens[1..]
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| fail(*line, format!("bad number `{t}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((*line, values))
    };
    match lines.first() {
        Some((_, t)) if t.join(" ") == MAGIC => {}
        _ => return Err(DataError::BadMagic { expected: MAGIC.into(), found: text.lines().next().unwrap_or("").into() }),
    }
    next("flowgen-mpi", 1)?;
    let (_, size) = next("size", 2)?;
    let (w, h) = (size[0] as usize, size[1] as usize);
    let (kline, k) = next("intrinsics", 4)?;
    let intrinsics =
        CameraIntrinsics::new(k[0], k[1], k[2], k[3], w, h).map_err(|e| fail(kline, e.to_string()))?;
    let (_, n) = next("planes", 1)?;
    let n = n[0] as usize;
    let mut planes = Vec::with_capacity(n);
    for i in 0..n {
        let (line, v) = next(&i.to_string(), 1)?;
        let depth = v[0];
        let ppath = dir.join(plane_file(i));
        let img = match open_image(&ppath)? {
            image::DynamicImage::ImageRgba16(img) => img,
            other => {
                return Err(DataError::UnsupportedFormat(format!(
                    "{}: expected 16-bit RGBA, found {:?}",
                    ppath.display(),
                    other.color()
                )))
            }
        };
        if (img.width() as usize, img.height() as usize) != (w, h) {
            return Err(fail(line, format!("{} has the wrong size", ppath.display())));
        }
        let px = |x: usize, y: usize| img.get_pixel(x as u32, y as u32).0;
        let color = Raster::from_fn(w, h, 3, |x, y, c| px(x, y)[c] as f64 / 65535.0);
        let density = Raster::from_fn(w, h, 1, |x, y, _| density_from_alpha(px(x, y)[3] as f64 / 65535.0));
        let plane = MpiPlane::from_full(depth, &color, &density, &MaskImage::ones(w, h))
            .map_err(|e| fail(line, e.to_string()))?;
        planes.push(plane);
    }
    Mpi::new(planes, intrinsics).map_err(|e| DataError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpi::build_mpi;
    use crate::raster::DepthMap;

    #[test]
    fn round_trip_preserves_hard_planes() {
        let (w, h) = (12, 8);
        let image = Raster::from_fn(w, h, 3, |x, y, c| ((x + 2 * y + c) % 5) as f64 / 4.0);
        let depth = DepthMap::from_fn(w, h, |x, _| if x < 6 { 2.0 } else { 10.0 }).unwrap();
        let k = CameraIntrinsics::centered(10.0, w, h).unwrap();
        let mpi = build_mpi(&image, &depth, &MaskImage::zeros(w, h), &k, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_mpi_dir(&mpi, dir.path()).unwrap();
        let back = load_mpi_dir(dir.path()).unwrap();
        assert_eq!(back.depths(), mpi.depths());
        for (a, b) in mpi.planes().iter().zip(back.planes()) {
            for y in 0..h {
                for x in 0..w {
                    assert_eq!(a.alpha_at(x, y), b.alpha_at(x, y));
                    for c in 0..3 {
                        assert!((a.color_at(x, y)[c] - b.color_at(x, y)[c]).abs() <= 0.5 / 65535.0);
                    }
                }
            }
        }
    }

    #[test]
    fn bad_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(MPI_HEADER), "something else\n").unwrap();
        assert!(matches!(load_mpi_dir(dir.path()), Err(DataError::BadMagic { .. })));
    }
}
