//! Procedural pavement-like images for exercising the pipeline without a
//! photographed dataset.
//!
//! Every class starts from a textured asphalt background. Cracks are dark
//! random-walk polylines; the high-severity class grows a connected mesh of
//! branching strokes; markings are bright straight bands.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{save_image, Image, Manifest};
use crate::error::{Error, Result};
use crate::task::Task;

const BACKGROUND_MIN: f64 = 140.0;
const BACKGROUND_MAX: f64 = 200.0;

/// Grayscale canvas in floating point, quantized on output.
struct Canvas {
    size: usize,
    px: Vec<f64>,
}

impl Canvas {
    fn textured(size: usize, rng: &mut ChaCha8Rng) -> Self {
        let base = rng.gen_range(155.0..185.0);
        let cell = (size / 8).max(2);
        let grid = size / cell + 2;
        let coarse: Vec<f64> = (0..grid * grid).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let mut px = Vec::with_capacity(size * size);
        for y in 0..size {
            let gy = y as f64 / cell as f64;
            let (y0, fy) = (gy.floor() as usize, gy.fract());
            for x in 0..size {
                let gx = x as f64 / cell as f64;
                let (x0, fx) = (gx.floor() as usize, gx.fract());
                let at = |i: usize, j: usize| coarse[i * grid + j];
                let blotch = (at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1) * fx) * (1.0 - fy)
                    + (at(y0 + 1, x0) * (1.0 - fx) + at(y0 + 1, x0 + 1) * fx) * fy;
                let grain = rng.gen_range(-8.0..8.0);
                px.push((base + blotch + grain).clamp(BACKGROUND_MIN, BACKGROUND_MAX));
            }
        }
        Canvas { size, px }
    }

    /// Paints a disc of `radius` around `(x, y)` with `value`.
    fn stamp(&mut self, x: f64, y: f64, radius: f64, value: f64) {
        let r = radius.ceil() as i64;
        let (cx, cy) = (x.round() as i64, y.round() as i64);
        for dy in -r..=r {
            for dx in -r..=r {
                let (px, py) = (cx + dx, cy + dy);
                if px < 0 || py < 0 || px >= self.size as i64 || py >= self.size as i64 {
                    continue;
                }
                let (ox, oy) = (px as f64 - x, py as f64 - y);
                if ox * ox + oy * oy <= radius * radius + 0.25 {
                    self.px[py as usize * self.size + px as usize] = value;
                }
            }
        }
    }

    fn line(&mut self, from: (f64, f64), to: (f64, f64), radius: f64, value: f64) {
        let len = ((to.0 - from.0).powi(2) + (to.1 - from.1).powi(2)).sqrt();
        let steps = (len * 2.0).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            self.stamp(from.0 + (to.0 - from.0) * t, from.1 + (to.1 - from.1) * t, radius, value);
        }
    }

    fn into_image(self) -> Image {
        let size = self.size;
        let pixels = self.px.into_iter().map(|v| (v + 0.5).floor().clamp(0.0, 255.0) as u8).collect();
        Image::new(size, size, 1, pixels).expect("canvas dimensions are consistent")
    }
}

/// Draws one random-walk crack from `start` and returns its vertices.
fn crack_stroke(canvas: &mut Canvas, start: (f64, f64), rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let size = canvas.size as f64;
    let step = size / 12.0;
    let steps = rng.gen_range(8..=14);
    let width = rng.gen_range(2..=3);
    // Stamp radius r covers 2r + 1 pixels.
    let radius = (width - 1) as f64 / 2.0;
    let value = rng.gen_range(20.0..70.0);
    let mut heading = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut pts = vec![start];
    let mut cur = start;
    for _ in 0..steps {
        heading += rng.gen_range(-0.5..0.5);
        let next = (cur.0 + heading.cos() * step, cur.1 + heading.sin() * step);
        canvas.line(cur, next, radius, value);
        pts.push(next);
        cur = next;
    }
    pts
}

fn random_point(size: usize, margin: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let s = size as f64;
    (rng.gen_range(margin * s..(1.0 - margin) * s), rng.gen_range(margin * s..(1.0 - margin) * s))
}

fn add_cracks(canvas: &mut Canvas, strokes: usize, rng: &mut ChaCha8Rng) {
    for _ in 0..strokes {
        let start = random_point(canvas.size, 0.2, rng);
        crack_stroke(canvas, start, rng);
    }
}

/// Interconnected strokes: each new stroke branches off a vertex of an
/// earlier one, so the mesh is connected and strokes cross.
fn add_crack_mesh(canvas: &mut Canvas, rng: &mut ChaCha8Rng) {
    let strokes = rng.gen_range(14..=18);
    let mut vertices = crack_stroke(canvas, random_point(canvas.size, 0.3, rng), rng);
    for _ in 1..strokes {
        let start = vertices[rng.gen_range(0..vertices.len())];
        let pts = crack_stroke(canvas, start, rng);
        vertices.extend(pts.into_iter().filter(|&(x, y)| {
            let s = canvas.size as f64;
            (0.0..s).contains(&x) && (0.0..s).contains(&y)
        }));
    }
}

fn add_marking(canvas: &mut Canvas, rng: &mut ChaCha8Rng) {
    let size = canvas.size as f64;
    let width = rng.gen_range(6..=12) as f64;
    let value = rng.gen_range(230.0..=250.0);
    let center = random_point(canvas.size, 0.35, rng);
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let (dx, dy) = (angle.cos() * size * 1.5, angle.sin() * size * 1.5);
    canvas.line(
        (center.0 - dx, center.1 - dy),
        (center.0 + dx, center.1 + dy),
        (width - 1.0) / 2.0,
        value,
    );
}

/// Renders one image of `label` (a class name of any task).
pub fn render(label: &str, size: usize, rng: &mut ChaCha8Rng) -> Result<Image> {
    if size < 32 {
        return Err(Error::argument(format!("synthetic images need size >= 32, got {size}")));
    }
    let mut canvas = Canvas::textured(size, rng);
    match label {
        "noncrack" | "none" => {}
        "crack" => {
            let n = rng.gen_range(1..=3);
            add_cracks(&mut canvas, n, rng)
        }
        "moderate" => {
            let n = rng.gen_range(1..=2);
            add_cracks(&mut canvas, n, rng)
        }
        "high" => add_crack_mesh(&mut canvas, rng),
        "mark" => add_marking(&mut canvas, rng),
        "mark_crack" => {
            add_marking(&mut canvas, rng);
            let n = rng.gen_range(1..=3);
            add_cracks(&mut canvas, n, rng);
        }
        other => return Err(Error::argument(format!("no synthetic renderer for label `{other}`"))),
    }
    Ok(canvas.into_image())
}

/// Renders `count_per_class` images per class in memory, classes
/// interleaved, as `(label, image)` pairs.
pub fn synthesize(task: Task, count_per_class: usize, size: usize, seed: u64) -> Result<Vec<(usize, Image)>> {
    if count_per_class == 0 {
        return Err(Error::argument("count per class must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count_per_class * task.num_classes());
    for _ in 0..count_per_class {
        for (class, label) in task.labels().iter().enumerate() {
            out.push((class, render(label, size, &mut rng)?));
        }
    }
    Ok(out)
}

/// Writes `<label>_<nnnnn>.pgm` files plus `manifest.csv` into `out_dir`.
pub fn generate_synthetic_corpus(
    task: Task,
    count_per_class: usize,
    image_size: usize,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    let images = synthesize(task, count_per_class, image_size, seed)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rows = Vec::with_capacity(images.len());
    for (i, (class, img)) in images.iter().enumerate() {
        let label = task.labels()[*class];
        let name = format!("{label}_{:05}.pgm", i / task.num_classes());
        save_image(img, out_dir.join(&name))?;
        rows.push((name, label.to_owned()));
    }
    let manifest = Manifest::new(task, out_dir, rows)?;
    manifest.save(out_dir.join("manifest.csv"))?;
    Ok(manifest)
}
