//! Normal field to depth map.
//!
//! Coordinates: `x` is the column index, `y` the row index, both in pixels.
//! Gradients are `p = dz/dx`, `q = dz/dy`. Depth maps are kept in the
//! zero-mean gauge over their mask.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::NormalField;

pub const DEFAULT_NZ_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Shape {
                what: "mask",
                expected: width * height,
                found: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, pixel: usize) -> bool {
        self.bits[pixel]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Indices of on-mask pixels in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    /// 4-connected components, each a row-major sorted list of pixels.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let (w, h) = (self.width, self.height);
        let mut label = vec![usize::MAX; w * h];
        let mut out = Vec::new();
        for start in 0..w * h {
            if !self.bits[start] || label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut pixels = Vec::new();
            let mut queue = VecDeque::from([start]);
            label[start] = id;
            while let Some(i) = queue.pop_front() {
                pixels.push(i);
                let (x, y) = (i % w, i / w);
                let mut visit = |j: usize| {
                    if self.bits[j] && label[j] == usize::MAX {
                        label[j] = id;
                        queue.push_back(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < w {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - w);
                }
                if y + 1 < h {
                    visit(i + w);
                }
            }
            pixels.sort_unstable();
            out.push(pixels);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub mask: Mask,
    /// On-mask pixels whose `n_z` was raised to the floor.
    pub clamped: usize,
}

impl GradientField {
    pub fn new(p: Vec<f64>, q: Vec<f64>, mask: Mask) -> Result<Self> {
        let m = mask.width() * mask.height();
        for (what, len) in [("p gradient", p.len()), ("q gradient", q.len())] {
            if len != m {
                return Err(Error::Shape {
                    what,
                    expected: m,
                    found: len,
                });
            }
        }
        if let Some(pixel) = mask
            .indices()
            .find(|&i| !(p[i].is_finite() && q[i].is_finite()))
        {
            return Err(Error::OutOfRange {
                what: "gradient",
                pixel,
                value: f64::NAN,
                range: "finite values on mask",
            });
        }
        Ok(Self {
            width: mask.width(),
            height: mask.height(),
            p,
            q,
            mask,
            clamped: 0,
        })
    }

    /// Samples `(p, q)` from a function of pixel coordinates.
    pub fn from_fn(mask: Mask, f: impl Fn(usize, usize) -> (f64, f64)) -> Result<Self> {
        let (w, h) = (mask.width(), mask.height());
        let (p, q) = (0..w * h).map(|i| f(i % w, i / w)).unzip();
        Self::new(p, q, mask)
    }

    /// `a * self + b * other` on the mask of `self`.
    pub fn combine(&self, a: f64, other: &GradientField, b: f64) -> Result<Self> {
        if self.p.len() != other.p.len() {
            return Err(Error::Shape {
                what: "gradient field",
                expected: self.p.len(),
                found: other.p.len(),
            });
        }
        Ok(Self {
            width: self.width,
            height: self.height,
            p: self.p.iter().zip(&other.p).map(|(x, y)| a * x + b * y).collect(),
            q: self.q.iter().zip(&other.q).map(|(x, y)| a * x + b * y).collect(),
            mask: self.mask.clone(),
            clamped: 0,
        })
    }
}

/// Height field in the zero-mean gauge; off-mask heights are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    z: Vec<f64>,
    mask: Mask,
}

impl DepthMap {
    /// Shifts `z` to zero mean over `mask` and zeroes off-mask heights.
    pub fn new(z: Vec<f64>, mask: Mask) -> Result<Self> {
        let m = mask.width() * mask.height();
        if z.len() != m {
            return Err(Error::Shape {
                what: "depth map",
                expected: m,
                found: z.len(),
            });
        }
        let n = mask.count();
        if n == 0 {
            return Err(Error::Empty("mask"));
        }
        if let Some(pixel) = mask.indices().find(|&i| !z[i].is_finite()) {
            return Err(Error::OutOfRange {
                what: "depth",
                pixel,
                value: z[pixel],
                range: "finite values on mask",
            });
        }
        let mean = mask.indices().map(|i| z[i]).sum::<f64>() / n as f64;
        let z = z
            .iter()
            .zip(mask.bits())
            .map(|(v, &on)| if on { v - mean } else { 0.0 })
            .collect();
        Ok(Self {
            width: mask.width(),
            height: mask.height(),
            z,
            mask,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn heights(&self) -> &[f64] {
        &self.z
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.z[y * self.width + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Line,
    Spectral,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "line" => Ok(Method::Line),
            "spectral" => Ok(Method::Spectral),
            other => Err(Error::Config(format!(
                "unknown integration method `{other}` (expected line or spectral)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Line => "line",
            Method::Spectral => "spectral",
        })
    }
}

/// `p = -n_x / n_z`, `q = -n_y / n_z` with `n_z` raised to at least `nz_floor`.
pub fn normals_to_gradients(normals: &NormalField, mask: &Mask, nz_floor: f64) -> Result<GradientField> {
    if normals.width() != mask.width() || normals.height() != mask.height() {
        return Err(Error::Shape {
            what: "mask",
            expected: normals.len(),
            found: mask.width() * mask.height(),
        });
    }
    let mut clamped = 0;
    let (p, q) = normals
        .normals()
        .iter()
        .zip(mask.bits())
        .map(|(n, &on)| {
            let nz = if n.z < nz_floor {
                clamped += usize::from(on);
                nz_floor
            } else {
                n.z
            };
            (-n.x / nz, -n.y / nz)
        })
        .unzip();
    let mut g = GradientField::new(p, q, mask.clone())?;
    g.clamped = clamped;
    Ok(g)
}

pub fn integrate(grads: &GradientField, method: Method) -> Result<DepthMap> {
    match method {
        Method::Line => integrate_line(grads),
        Method::Spectral => integrate_spectral(grads),
    }
}

/// Average of a horizontal-first and a vertical-first scan-path integral.
///
/// Each pass seeds the on-mask pixel nearest the component centroid and
/// accumulates trapezoidal steps, alternating row sweeps and column sweeps
/// until the component is covered. On convex masks the two passes are the
/// rows-then-columns and columns-then-rows path integrals. Each
/// 4-connected component is integrated and centered on its own.
pub fn integrate_line(grads: &GradientField) -> Result<DepthMap> {
    let mask = &grads.mask;
    let components = mask.components();
    if components.is_empty() {
        return Err(Error::Empty("mask"));
    }
    let mut z = vec![0.0; grads.width * grads.height];
    for comp in &components {
        let seed = centroid_pixel(comp, grads.width);
        let a = scan_pass(grads, seed, Axis::Horizontal);
        let b = scan_pass(grads, seed, Axis::Vertical);
        let mean = comp.iter().map(|&i| 0.5 * (a[i] + b[i])).sum::<f64>() / comp.len() as f64;
        for &i in comp {
            z[i] = 0.5 * (a[i] + b[i]) - mean;
        }
    }
    DepthMap::new(z, mask.clone())
}

fn centroid_pixel(comp: &[usize], width: usize) -> usize {
    let n = comp.len() as f64;
    let cx = comp.iter().map(|&i| (i % width) as f64).sum::<f64>() / n;
    let cy = comp.iter().map(|&i| (i / width) as f64).sum::<f64>() / n;
    // Ties resolve to the first pixel in row-major order.
    *comp
        .iter()
        .min_by(|&&a, &&b| {
            let d = |i: usize| {
                let dx = (i % width) as f64 - cx;
                let dy = (i / width) as f64 - cy;
                dx * dx + dy * dy
            };
            d(a).total_cmp(&d(b))
        })
        .expect("components are nonempty")
}

#[derive(Clone, Copy, PartialEq)]
enum Axis {
    Horizontal,
    Vertical,
}

impl Axis {
    fn other(self) -> Self {
        match self {
            Axis::Horizontal => Axis::Vertical,
            Axis::Vertical => Axis::Horizontal,
        }
    }
}

fn scan_pass(grads: &GradientField, seed: usize, first: Axis) -> Vec<f64> {
    let (w, h) = (grads.width, grads.height);
    let on = grads.mask.bits();
    let mut z = vec![f64::NAN; w * h];
    z[seed] = 0.0;
    let mut axis = first;
    // Stop after one idle sweep along each axis.
    let mut idle = 0;
    while idle < 2 {
        let changed = match axis {
            Axis::Horizontal => sweep(&mut z, on, &grads.p, h, w, |line, k| line * w + k),
            Axis::Vertical => sweep(&mut z, on, &grads.q, w, h, |line, k| k * w + line),
        };
        idle = if changed { 0 } else { idle + 1 };
        axis = axis.other();
    }
    z
}

/// Extends assigned heights along every line, forward then backward,
/// without crossing off-mask pixels. Returns whether anything was assigned.
fn sweep(
    z: &mut [f64],
    on: &[bool],
    grad: &[f64],
    lines: usize,
    len: usize,
    index: impl Fn(usize, usize) -> usize,
) -> bool {
    let mut changed = false;
    for line in 0..lines {
        for k in 1..len {
            let (prev, cur) = (index(line, k - 1), index(line, k));
            if on[cur] && z[cur].is_nan() && !z[prev].is_nan() {
                z[cur] = z[prev] + 0.5 * (grad[prev] + grad[cur]);
                changed = true;
            }
        }
        for k in (0..len.saturating_sub(1)).rev() {
            let (next, cur) = (index(line, k + 1), index(line, k));
            if on[cur] && z[cur].is_nan() && !z[next].is_nan() {
                z[cur] = z[next] - 0.5 * (grad[next] + grad[cur]);
                changed = true;
            }
        }
    }
    changed
}

/// Orthonormal DCT-II basis, `c[k][i] = a_k cos(pi k (i + 1/2) / n)`.
fn dct_basis(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for k in 0..n {
        let a = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for i in 0..n {
            c[k * n + i] = a * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos();
        }
    }
    c
}

/// `out = a * x * b^T` for row-major `x` (rows x cols), `a` (rows x rows), `b` (cols x cols).
fn separable(a: &[f64], x: &[f64], b: &[f64], rows: usize, cols: usize, transpose: bool) -> Vec<f64> {
    let at = |k: usize, i: usize, n: usize, m: &[f64]| if transpose { m[i * n + k] } else { m[k * n + i] };
    let mut tmp = vec![0.0; rows * cols];
    for r in 0..rows {
        for k in 0..cols {
            tmp[r * cols + k] = (0..cols).map(|c| x[r * cols + c] * at(k, c, cols, b)).sum();
        }
    }
    let mut out = vec![0.0; rows * cols];
    for k in 0..rows {
        for c in 0..cols {
            out[k * cols + c] = (0..rows).map(|r| at(k, r, rows, a) * tmp[r * cols + c]).sum();
        }
    }
    out
}

/// Least-squares integration over the full rectangle.
///
/// Minimizes the squared mismatch between forward differences of `z` and the
/// trapezoid-averaged gradients on every edge. Off-mask gradients count as
/// zero. The normal equations are the Neumann Poisson problem, which the DCT
/// diagonalizes; the zero frequency is dropped.
pub fn integrate_spectral(grads: &GradientField) -> Result<DepthMap> {
    let (w, h) = (grads.width, grads.height);
    if grads.mask.is_empty() {
        return Err(Error::Empty("mask"));
    }
    let on = grads.mask.bits();
    let p: Vec<f64> = grads.p.iter().zip(on).map(|(v, &b)| if b { *v } else { 0.0 }).collect();
    let q: Vec<f64> = grads.q.iter().zip(on).map(|(v, &b)| if b { *v } else { 0.0 }).collect();

    // Right-hand side G^T g.
    let mut rhs = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                let g = 0.5 * (p[i] + p[i + 1]);
                rhs[i] -= g;
                rhs[i + 1] += g;
            }
            if y + 1 < h {
                let g = 0.5 * (q[i] + q[i + w]);
                rhs[i] -= g;
                rhs[i + w] += g;
            }
        }
    }

    let cw = dct_basis(w);
    let ch = dct_basis(h);
    let mut spec = separable(&ch, &rhs, &cw, h, w, false);
    for ky in 0..h {
        let ly = 2.0 - 2.0 * (PI * ky as f64 / h as f64).cos();
        for kx in 0..w {
            let lx = 2.0 - 2.0 * (PI * kx as f64 / w as f64).cos();
            let i = ky * w + kx;
            spec[i] = if ky == 0 && kx == 0 { 0.0 } else { spec[i] / (lx + ly) };
        }
    }
    let z = separable(&ch, &spec, &cw, h, w, true);
    DepthMap::new(z, grads.mask.clone())
}

/// Squared mismatch between depth differences and trapezoid-averaged
/// gradients, summed over edges with both ends on the mask.
pub fn integrability_residual(depth: &DepthMap, grads: &GradientField) -> Result<f64> {
    let (w, h) = (grads.width, grads.height);
    if depth.width() != w || depth.height() != h {
        return Err(Error::Shape {
            what: "depth map",
            expected: w * h,
            found: depth.width() * depth.height(),
        });
    }
    let on = grads.mask.bits();
    let z = depth.heights();
    let mut sum = 0.0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !on[i] {
                continue;
            }
            if x + 1 < w && on[i + 1] {
                let r = z[i + 1] - z[i] - 0.5 * (grads.p[i] + grads.p[i + 1]);
                sum += r * r;
            }
            if y + 1 < h && on[i + w] {
                let r = z[i + w] - z[i] - 0.5 * (grads.q[i] + grads.q[i + w]);
                sum += r * r;
            }
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::direction;
    use approx::assert_abs_diff_eq;

    const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn gradients_from_normals() {
        let normals = NormalField::new(
            3,
            1,
            vec![
                direction(0.0, 0.0, 1.0).unwrap(),
                direction(-SQRT_HALF, 0.0, SQRT_HALF).unwrap(),
                direction(1.0, 0.0, 0.0).unwrap(),
            ],
        )
        .unwrap();
        let g = normals_to_gradients(&normals, &Mask::full(3, 1), DEFAULT_NZ_FLOOR).unwrap();
        assert_eq!((g.p[0], g.q[0]), (0.0, 0.0));
        assert_abs_diff_eq!(g.p[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.q[1], 0.0);
        assert_abs_diff_eq!(g.p[2], -20.0, epsilon = 1e-12);
        assert_eq!(g.clamped, 1);
    }

    #[test]
    fn flat_field_integrates_to_zero() {
        let g = GradientField::from_fn(Mask::full(5, 4), |_, _| (0.0, 0.0)).unwrap();
        for method in [Method::Line, Method::Spectral] {
            let d = integrate(&g, method).unwrap();
            assert!(d.heights().iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn ramp_integrates_to_centered_x() {
        let (w, h) = (7, 5);
        let g = GradientField::from_fn(Mask::full(w, h), |_, _| (1.0, 0.0)).unwrap();
        let mean_x = (w as f64 - 1.0) / 2.0;
        for method in [Method::Line, Method::Spectral] {
            let d = integrate(&g, method).unwrap();
            for y in 0..h {
                for x in 0..w {
                    assert_abs_diff_eq!(d.get(x, y), x as f64 - mean_x, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn empty_mask_is_an_error() {
        let mask = Mask::new(2, 2, vec![false; 4]).unwrap();
        let g = GradientField::from_fn(mask, |_, _| (0.0, 0.0)).unwrap();
        assert!(matches!(integrate_line(&g), Err(Error::Empty(_))));
        assert!(matches!(integrate_spectral(&g), Err(Error::Empty(_))));
    }

    #[test]
    fn line_handles_nonconvex_and_split_masks() {
        // A U shape plus an isolated pixel; the ramp must hold within each piece.
        #[rustfmt::skip]
        let bits = [
            1, 0, 0, 0, 1,
            1, 0, 1, 0, 1,
            1, 1, 1, 1, 1,
            0, 0, 0, 0, 0,
            0, 0, 0, 0, 1,
        ];
        let mask = Mask::new(5, 5, bits.iter().map(|&b| b == 1).collect()).unwrap();
        assert_eq!(mask.components().len(), 2);
        let g = GradientField::from_fn(mask.clone(), |_, _| (2.0, -1.0)).unwrap();
        let d = integrate_line(&g).unwrap();
        let (w, z) = (5, d.heights());
        let main: Vec<usize> = mask.components()[0].clone();
        let expect = |i: usize| 2.0 * (i % w) as f64 - (i / w) as f64;
        let mean = main.iter().map(|&i| expect(i)).sum::<f64>() / main.len() as f64;
        for &i in &main {
            assert_abs_diff_eq!(z[i], expect(i) - mean, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(z[24], 0.0);
    }

    #[test]
    fn residual_is_zero_for_exact_integral() {
        let g = GradientField::from_fn(Mask::full(6, 6), |x, y| (x as f64, 0.5 * y as f64)).unwrap();
        let d = integrate_spectral(&g).unwrap();
        assert!(integrability_residual(&d, &g).unwrap() < 1e-18);
    }
}
