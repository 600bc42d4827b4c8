//! Structural similarity with an 11x11 Gaussian window.
//!
//! The window is applied as a normalised convolution over the part of the
//! window that lies inside the image, so the SSIM map has the same size as
//! the input and images smaller than the window are handled without padding.

use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

const HALF: usize = SSIM_WINDOW / 2;

fn window_1d() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - HALF as f64;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

struct Blur {
    w: usize,
    h: usize,
    k: [f64; SSIM_WINDOW],
    norm_x: Vec<f64>,
    norm_y: Vec<f64>,
}

impl Blur {
    fn new(w: usize, h: usize) -> Self {
        let k = window_1d();
        let norm = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|p| {
                    (0..SSIM_WINDOW)
                        .filter(|&t| {
                            let q = p as isize + t as isize - HALF as isize;
                            q >= 0 && (q as usize) < n
                        })
                        .map(|t| k[t])
                        .sum()
                })
                .collect()
        };
        Self {
            w,
            h,
            k,
            norm_x: norm(w),
            norm_y: norm(h),
        }
    }

    /// Unnormalised separable correlation with zero outside the image.
    fn correlate(&self, img: &[f64]) -> Vec<f64> {
        let (w, h) = (self.w, self.h);
        let mut tmp = vec![0.0; w * h];
        for r in 0..h {
            let row = &img[r * w..(r + 1) * w];
            for c in 0..w {
                let mut acc = 0.0;
                for (t, kv) in self.k.iter().enumerate() {
                    let q = c as isize + t as isize - HALF as isize;
                    if q >= 0 && (q as usize) < w {
                        acc += kv * row[q as usize];
                    }
                }
                tmp[r * w + c] = acc;
            }
        }
        let mut out = vec![0.0; w * h];
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for (t, kv) in self.k.iter().enumerate() {
                    let q = r as isize + t as isize - HALF as isize;
                    if q >= 0 && (q as usize) < h {
                        acc += kv * tmp[q as usize * w + c];
                    }
                }
                out[r * w + c] = acc;
            }
        }
        out
    }

    fn blur(&self, img: &[f64]) -> Vec<f64> {
        let mut out = self.correlate(img);
        for r in 0..self.h {
            for c in 0..self.w {
                out[r * self.w + c] /= self.norm_x[c] * self.norm_y[r];
            }
        }
        out
    }

    /// Adjoint of `blur`.
    fn blur_adjoint(&self, x: &[f64]) -> Vec<f64> {
        let mut scaled = x.to_vec();
        for r in 0..self.h {
            for c in 0..self.w {
                scaled[r * self.w + c] /= self.norm_x[c] * self.norm_y[r];
            }
        }
        // The window is symmetric, so correlation is its own adjoint.
        self.correlate(&scaled)
    }
}

struct Moments {
    mu_a: Vec<f64>,
    mu_b: Vec<f64>,
    var_a: Vec<f64>,
    var_b: Vec<f64>,
    cov: Vec<f64>,
}

fn moments(blur: &Blur, a: &[f64], b: &[f64]) -> Moments {
    let sq = |x: &[f64]| x.iter().map(|v| v * v).collect::<Vec<_>>();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = blur.blur(a);
    let mu_b = blur.blur(b);
    let e_aa = blur.blur(&sq(a));
    let e_bb = blur.blur(&sq(b));
    let e_ab = blur.blur(&ab);
    let n = a.len();
    let mut var_a = vec![0.0; n];
    let mut var_b = vec![0.0; n];
    let mut cov = vec![0.0; n];
    for i in 0..n {
        var_a[i] = e_aa[i] - mu_a[i] * mu_a[i];
        var_b[i] = e_bb[i] - mu_b[i] * mu_b[i];
        cov[i] = e_ab[i] - mu_a[i] * mu_b[i];
    }
    Moments {
        mu_a,
        mu_b,
        var_a,
        var_b,
        cov,
    }
}

fn check_dims(a: usize, b: usize, w: usize, h: usize) -> Result<()> {
    if a != w * h || b != w * h || w == 0 || h == 0 {
        return Err(Error::DimensionMismatch {
            expected: format!("{} samples ({w}x{h})", w * h),
            actual: format!("{a} and {b}"),
        });
    }
    Ok(())
}

fn plane_value_and_grad(a: &[f64], b: &[f64], w: usize, h: usize, want_grad: bool) -> (f64, Option<Vec<f64>>) {
    let blur = Blur::new(w, h);
    let m = moments(&blur, a, b);
    let n = a.len();
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0;
    let (mut ga, mut gb, mut gc) = if want_grad {
        (vec![0.0; n], vec![0.0; n], vec![0.0; n])
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };
    for i in 0..n {
        let (mx, my) = (m.mu_a[i], m.mu_b[i]);
        let l_num = 2.0 * mx * my + SSIM_C1;
        let c_num = 2.0 * m.cov[i] + SSIM_C2;
        let l_den = mx * mx + my * my + SSIM_C1;
        let c_den = m.var_a[i] + m.var_b[i] + SSIM_C2;
        let s = (l_num * c_num) / (l_den * c_den);
        total += s;
        if want_grad {
            let ds_dmu = (2.0 * my * c_num) / (l_den * c_den) - s * 2.0 * mx / l_den;
            let ds_dvar = -s / c_den;
            let ds_dcov = 2.0 * l_num / (l_den * c_den);
            // d var_a / d a_q = G (2 a_q - 2 mu_a);  d cov / d a_q = G (b_q - mu_b)
            ga[i] = (ds_dmu - 2.0 * mx * ds_dvar - my * ds_dcov) * inv_n;
            gb[i] = ds_dvar * inv_n;
            gc[i] = ds_dcov * inv_n;
        }
    }
    let value = total * inv_n;
    if !want_grad {
        return (value, None);
    }
    let ta = blur.blur_adjoint(&ga);
    let tb = blur.blur_adjoint(&gb);
    let tc = blur.blur_adjoint(&gc);
    let grad = (0..n).map(|q| ta[q] + 2.0 * a[q] * tb[q] + b[q] * tc[q]).collect();
    (value, Some(grad))
}

/// Mean SSIM of two single-channel images on a `[0, 1]` range.
pub fn ssim_plane(a: &[f64], b: &[f64], width: usize, height: usize) -> Result<f64> {
    check_dims(a.len(), b.len(), width, height)?;
    Ok(plane_value_and_grad(a, b, width, height, false).0)
}

/// Mean SSIM of two RGB images, averaged over channels.
pub fn ssim(a: &[[f64; 3]], b: &[[f64; 3]], width: usize, height: usize) -> Result<f64> {
    check_dims(a.len(), b.len(), width, height)?;
    let mut total = 0.0;
    for c in 0..3 {
        let pa: Vec<f64> = a.iter().map(|p| p[c]).collect();
        let pb: Vec<f64> = b.iter().map(|p| p[c]).collect();
        total += plane_value_and_grad(&pa, &pb, width, height, false).0;
    }
    Ok(total / 3.0)
}

/// RGB SSIM and its gradient with respect to `a`.
pub(crate) fn ssim_with_grad(a: &[[f64; 3]], b: &[[f64; 3]], width: usize, height: usize) -> (f64, Vec<[f64; 3]>) {
    let mut total = 0.0;
    let mut grad = vec![[0.0; 3]; a.len()];
    for c in 0..3 {
        let pa: Vec<f64> = a.iter().map(|p| p[c]).collect();
        let pb: Vec<f64> = b.iter().map(|p| p[c]).collect();
        let (v, g) = plane_value_and_grad(&pa, &pb, width, height, true);
        total += v;
        for (dst, src) in grad.iter_mut().zip(g.unwrap()) {
            dst[c] = src / 3.0;
        }
    }
    (total / 3.0, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen::<f64>()).collect()
    }

    #[test]
    fn identical_images_score_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_plane(&mut rng, 20 * 13);
        assert_relative_eq!(ssim_plane(&a, &a, 20, 13).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn black_versus_white() {
        let a = vec![0.0; 16 * 16];
        let b = vec![1.0; 16 * 16];
        // Closed form with zero variance: C1 / (1 + C1).
        let expected = SSIM_C1 / (1.0 + SSIM_C1);
        let s = ssim_plane(&a, &b, 16, 16).unwrap();
        assert_relative_eq!(s, expected, epsilon = 1e-12);
        assert!(s < 0.01);
    }

    #[test]
    fn smaller_than_window_is_defined() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_plane(&mut rng, 5 * 4);
        let b = random_plane(&mut rng, 5 * 4);
        let s = ssim_plane(&a, &b, 5, 4).unwrap();
        assert!(s.is_finite() && (-1.0..=1.0).contains(&s));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(ssim_plane(&[0.0; 4], &[0.0; 5], 2, 2).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (w, h) = (9, 7);
        let a: Vec<[f64; 3]> = (0..w * h).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let b: Vec<[f64; 3]> = (0..w * h).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let (_, g) = ssim_with_grad(&a, &b, w, h);
        let eps = 1e-6;
        for q in [0, 5, 31, w * h - 1] {
            for c in 0..3 {
                let mut ap = a.clone();
                ap[q][c] += eps;
                let mut am = a.clone();
                am[q][c] -= eps;
                let fd = (ssim(&ap, &b, w, h).unwrap() - ssim(&am, &b, w, h).unwrap()) / (2.0 * eps);
                assert_relative_eq!(g[q][c], fd, epsilon = 1e-8, max_relative = 1e-5);
            }
        }
    }
}
