use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::{Dims, GrayVolume, RealVolume};

/// Sampled Gaussian of half-width `ceil(3 sigma)`, normalized to sum 1.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let half = (3.0 * sigma).ceil() as i64;
    let denom = 2.0 * sigma * sigma;
    let raw: Vec<f64> = (-half..=half)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )))
    }
}

#[inline]
fn clamp_offset(i: usize, k: i64, n: usize) -> usize {
    (i as i64 + k).clamp(0, n as i64 - 1) as usize
}

// Every pass evaluates `c + sum_k w_k (v_k - c)` with `c` the centre sample,
// which equals the plain weighted sum for a unit-sum kernel but keeps constant
// regions exactly constant.

fn pass_x(src: &[f64], dst: &mut [f64], dims: Dims, kernel: &[f64]) {
    let half = (kernel.len() / 2) as i64;
    let nx = dims.nx;
    dst.par_chunks_mut(nx)
        .zip(src.par_chunks(nx))
        .for_each(|(out, line)| {
            for x in 0..nx {
                let c = line[x];
                let mut acc = 0.0;
                for (j, &w) in kernel.iter().enumerate() {
                    acc += w * (line[clamp_offset(x, j as i64 - half, nx)] - c);
                }
                out[x] = c + acc;
            }
        });
}

fn pass_y(src: &[f64], dst: &mut [f64], dims: Dims, kernel: &[f64]) {
    let half = (kernel.len() / 2) as i64;
    let (nx, ny) = (dims.nx, dims.ny);
    let s = dims.slice_len();
    dst.par_chunks_mut(s)
        .zip(src.par_chunks(s))
        .for_each(|(out, slice)| {
            let mut acc = vec![0.0; nx];
            for y in 0..ny {
                acc.iter_mut().for_each(|a| *a = 0.0);
                let centre = &slice[y * nx..(y + 1) * nx];
                for (j, &w) in kernel.iter().enumerate() {
                    let yy = clamp_offset(y, j as i64 - half, ny);
                    let row = &slice[yy * nx..(yy + 1) * nx];
                    for ((a, &v), &c) in acc.iter_mut().zip(row).zip(centre) {
                        *a += w * (v - c);
                    }
                }
                for ((o, &a), &c) in out[y * nx..(y + 1) * nx].iter_mut().zip(&acc).zip(centre) {
                    *o = c + a;
                }
            }
        });
}

fn pass_z(src: &[f64], dst: &mut [f64], dims: Dims, kernel: &[f64]) {
    let half = (kernel.len() / 2) as i64;
    let nz = dims.nz;
    let s = dims.slice_len();
    dst.par_chunks_mut(s).enumerate().for_each(|(z, out)| {
        let centre = &src[z * s..(z + 1) * s];
        let mut acc = vec![0.0; s];
        for (j, &w) in kernel.iter().enumerate() {
            let zz = clamp_offset(z, j as i64 - half, nz);
            let plane = &src[zz * s..(zz + 1) * s];
            for ((a, &v), &c) in acc.iter_mut().zip(plane).zip(centre) {
                *a += w * (v - c);
            }
        }
        for ((o, &a), &c) in out.iter_mut().zip(&acc).zip(centre) {
            *o = c + a;
        }
    });
}

/// Separable Gaussian blur of a real volume (x, then y, then z; edges clamped).
pub fn gaussian_blur_real(v: &RealVolume, sigma: f64) -> Result<RealVolume> {
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(v.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let dims = v.dims;
    let mut a = vec![0.0; dims.len()];
    let mut b = vec![0.0; dims.len()];
    pass_x(&v.data, &mut a, dims, &kernel);
    pass_y(&a, &mut b, dims, &kernel);
    pass_z(&b, &mut a, dims, &kernel);
    Ok(RealVolume { dims, data: a })
}

pub fn gaussian_blur(v: &GrayVolume, sigma: f64) -> Result<RealVolume> {
    check_sigma(sigma)?;
    gaussian_blur_real(&v.to_real(), sigma)
}

fn check_dog(sigma1: f64, sigma2: f64) -> Result<()> {
    if sigma1.is_finite() && sigma2.is_finite() && 0.0 < sigma1 && sigma1 < sigma2 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "difference of Gaussians needs 0 < sigma1 < sigma2, got ({sigma1}, {sigma2})"
        )))
    }
}

pub(crate) fn subtract(a: &RealVolume, b: &RealVolume) -> RealVolume {
    RealVolume {
        dims: a.dims,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect(),
    }
}

pub fn difference_of_gaussians_real(v: &RealVolume, sigma1: f64, sigma2: f64) -> Result<RealVolume> {
    check_dog(sigma1, sigma2)?;
    let fine = gaussian_blur_real(v, sigma1)?;
    let coarse = gaussian_blur_real(v, sigma2)?;
    Ok(subtract(&fine, &coarse))
}

/// `gaussian_blur(v, sigma1) - gaussian_blur(v, sigma2)`.
pub fn difference_of_gaussians(v: &GrayVolume, sigma1: f64, sigma2: f64) -> Result<RealVolume> {
    check_dog(sigma1, sigma2)?;
    difference_of_gaussians_real(&v.to_real(), sigma1, sigma2)
}

/// Euclidean norm of central differences (one-sided at borders, zero along
/// axes of length 1) of an already smoothed volume.
pub(crate) fn gradient_norm(v: &RealVolume) -> RealVolume {
    let d = v.dims;
    let data = &v.data;
    let s = d.slice_len();
    let mut out = vec![0.0; d.len()];
    out.par_chunks_mut(s).enumerate().for_each(|(z, plane)| {
        let diff = |i: usize, n: usize, stride: usize, at: usize| -> f64 {
            if n == 1 {
                0.0
            } else if i == 0 {
                data[at + stride] - data[at]
            } else if i == n - 1 {
                data[at] - data[at - stride]
            } else {
                0.5 * (data[at + stride] - data[at - stride])
            }
        };
        for y in 0..d.ny {
            for x in 0..d.nx {
                let at = d.index(x, y, z);
                let gx = diff(x, d.nx, 1, at);
                let gy = diff(y, d.ny, d.nx, at);
                let gz = diff(z, d.nz, s, at);
                plane[x + d.nx * y] = (gx * gx + gy * gy + gz * gz).sqrt();
            }
        }
    });
    RealVolume { dims: d, data: out }
}

pub fn gradient_magnitude_real(v: &RealVolume, sigma: f64) -> Result<RealVolume> {
    check_sigma(sigma)?;
    let smoothed = gaussian_blur_real(v, sigma)?;
    Ok(gradient_norm(&smoothed))
}

/// Gradient magnitude after an optional blur (`sigma = 0` skips it).
pub fn gradient_magnitude(v: &GrayVolume, sigma: f64) -> Result<RealVolume> {
    gradient_magnitude_real(&v.to_real(), sigma)
}

/// Clipped-window sums along one axis; `stride`/`n` select the axis.
fn box_sum_axis(src: &[u64], dims: Dims, axis: usize, r: usize) -> Vec<u64> {
    let (n, stride) = match axis {
        0 => (dims.nx, 1),
        1 => (dims.ny, dims.nx),
        _ => (dims.nz, dims.slice_len()),
    };
    let mut out = vec![0u64; src.len()];
    let s = dims.slice_len();
    // Each output slice only depends on the source, so slices can run in parallel.
    out.par_chunks_mut(s).enumerate().for_each(|(z, plane)| {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                let at = dims.index(x, y, z);
                let i = [x, y, z][axis];
                let lo = i.saturating_sub(r);
                let hi = (i + r).min(n - 1);
                let base = at - i * stride;
                let mut total = 0u64;
                for j in lo..=hi {
                    total += src[base + j * stride];
                }
                plane[x + dims.nx * y] = total;
            }
        }
    });
    out
}

fn window_len(i: usize, r: usize, n: usize) -> u64 {
    ((i + r).min(n - 1) - i.saturating_sub(r) + 1) as u64
}

/// Mean and population variance over the cubic window of side `2r+1`,
/// clipped at the borders.
pub fn local_stats(v: &GrayVolume, radius: usize) -> Result<(RealVolume, RealVolume)> {
    if radius < 1 {
        return Err(Error::InvalidParameter("local window radius must be >= 1".into()));
    }
    let d = v.dims();
    let vals: Vec<u64> = v.voxels().iter().map(|&b| u64::from(b)).collect();
    let sq: Vec<u64> = vals.iter().map(|&b| b * b).collect();
    let sum = (0..3).fold(vals, |acc, axis| box_sum_axis(&acc, d, axis, radius));
    let sum_sq = (0..3).fold(sq, |acc, axis| box_sum_axis(&acc, d, axis, radius));

    let mut mean = vec![0.0; d.len()];
    let mut var = vec![0.0; d.len()];
    for (i, (m, s2)) in mean.iter_mut().zip(var.iter_mut()).enumerate() {
        let (x, y, z) = d.coords(i);
        let n = window_len(x, radius, d.nx) * window_len(y, radius, d.ny) * window_len(z, radius, d.nz);
        let (s, q) = (u128::from(sum[i]), u128::from(sum_sq[i]));
        let n = u128::from(n);
        *m = s as f64 / n as f64;
        // n*q - s^2 >= 0 by Cauchy-Schwarz, exact in integers
        *s2 = (n * q - s * s) as f64 / (n * n) as f64;
    }
    Ok((
        RealVolume { dims: d, data: mean },
        RealVolume { dims: d, data: var },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_volume(dims: Dims, seed: u64) -> GrayVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayVolume::new(dims, (0..dims.len()).map(|_| rng.random()).collect()).unwrap()
    }

    /// Direct (non-separable) 3-D convolution with the outer-product kernel.
    fn direct_blur(v: &GrayVolume, sigma: f64) -> Vec<f64> {
        let k = gaussian_kernel(sigma);
        let h = (k.len() / 2) as i64;
        let d = v.dims();
        let clamp = |i: i64, n: usize| i.clamp(0, n as i64 - 1) as usize;
        let mut out = Vec::with_capacity(d.len());
        for z in 0..d.nz as i64 {
            for y in 0..d.ny as i64 {
                for x in 0..d.nx as i64 {
                    let mut acc = 0.0;
                    for (c, wz) in k.iter().enumerate() {
                        for (b, wy) in k.iter().enumerate() {
                            for (a, wx) in k.iter().enumerate() {
                                let xx = clamp(x + a as i64 - h, d.nx);
                                let yy = clamp(y + b as i64 - h, d.ny);
                                let zz = clamp(z + c as i64 - h, d.nz);
                                acc += wx * wy * wz * f64::from(v.get(xx, yy, zz));
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
        out
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn kernel_is_normalized_with_expected_width() {
        for s in [0.5, 1.0, 2.0, 4.0] {
            let k = gaussian_kernel(s);
            assert_eq!(k.len(), 2 * (3.0 * s).ceil() as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_volume_stays_constant() {
        let v = GrayVolume::filled(Dims::new(9, 7, 5).unwrap(), 128);
        let b = gaussian_blur(&v, 2.0).unwrap();
        assert!(b.data.iter().all(|&x| x == 128.0));
    }

    #[test]
    fn sigma_zero_is_identity() {
        let v = random_volume(Dims::new(4, 3, 2).unwrap(), 1);
        let b = gaussian_blur(&v, 0.0).unwrap();
        assert_eq!(b, v.to_real());
        assert!(gaussian_blur(&v, -1.0).is_err());
        assert!(gaussian_blur(&v, f64::NAN).is_err());
    }

    #[test]
    fn impulse_line_matches_direct_convolution() {
        let v = GrayVolume::new(Dims::new(5, 1, 1).unwrap(), vec![0, 0, 255, 0, 0]).unwrap();
        let b = gaussian_blur(&v, 1.0).unwrap();
        assert!(max_abs_diff(&b.data, &direct_blur(&v, 1.0)) < 1e-9);
    }

    #[test]
    fn separable_equals_direct_3d() {
        for (i, s) in [0.5, 1.0, 2.0].into_iter().enumerate() {
            let v = random_volume(Dims::new(8, 7, 6).unwrap(), 10 + i as u64);
            let b = gaussian_blur(&v, s).unwrap();
            assert!(max_abs_diff(&b.data, &direct_blur(&v, s)) < 1e-9, "sigma {s}");
        }
    }

    #[test]
    fn dog_matches_composed_oracle() {
        let v = random_volume(Dims::new(8, 8, 8).unwrap(), 3);
        let dog = difference_of_gaussians(&v, 1.0, 2.0).unwrap();
        let oracle: Vec<f64> = direct_blur(&v, 1.0)
            .iter()
            .zip(direct_blur(&v, 2.0))
            .map(|(a, b)| a - b)
            .collect();
        assert!(max_abs_diff(&dog.data, &oracle) < 1e-9);

        let a = gaussian_blur(&v, 1.0).unwrap();
        let b = gaussian_blur(&v, 2.0).unwrap();
        let direct: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect();
        assert!(max_abs_diff(&dog.data, &direct) < 1e-12);
    }

    #[test]
    fn dog_of_constant_is_exactly_zero() {
        let v = GrayVolume::filled(Dims::new(6, 6, 6).unwrap(), 77);
        let dog = difference_of_gaussians(&v, 1.0, 4.0).unwrap();
        assert!(dog.data.iter().all(|&x| x == 0.0));
        assert!(difference_of_gaussians(&v, 2.0, 1.0).is_err());
        assert!(difference_of_gaussians(&v, 0.0, 1.0).is_err());
    }

    /// Central differences written out per voxel, independent of `gradient_norm`.
    fn fd_oracle(v: &GrayVolume) -> Vec<f64> {
        let d = v.dims();
        let f = |x: usize, y: usize, z: usize| f64::from(v.get(x, y, z));
        let partial = |i: usize, n: usize, at: &dyn Fn(usize) -> f64| -> f64 {
            if n < 2 {
                0.0
            } else if i == 0 {
                at(1) - at(0)
            } else if i + 1 == n {
                at(n - 1) - at(n - 2)
            } else {
                (at(i + 1) - at(i - 1)) / 2.0
            }
        };
        let mut out = Vec::new();
        for z in 0..d.nz {
            for y in 0..d.ny {
                for x in 0..d.nx {
                    let gx = partial(x, d.nx, &|i| f(i, y, z));
                    let gy = partial(y, d.ny, &|i| f(x, i, z));
                    let gz = partial(z, d.nz, &|i| f(x, y, i));
                    out.push((gx * gx + gy * gy + gz * gz).sqrt());
                }
            }
        }
        out
    }

    #[test]
    fn gradient_of_constant_and_ramp() {
        let d = Dims::new(6, 5, 4).unwrap();
        let c = gradient_magnitude(&GrayVolume::filled(d, 200), 1.0).unwrap();
        assert!(c.data.iter().all(|&x| x == 0.0));
        let ramp = GrayVolume::from_fn(d, |x, _, _| (10 * x) as u8);
        let g = gradient_magnitude(&ramp, 0.0).unwrap();
        for z in 0..d.nz {
            for y in 0..d.ny {
                for x in 1..d.nx - 1 {
                    assert_eq!(g.get(x, y, z), 10.0);
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_difference_oracle() {
        let v = random_volume(Dims::new(6, 6, 6).unwrap(), 5);
        let g = gradient_magnitude(&v, 0.0).unwrap();
        assert!(max_abs_diff(&g.data, &fd_oracle(&v)) < 1e-9);
        assert!(gradient_magnitude(&v, -0.5).is_err());
    }

    /// Window statistics by enumerating every voxel of the clipped window.
    fn window_oracle(v: &GrayVolume, r: usize, x: usize, y: usize, z: usize) -> (f64, f64) {
        let d = v.dims();
        let mut vals = Vec::new();
        for zz in z.saturating_sub(r)..=(z + r).min(d.nz - 1) {
            for yy in y.saturating_sub(r)..=(y + r).min(d.ny - 1) {
                for xx in x.saturating_sub(r)..=(x + r).min(d.nx - 1) {
                    vals.push(f64::from(v.get(xx, yy, zz)));
                }
            }
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var)
    }

    #[test]
    fn local_stats_constant_and_impulse() {
        let d = Dims::new(7, 7, 7).unwrap();
        let (m, v) = local_stats(&GrayVolume::filled(d, 42), 2).unwrap();
        assert!(m.data.iter().all(|&x| x == 42.0));
        assert!(v.data.iter().all(|&x| x == 0.0));

        let mut imp = GrayVolume::filled(d, 10);
        imp.set(3, 3, 3, 235);
        let (m, v) = local_stats(&imp, 1).unwrap();
        let (om, ov) = window_oracle(&imp, 1, 3, 3, 3);
        assert!((m.get(3, 3, 3) - om).abs() < 1e-9);
        assert!((m.get(3, 3, 3) - (26.0 * 10.0 + 235.0) / 27.0).abs() < 1e-9);
        assert!((v.get(3, 3, 3) - ov).abs() < 1e-9);
        assert!(local_stats(&imp, 0).is_err());
    }

    #[test]
    fn local_stats_match_enumeration_everywhere() {
        let v = random_volume(Dims::new(6, 5, 4).unwrap(), 9);
        let (m, var) = local_stats(&v, 2).unwrap();
        let d = v.dims();
        for i in 0..d.len() {
            let (x, y, z) = d.coords(i);
            let (om, ov) = window_oracle(&v, 2, x, y, z);
            assert!((m.data[i] - om).abs() < 1e-9);
            assert!((var.data[i] - ov).abs() < 1e-9);
            assert!(var.data[i] >= 0.0);
        }
    }

    #[test]
    fn dog_is_linear() {
        let v = random_volume(Dims::new(7, 6, 5).unwrap(), 21).to_real();
        for a in [-2.5, 0.3, 7.0] {
            let scaled = RealVolume {
                dims: v.dims,
                data: v.data.iter().map(|x| a * x).collect(),
            };
            let lhs = difference_of_gaussians_real(&scaled, 1.0, 2.0).unwrap();
            let rhs = difference_of_gaussians_real(&v, 1.0, 2.0).unwrap();
            let rhs: Vec<f64> = rhs.data.iter().map(|x| a * x).collect();
            assert!(max_abs_diff(&lhs.data, &rhs) < 1e-9);
        }
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let v = random_volume(Dims::new(9, 8, 7).unwrap(), 4);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    (
                        gaussian_blur(&v, 1.5).unwrap(),
                        gradient_magnitude(&v, 1.0).unwrap(),
                        local_stats(&v, 2).unwrap(),
                    )
                })
        };
        assert_eq!(run(1), run(4));
    }
}
