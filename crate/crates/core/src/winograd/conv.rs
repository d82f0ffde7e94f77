//! Full-feature-map Winograd convolutions (stride 1).
//!
//! Each axis that is tiled gets its input zero-padded on the right up to a
//! whole number of tiles, every tile produces `m` outputs per axis, and the
//! surplus is cropped. Products are summed over input channels in ascending
//! order in the transform domain, so each tile needs one output transform per
//! output channel.

use super::plan::{HybridPlan, WinogradPlan};
use super::transform::PlanTransforms;
use crate::blocks::FsbWeights;
use crate::direct::{conv_pointwise, ConvGeometry};
use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor5;

/// Output extent and tile count along one axis.
fn tiling(input: usize, pad: usize, k: usize, m: usize) -> Result<(usize, usize)> {
    let span = input + 2 * pad;
    if span < k {
        return shape_err(format!("kernel extent {k} does not fit padded extent {span}"));
    }
    let out = span - k + 1;
    Ok((out, out.div_ceil(m)))
}

fn check_plan(plan: &WinogradPlan, k: usize, what: &str) -> Result<()> {
    if plan.r() != k {
        return shape_err(format!("{what}: plan F({},{}) does not match kernel extent {k}", plan.m(), plan.r()));
    }
    Ok(())
}

/// Temporal convolution of `input [Nb, C, T, H, W]` with `kernels
/// [M, C, K, 1, 1]` via F(m, K), zero padding `pad_t` frames on each side.
pub fn wino_conv1d_temporal<T: Scalar>(
    input: &Tensor5<T>,
    kernels: &Tensor5<T>,
    plan: &WinogradPlan,
    pad_t: usize,
) -> Result<Tensor5<T>> {
    let [nb, c, t, h, w] = input.dims();
    let [mo, kc, k, kr, ks] = kernels.dims();
    if (kr, ks) != (1, 1) {
        return shape_err(format!("temporal kernels must be K x 1 x 1, got {:?}", kernels.dims()));
    }
    if kc != c {
        return shape_err(format!("kernels expect {kc} channels, input has {c}"));
    }
    check_plan(plan, k, "temporal")?;
    let tf = PlanTransforms::<T>::new(plan);
    let (m, n) = (tf.m, tf.n);
    let (t_out, tiles) = tiling(t, pad_t, k, m)?;
    let hw = h * w;
    let padded = input.zero_pad_to([pad_t, 0, 0], [tiles * m + k - 1, h, w])?;
    let tp = padded.dims()[2];

    // U[mo][c][n]
    let mut u = Vec::with_capacity(mo * c * n);
    let mut scratch = Vec::new();
    let mut buf = Vec::new();
    for g in kernels.data().chunks_exact(k) {
        tf.g.apply_cube(g, 1, 1, &mut scratch, &mut buf);
        u.extend_from_slice(&buf);
    }

    let mut out = Tensor5::zeros([nb, mo, t_out, h, w])?;
    let mut v = vec![T::zero(); c * n * hw];
    let mut acc = vec![T::zero(); n * hw];
    let mut y = Vec::new();
    let pd = padded.data();
    for b in 0..nb {
        for tile in 0..tiles {
            let t0 = tile * m;
            for ci in 0..c {
                let base = ((b * c + ci) * tp + t0) * hw;
                let mut shape = [n, hw];
                tf.bt.apply_axis(&pd[base..base + n * hw], &mut shape, 0, &mut buf);
                v[ci * n * hw..(ci + 1) * n * hw].copy_from_slice(&buf);
            }
            let valid = m.min(t_out - t0);
            for oc in 0..mo {
                acc.iter_mut().for_each(|a| *a = T::zero());
                for ci in 0..c {
                    let uk = &u[(oc * c + ci) * n..(oc * c + ci + 1) * n];
                    let vc = &v[ci * n * hw..(ci + 1) * n * hw];
                    for (kk, &coef) in uk.iter().enumerate() {
                        let lane = &vc[kk * hw..(kk + 1) * hw];
                        acc[kk * hw..(kk + 1) * hw].iter_mut().zip(lane).for_each(|(a, &x)| *a += coef * x);
                    }
                }
                let mut shape = [n, hw];
                tf.at.apply_axis(&acc, &mut shape, 0, &mut y);
                let dst = out.offset([b, oc, t0, 0, 0]);
                out.data_mut()[dst..dst + valid * hw].copy_from_slice(&y[..valid * hw]);
            }
        }
    }
    Ok(out)
}

/// Frame-by-frame depthwise convolution of `input [Nb, M, T, H, W]` with
/// square kernels `[M, 1, 1, R, R]` via F(m x m, R x R).
pub fn wino_conv2d_depthwise<T: Scalar>(
    input: &Tensor5<T>,
    kernels: &Tensor5<T>,
    plan: &WinogradPlan,
    pad_hw: [usize; 2],
) -> Result<Tensor5<T>> {
    let [nb, ch, t, h, w] = input.dims();
    let [km, one, kt, r, s] = kernels.dims();
    if r != s {
        return Err(Error::Unsupported(format!("2D Winograd needs square kernels, got {r}x{s}")));
    }
    if km != ch || one != 1 || kt != 1 {
        return shape_err(format!("depthwise kernels must be [{ch}, 1, 1, R, R], got {:?}", kernels.dims()));
    }
    check_plan(plan, r, "spatial")?;
    let tf = PlanTransforms::<T>::new(plan);
    let (m, n) = (tf.m, tf.n);
    let (h_out, th) = tiling(h, pad_hw[0], r, m)?;
    let (w_out, tw) = tiling(w, pad_hw[1], r, m)?;
    let padded = input.zero_pad_to([0, pad_hw[0], pad_hw[1]], [t, th * m + r - 1, tw * m + r - 1])?;
    let [_, _, _, hp, wp] = padded.dims();

    let mut scratch = Vec::new();
    let mut buf = Vec::new();
    let mut u = Vec::with_capacity(ch * n * n);
    for g in kernels.data().chunks_exact(r * r) {
        tf.g.apply_cube(g, 2, 1, &mut scratch, &mut buf);
        u.extend_from_slice(&buf);
    }

    let mut out = Tensor5::zeros([nb, ch, t, h_out, w_out])?;
    let pd = padded.data();
    let mut tile_in = vec![T::zero(); n * n];
    let mut y = Vec::new();
    for b in 0..nb {
        for c in 0..ch {
            let uc = &u[c * n * n..(c + 1) * n * n];
            for ti in 0..t {
                let plane = ((b * ch + c) * t + ti) * hp * wp;
                for ty in 0..th {
                    for tx in 0..tw {
                        let (y0, x0) = (ty * m, tx * m);
                        for i in 0..n {
                            let row = plane + (y0 + i) * wp + x0;
                            tile_in[i * n..(i + 1) * n].copy_from_slice(&pd[row..row + n]);
                        }
                        tf.bt.apply_cube(&tile_in, 2, 1, &mut scratch, &mut buf);
                        buf.iter_mut().zip(uc).for_each(|(v, &g)| *v = g * *v);
                        tf.at.apply_cube(&buf, 2, 1, &mut scratch, &mut y);
                        for i in 0..m.min(h_out - y0) {
                            let cols = m.min(w_out - x0);
                            let dst = out.offset([b, c, ti, y0 + i, x0]);
                            out.data_mut()[dst..dst + cols].copy_from_slice(&y[i * m..i * m + cols]);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Full 3D convolution with cubic kernels `[N, C, K, K, K]` via
/// F(m x m x m, K x K x K).
pub fn wino_conv3d<T: Scalar>(
    input: &Tensor5<T>,
    kernels: &Tensor5<T>,
    plan: &WinogradPlan,
    pad: [usize; 3],
) -> Result<Tensor5<T>> {
    let [nb, c, t, h, w] = input.dims();
    let [no, kc, k, r, s] = kernels.dims();
    if k != r || r != s {
        return Err(Error::Unsupported(format!("3D Winograd needs cubic kernels, got {k}x{r}x{s}")));
    }
    if kc != c {
        return shape_err(format!("kernels expect {kc} channels, input has {c}"));
    }
    check_plan(plan, k, "3D")?;
    let tf = PlanTransforms::<T>::new(plan);
    let (m, n) = (tf.m, tf.n);
    let n3 = n * n * n;
    let (t_out, tt) = tiling(t, pad[0], k, m)?;
    let (h_out, th) = tiling(h, pad[1], k, m)?;
    let (w_out, tw) = tiling(w, pad[2], k, m)?;
    let padded = input.zero_pad_to(pad, [tt * m + k - 1, th * m + k - 1, tw * m + k - 1])?;
    let [_, _, tp, hp, wp] = padded.dims();

    let mut scratch = Vec::new();
    let mut buf = Vec::new();
    let mut u = Vec::with_capacity(no * c * n3);
    for g in kernels.data().chunks_exact(k * k * k) {
        tf.g.apply_cube(g, 3, 1, &mut scratch, &mut buf);
        u.extend_from_slice(&buf);
    }

    let mut out = Tensor5::zeros([nb, no, t_out, h_out, w_out])?;
    let pd = padded.data();
    let mut cube = vec![T::zero(); n3];
    let mut v = vec![T::zero(); c * n3];
    let mut acc = vec![T::zero(); n3];
    let mut y = Vec::new();
    for b in 0..nb {
        for zt in 0..tt {
            for zy in 0..th {
                for zx in 0..tw {
                    let (t0, y0, x0) = (zt * m, zy * m, zx * m);
                    for ci in 0..c {
                        let vol = (b * c + ci) * tp * hp * wp;
                        for i in 0..n {
                            for j in 0..n {
                                let src = vol + ((t0 + i) * hp + y0 + j) * wp + x0;
                                cube[(i * n + j) * n..(i * n + j + 1) * n].copy_from_slice(&pd[src..src + n]);
                            }
                        }
                        tf.bt.apply_cube(&cube, 3, 1, &mut scratch, &mut buf);
                        v[ci * n3..(ci + 1) * n3].copy_from_slice(&buf);
                    }
                    let (vt, vy, vx) = (m.min(t_out - t0), m.min(h_out - y0), m.min(w_out - x0));
                    for oc in 0..no {
                        acc.iter_mut().for_each(|a| *a = T::zero());
                        for ci in 0..c {
                            let uk = &u[(oc * c + ci) * n3..(oc * c + ci + 1) * n3];
                            let vc = &v[ci * n3..(ci + 1) * n3];
                            for ((a, &g), &x) in acc.iter_mut().zip(uk).zip(vc) {
                                *a += g * x;
                            }
                        }
                        tf.at.apply_cube(&acc, 3, 1, &mut scratch, &mut y);
                        for i in 0..vt {
                            for j in 0..vy {
                                let dst = out.offset([b, oc, t0 + i, y0 + j, x0]);
                                let src = (i * m + j) * m;
                                out.data_mut()[dst..dst + vx].copy_from_slice(&y[src..src + vx]);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// FSB forward with F(m1, K) on the temporal stage, F(m2 x m2, R x R) on the
/// depthwise stage and a plain pointwise stage.
pub fn hfa_fsb_forward<T: Scalar>(
    input: &Tensor5<T>,
    weights: &FsbWeights<T>,
    plan: &HybridPlan,
    geom: &ConvGeometry,
) -> Result<Tensor5<T>> {
    if !geom.is_unit_stride() {
        return Err(Error::Unsupported("hybrid FSB path is stride-1 only".into()));
    }
    let [k, r, s] = weights.kernel_extents();
    if plan.temporal.r() != k || plan.spatial.r() != r || r != s {
        return shape_err(format!(
            "hybrid plan F({},{}) x F({}x{},{}x{}) does not match FSB kernels {k}x{r}x{s}",
            plan.temporal.m(),
            plan.temporal.r(),
            plan.spatial.m(),
            plan.spatial.m(),
            plan.spatial.r(),
            plan.spatial.r()
        ));
    }
    let mid = wino_conv1d_temporal(input, &weights.stage1, &plan.temporal, geom.pad[0])?;
    let mid = wino_conv2d_depthwise(&mid, &weights.stage2, &plan.spatial, [geom.pad[1], geom.pad[2]])?;
    conv_pointwise(&mid, &weights.stage3)
}
