//! Reference convolutions.
//!
//! Everything here is a plain loop nest over a zero-padded copy of the
//! input, so every kernel tap is multiplied for every output voxel (padding
//! included). These are the oracles the fast paths are checked against.
//!
//! Orientation is cross-correlation, no kernel flip:
//! `y[b,n,t,y,x] = sum_{c,k,r,s} d[b,c,t*st+k, y*sy+r, x*sx+s] * g[n,c,k,r,s]`
//! over the channels of `n`'s group, with `d` zero-padded.

use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Dims, Tensor5};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    /// Zero padding on both sides of (time, height, width).
    pub pad: [usize; 3],
    pub stride: [usize; 3],
    pub groups: usize,
}

impl Default for ConvGeometry {
    fn default() -> Self {
        Self { pad: [0; 3], stride: [1; 3], groups: 1 }
    }
}

impl ConvGeometry {
    pub fn with_pad(pad: [usize; 3]) -> Self {
        Self { pad, ..Self::default() }
    }

    /// Stride 1, padding `k / 2` per axis. Preserves extents for odd kernels.
    pub fn same(kernel: [usize; 3]) -> Self {
        Self::with_pad([kernel[0] / 2, kernel[1] / 2, kernel[2] / 2])
    }

    pub fn groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    pub fn is_unit_stride(&self) -> bool {
        self.stride == [1, 1, 1]
    }

    /// `floor((in + 2 pad - k) / stride) + 1` per axis.
    pub fn output_extents(&self, input: [usize; 3], kernel: [usize; 3]) -> Result<[usize; 3]> {
        let mut out = [0; 3];
        for axis in 0..3 {
            if self.stride[axis] == 0 {
                return shape_err("stride must be positive");
            }
            let span = input[axis] + 2 * self.pad[axis];
            if kernel[axis] == 0 || span < kernel[axis] {
                return shape_err(format!(
                    "kernel extent {} does not fit padded input extent {span} on axis {axis}",
                    kernel[axis]
                ));
            }
            out[axis] = (span - kernel[axis]) / self.stride[axis] + 1;
        }
        Ok(out)
    }

    pub(crate) fn check_channels(&self, in_channels: usize, out_channels: usize) -> Result<()> {
        if self.groups == 0 || !in_channels.is_multiple_of(self.groups) || !out_channels.is_multiple_of(self.groups) {
            return shape_err(format!(
                "groups {} must divide input channels {in_channels} and output channels {out_channels}",
                self.groups
            ));
        }
        Ok(())
    }
}

fn spatial(d: Dims) -> [usize; 3] {
    [d[2], d[3], d[4]]
}

/// Validates operands and returns the output dims.
fn plan_conv<T: Scalar>(input: &Tensor5<T>, kernels: &Tensor5<T>, geom: &ConvGeometry) -> Result<Dims> {
    let [nb, c, ..] = input.dims();
    let [n, cg, ..] = kernels.dims();
    geom.check_channels(c, n)?;
    if cg * geom.groups != c {
        return shape_err(format!("kernels expect {cg} channels per group x {} groups, input has {c}", geom.groups));
    }
    let [t, h, w] = geom.output_extents(spatial(input.dims()), spatial(kernels.dims()))?;
    Ok([nb, n, t, h, w])
}

pub fn conv3d_direct<T: Scalar>(input: &Tensor5<T>, kernels: &Tensor5<T>, geom: &ConvGeometry) -> Result<Tensor5<T>> {
    let out_dims = plan_conv(input, kernels, geom)?;
    let [nb, n, to, ho, wo] = out_dims;
    let [_, cg, k, r, s] = kernels.dims();
    let per_group = n / geom.groups;
    let padded = input.zero_pad(geom.pad)?;
    let [st, sy, sx] = geom.stride;
    let mut out = Tensor5::zeros(out_dims)?;
    let kd = kernels.data();
    let pd = padded.data();
    let pdims = padded.dims();
    let (ph, pw) = (pdims[3], pdims[4]);
    let mut o = 0;
    for b in 0..nb {
        for oc in 0..n {
            let c0 = (oc / per_group) * cg;
            for ot in 0..to {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = T::zero();
                        for ci in 0..cg {
                            let plane = padded.offset([b, c0 + ci, 0, 0, 0]);
                            let kbase = (oc * cg + ci) * k * r * s;
                            for kt in 0..k {
                                for ky in 0..r {
                                    let row = plane + ((ot * st + kt) * ph + oy * sy + ky) * pw + ox * sx;
                                    let krow = kbase + (kt * r + ky) * s;
                                    for kx in 0..s {
                                        acc += pd[row + kx] * kd[krow + kx];
                                    }
                                }
                            }
                        }
                        out.data_mut()[o] = acc;
                        o += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Temporal-only convolution, kernels `[M, C, K, 1, 1]`.
pub fn conv1d_temporal<T: Scalar>(input: &Tensor5<T>, kernels: &Tensor5<T>, geom: &ConvGeometry) -> Result<Tensor5<T>> {
    let [_, _, _, r, s] = kernels.dims();
    if r != 1 || s != 1 {
        return shape_err(format!("temporal kernels must be K x 1 x 1, got {:?}", kernels.dims()));
    }
    if geom.groups != 1 {
        return Err(Error::Unsupported("grouped temporal convolution".into()));
    }
    let out_dims = plan_conv(input, kernels, geom)?;
    let [nb, m, to, ho, wo] = out_dims;
    let [_, c, k, ..] = kernels.dims();
    let padded = input.zero_pad(geom.pad)?;
    let [st, sy, sx] = geom.stride;
    let [_, _, pt, ph, pw] = padded.dims();
    let frame = ph * pw;
    let kd = kernels.data();
    let pd = padded.data();
    let mut out = Tensor5::zeros(out_dims)?;
    let mut o = 0;
    for b in 0..nb {
        for oc in 0..m {
            for ot in 0..to {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let pix = (oy * sy) * pw + ox * sx;
                        let mut acc = T::zero();
                        for ci in 0..c {
                            let base = ((b * c + ci) * pt + ot * st) * frame + pix;
                            let kb = (oc * c + ci) * k;
                            for kt in 0..k {
                                acc += pd[base + kt * frame] * kd[kb + kt];
                            }
                        }
                        out.data_mut()[o] = acc;
                        o += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Frame-by-frame depthwise spatial convolution, kernels `[M, 1, 1, R, S]`,
/// `geom.groups == M`.
pub fn conv2d_depthwise<T: Scalar>(
    input: &Tensor5<T>,
    kernels: &Tensor5<T>,
    geom: &ConvGeometry,
) -> Result<Tensor5<T>> {
    let [_, m, ..] = input.dims();
    let [km, one, k, r, s] = kernels.dims();
    if geom.groups != m || km != m || one != 1 {
        return shape_err(format!(
            "depthwise needs groups == channels == kernel count, got groups {}, channels {m}, kernels {km}x{one}",
            geom.groups
        ));
    }
    if k != 1 {
        return shape_err(format!("depthwise kernels must have temporal extent 1, got {k}"));
    }
    let out_dims = plan_conv(input, kernels, geom)?;
    let [nb, _, to, ho, wo] = out_dims;
    let padded = input.zero_pad(geom.pad)?;
    let [st, sy, sx] = geom.stride;
    let [_, _, pt, ph, pw] = padded.dims();
    let kd = kernels.data();
    let pd = padded.data();
    let mut out = Tensor5::zeros(out_dims)?;
    let mut o = 0;
    for b in 0..nb {
        for ch in 0..m {
            let kb = ch * r * s;
            for ot in 0..to {
                let plane = ((b * m + ch) * pt + ot * st) * ph * pw;
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = T::zero();
                        for ky in 0..r {
                            let row = plane + (oy * sy + ky) * pw + ox * sx;
                            for kx in 0..s {
                                acc += pd[row + kx] * kd[kb + ky * s + kx];
                            }
                        }
                        out.data_mut()[o] = acc;
                        o += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// 1x1x1 channel mixing, kernels `[N, M, 1, 1, 1]`.
pub fn conv_pointwise<T: Scalar>(input: &Tensor5<T>, kernels: &Tensor5<T>) -> Result<Tensor5<T>> {
    let [nb, m, t, h, w] = input.dims();
    let [n, km, k, r, s] = kernels.dims();
    if (k, r, s) != (1, 1, 1) {
        return shape_err(format!("pointwise kernels must be 1x1x1, got {:?}", kernels.dims()));
    }
    if km != m {
        return shape_err(format!("pointwise kernels expect {km} channels, input has {m}"));
    }
    let vox = t * h * w;
    let kd = kernels.data();
    let id = input.data();
    let mut out = Tensor5::zeros([nb, n, t, h, w])?;
    let od = out.data_mut();
    for b in 0..nb {
        for oc in 0..n {
            let dst = (b * n + oc) * vox;
            for v in 0..vox {
                let mut acc = T::zero();
                for ci in 0..m {
                    acc += id[(b * m + ci) * vox + v] * kd[oc * m + ci];
                }
                od[dst + v] = acc;
            }
        }
    }
    Ok(out)
}
