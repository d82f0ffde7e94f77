//! Fully separable block: a `K x 1 x 1` temporal bottleneck into `M`
//! channels, an `R x S` depthwise spatial stage, and a pointwise projection
//! to `N` channels. No nonlinearity between stages.

use crate::direct::{conv1d_temporal, conv2d_depthwise, conv_pointwise, ConvGeometry};
use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor5;

#[derive(Debug, Clone, PartialEq)]
pub struct FsbWeights<T> {
    /// `[M, C, K, 1, 1]`
    pub stage1: Tensor5<T>,
    /// `[M, 1, 1, R, S]`, one kernel per intermediate channel.
    pub stage2: Tensor5<T>,
    /// `[N, M, 1, 1, 1]`
    pub stage3: Tensor5<T>,
}

impl<T: Scalar> FsbWeights<T> {
    pub fn new(stage1: Tensor5<T>, stage2: Tensor5<T>, stage3: Tensor5<T>) -> Result<Self> {
        let [m, _, _, r1, s1] = stage1.dims();
        let [m2, one_a, one_b, ..] = stage2.dims();
        let [_, m3, k3, r3, s3] = stage3.dims();
        if (r1, s1) != (1, 1) {
            return shape_err(format!("stage 1 kernels must be K x 1 x 1, got {:?}", stage1.dims()));
        }
        if m2 != m || (one_a, one_b) != (1, 1) {
            return shape_err(format!("stage 2 kernels must be [{m}, 1, 1, R, S], got {:?}", stage2.dims()));
        }
        if m3 != m || (k3, r3, s3) != (1, 1, 1) {
            return shape_err(format!("stage 3 kernels must be [N, {m}, 1, 1, 1], got {:?}", stage3.dims()));
        }
        Ok(Self { stage1, stage2, stage3 })
    }

    /// Seeded uniform weights for `c -> m -> n` channels with kernel `[K, R, S]`.
    pub fn random(c: usize, m: usize, n: usize, kernel: [usize; 3], seed: u64) -> Result<Self> {
        let [k, r, s] = kernel;
        Self::new(
            Tensor5::random([m, c, k, 1, 1], seed)?,
            Tensor5::random([m, 1, 1, r, s], seed.wrapping_add(1))?,
            Tensor5::random([n, m, 1, 1, 1], seed.wrapping_add(2))?,
        )
    }

    pub fn in_channels(&self) -> usize {
        self.stage1.dims()[1]
    }

    pub fn mid_channels(&self) -> usize {
        self.stage1.dims()[0]
    }

    pub fn out_channels(&self) -> usize {
        self.stage3.dims()[0]
    }

    /// `[K, R, S]`
    pub fn kernel_extents(&self) -> [usize; 3] {
        let d2 = self.stage2.dims();
        [self.stage1.dims()[2], d2[3], d2[4]]
    }

    /// `M*C*K + M*R*S + N*M`
    pub fn param_count(&self) -> usize {
        self.stage1.len() + self.stage2.len() + self.stage3.len()
    }
}

/// Reference FSB forward. `geom.pad` is split per stage: time padding for the
/// temporal stage, height and width padding for the depthwise stage.
pub fn fsb_forward<T: Scalar>(input: &Tensor5<T>, w: &FsbWeights<T>, geom: &ConvGeometry) -> Result<Tensor5<T>> {
    if !geom.is_unit_stride() {
        return Err(Error::Unsupported("FSB stages are stride-1; pool separately".into()));
    }
    let [pt, ph, pw] = geom.pad;
    let mid = conv1d_temporal(input, &w.stage1, &ConvGeometry::with_pad([pt, 0, 0]))?;
    let mid = conv2d_depthwise(&mid, &w.stage2, &ConvGeometry::with_pad([0, ph, pw]).groups(w.mid_channels()))?;
    conv_pointwise(&mid, &w.stage3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{count_ops, Counted};
    use crate::tensor::scaled_rel_error;
    use crate::winograd::{hfa_fsb_forward, HybridPlan};

    fn identity_weights(c: usize) -> FsbWeights<f64> {
        let mut s1 = Tensor5::zeros([c, c, 3, 1, 1]).unwrap();
        let mut s2 = Tensor5::zeros([c, 1, 1, 3, 3]).unwrap();
        let mut s3 = Tensor5::zeros([c, c, 1, 1, 1]).unwrap();
        for i in 0..c {
            s1[[i, i, 1, 0, 0]] = 1.0;
            s2[[i, 0, 0, 1, 1]] = 1.0;
            s3[[i, i, 0, 0, 0]] = 1.0;
        }
        FsbWeights::new(s1, s2, s3).unwrap()
    }

    #[test]
    fn delta_stages_are_identity() {
        let x = Tensor5::<f64>::random([2, 4, 5, 6, 7], 1).unwrap();
        let y = fsb_forward(&x, &identity_weights(4), &ConvGeometry::same([3, 3, 3])).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_stage_zeroes_output() {
        let x = Tensor5::<f64>::random([1, 3, 4, 5, 5], 2).unwrap();
        let base = FsbWeights::<f64>::random(3, 4, 5, [3, 3, 3], 3).unwrap();
        for stage in 0..3 {
            let mut w = base.clone();
            let t = match stage {
                0 => &mut w.stage1,
                1 => &mut w.stage2,
                _ => &mut w.stage3,
            };
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
            let y = fsb_forward(&x, &w, &ConvGeometry::same([3, 3, 3])).unwrap();
            assert!(y.data().iter().all(|&v| v == 0.0), "stage {}", stage + 1);
        }
    }

    #[test]
    fn param_count_formula() {
        let w = FsbWeights::<f32>::random(64, 64, 64, [3, 3, 3], 0).unwrap();
        assert_eq!(w.param_count(), 64 * 64 * 3 + 64 * 9 + 64 * 64);
        assert_eq!(w.param_count(), 16_960);
        let w = FsbWeights::<f32>::random(64, 64, 128, [3, 3, 3], 0).unwrap();
        assert_eq!(w.param_count(), 21_056);
    }

    #[test]
    fn rejects_inconsistent_stages() {
        let a = Tensor5::<f64>::zeros([4, 3, 3, 1, 1]).unwrap();
        let b = Tensor5::<f64>::zeros([5, 1, 1, 3, 3]).unwrap();
        let c = Tensor5::<f64>::zeros([2, 4, 1, 1, 1]).unwrap();
        assert!(matches!(FsbWeights::new(a, b, c), Err(Error::Shape(_))));
    }

    #[test]
    fn rejects_strided_geometry() {
        let x = Tensor5::<f64>::zeros([1, 3, 4, 5, 5]).unwrap();
        let w = FsbWeights::<f64>::random(3, 3, 3, [3, 3, 3], 0).unwrap();
        let g = ConvGeometry { stride: [1, 2, 2], ..ConvGeometry::same([3, 3, 3]) };
        assert!(matches!(fsb_forward(&x, &w, &g), Err(Error::Unsupported(_))));
    }

    #[test]
    fn wide_block_matches_hybrid_path() {
        let x = Tensor5::<f64>::random([1, 64, 8, 16, 16], 4).unwrap();
        let w = FsbWeights::<f64>::random(64, 64, 64, [3, 3, 3], 5).unwrap();
        let geom = ConvGeometry::same([3, 3, 3]);
        let direct = fsb_forward(&x, &w, &geom).unwrap();
        let plan = HybridPlan::new(2, 3, 2, 3).unwrap();
        let fast = hfa_fsb_forward(&x, &w, &plan, &geom).unwrap();
        assert!(scaled_rel_error(&fast, &direct).unwrap() <= 1e-10);
    }

    #[test]
    fn depthwise_stage_keeps_channels_apart() {
        // Zeroing intermediate channel j must only change stage-3 inputs from j.
        let x = Tensor5::<f64>::random([1, 3, 4, 5, 5], 6).unwrap();
        let w = FsbWeights::<f64>::random(3, 4, 2, [3, 3, 3], 7).unwrap();
        let full = conv1d_temporal(&x, &w.stage1, &ConvGeometry::with_pad([1, 0, 0])).unwrap();
        let dw = ConvGeometry::with_pad([0, 1, 1]).groups(4);
        let base = conv2d_depthwise(&full, &w.stage2, &dw).unwrap();
        let mut probe = full.clone();
        let vox = 4 * 5 * 5;
        probe.data_mut()[2 * vox..3 * vox].iter_mut().for_each(|v| *v = 0.0);
        let out = conv2d_depthwise(&probe, &w.stage2, &dw).unwrap();
        for ch in 0..4 {
            let same = base.data()[ch * vox..(ch + 1) * vox] == out.data()[ch * vox..(ch + 1) * vox];
            assert_eq!(same, ch != 2, "channel {ch}");
        }
    }

    #[test]
    fn counted_mults_match_stage_formula() {
        let x = Tensor5::<Counted>::random([1, 3, 4, 5, 6], 8).unwrap();
        let w = FsbWeights::<Counted>::random(3, 4, 5, [3, 3, 3], 9).unwrap();
        let (_, ops) = count_ops(|| fsb_forward(&x, &w, &ConvGeometry::same([3, 3, 3])).unwrap());
        assert_eq!(ops.mults, ((4 * 3 * 3 + 4 * 9 + 5 * 4) * 4 * 5 * 6) as u64);
    }
}
