//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Intervals live in a max-heap keyed by their error estimate; the worst one
//! is bisected until the summed estimate meets `max(abs_tol, rel_tol·|I|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd Kronrod nodes (indices 1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and subdivision budget.
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-10, max_intervals: 2000 }
    }
}

impl QuadConfig {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }

    /// Same budget, tolerances scaled by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        Self { abs_tol: self.abs_tol * factor, rel_tol: self.rel_tol * factor, ..self }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_error: T,
    pub evaluations: usize,
    pub intervals: usize,
}

struct Segment<T> {
    lo: T,
    hi: T,
    value: T,
    error: T,
}

impl<T: Real> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T: Real> Eq for Segment<T> {}
impl<T: Real> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// One 15-point Kronrod evaluation with the embedded 7-point Gauss estimate.
pub fn gauss_kronrod_15<T: Real, F: FnMut(T) -> T>(f: &mut F, lo: T, hi: T) -> (T, T) {
    let half = (hi - lo) * T::lit(0.5);
    let mid = (hi + lo) * T::lit(0.5);
    let fc = f(mid);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let pair = f(mid - dx) + f(mid + dx);
        kronrod = kronrod + pair * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + pair * T::lit(WG[j / 2]);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Integrate `f` over `[lo, hi]`.
pub fn integrate<T: Real, F: FnMut(T) -> T>(f: F, lo: T, hi: T, cfg: QuadConfig) -> Result<QuadResult<T>> {
    integrate_with_breaks(f, &[lo, hi], cfg)
}

/// Integrate over consecutive segments delimited by `breaks` (sorted,
/// at least two entries). Interior breaks mark kinks or narrow peaks.
pub fn integrate_with_breaks<T: Real, F: FnMut(T) -> T>(mut f: F, breaks: &[T], cfg: QuadConfig) -> Result<QuadResult<T>> {
    assert!(breaks.len() >= 2, "need at least one interval");
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0usize;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (value, error) = gauss_kronrod_15(&mut f, w[0], w[1]);
            evaluations += 15;
            heap.push(Segment { lo: w[0], hi: w[1], value, error });
        }
    }
    if heap.is_empty() {
        return Ok(QuadResult { value: T::zero(), abs_error: T::zero(), evaluations, intervals: 0 });
    }
    let abs_tol = T::lit(cfg.abs_tol);
    let rel_tol = T::lit(cfg.rel_tol);
    loop {
        let (total, err) = heap.iter().fold((T::zero(), T::zero()), |(v, e), s| (v + s.value, e + s.error));
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(QuadResult { value: total, abs_error: err, evaluations, intervals: heap.len() });
        }
        let worst = heap.pop().expect("nonempty heap");
        let mid = (worst.lo + worst.hi) * T::lit(0.5);
        if heap.len() + 2 > cfg.max_intervals || mid <= worst.lo || mid >= worst.hi {
            return Err(Error::Quadrature {
                error: err.as_f64(),
                worst_lo: worst.lo.as_f64(),
                worst_hi: worst.hi.as_f64(),
            });
        }
        for (lo, hi) in [(worst.lo, mid), (mid, worst.hi)] {
            let (value, error) = gauss_kronrod_15(&mut f, lo, hi);
            evaluations += 15;
            heap.push(Segment { lo, hi, value, error });
        }
    }
}
