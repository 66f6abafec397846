//! Log-space arithmetic helpers shared by the evaluation kernels.

/// log(exp(a) + exp(b)) without leaving log space.
#[inline(always)]
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + fast_exp(b - a).ln_1p()
    } else {
        b + fast_exp(a - b).ln_1p()
    }
}

/// log Σ exp(x) over a slice; NEG_INFINITY for an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| fast_exp(x - m)).sum();
    m + s.ln()
}

/// x·ln(x) with the limit convention 0·ln(0) = 0.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Compensated (Kahan) accumulator. Merging two accumulators adds both the
/// sums and the corrections, which keeps chunk-parallel reductions stable.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    #[inline(always)]
    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn merge(&mut self, other: Kahan) {
        self.add(other.sum);
        self.add(-other.c);
    }

    #[inline(always)]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

// exp() dominates the flow kernels (one call per sum edge per sample), so we
// use a Cephes-style rational minimax approximation (~1 ulp over the reduced
// range) that the compiler can keep in registers instead of a libm call.
const EXP_C1: f64 = 6.931_457_519_531_25e-1;
const EXP_C2: f64 = 1.428_606_820_309_417_2e-6;
const LOG2E: f64 = std::f64::consts::LOG2_E;

const EXP_P0: f64 = 1.261_771_930_748_105_9e-4;
const EXP_P1: f64 = 3.029_944_077_074_419_6e-2;
const EXP_P2: f64 = 9.999_999_999_999_999_9e-1;
const EXP_Q0: f64 = 3.001_985_051_386_644_6e-6;
const EXP_Q1: f64 = 2.524_483_403_496_841e-3;
const EXP_Q2: f64 = 2.272_655_482_081_550_3e-1;
const EXP_Q3: f64 = 2.0;

/// exp(x) accurate to ~1 ulp, considerably faster than `f64::exp` in tight
/// loops. Returns 0 below the underflow threshold and `inf` above overflow.
#[inline(always)]
pub fn fast_exp(x: f64) -> f64 {
    if x < -708.0 {
        return 0.0;
    }
    if x > 709.0 {
        return f64::INFINITY;
    }
    let n = (x * LOG2E).round();
    let r = x - n * EXP_C1 - n * EXP_C2;
    let rr = r * r;
    let p = r * (EXP_P2 + rr * (EXP_P1 + rr * EXP_P0));
    let q = EXP_Q3 + rr * (EXP_Q2 + rr * (EXP_Q1 + rr * EXP_Q0));
    let e = 1.0 + 2.0 * p / (q - p);
    // scale by 2^n through the exponent bits
    let bits = ((n as i64 + 1023) as u64) << 52;
    e * f64::from_bits(bits)
}
