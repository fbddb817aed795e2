//! Counter-based pseudo-random numbers for the background model.
//!
//! Each (seed, frame, pixel) triple names an independent draw stream, so the
//! stream a pixel consumes does not depend on how many draws other pixels
//! made. That keeps model updates bit-identical if the pixel loop is ever
//! reordered or parallelized, and it is what makes whole runs reproducible.
//!
//! The core is the splitmix64 finalizer; passes practical statistical tests
//! and costs a handful of arithmetic ops per draw.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const FRAME_SALT: u64 = 0xA24B_AED4_963E_E407;
const PIXEL_SALT: u64 = 0x9FB2_1C65_1E98_DF25;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw stream for one pixel on one frame.
#[derive(Debug, Clone)]
pub struct PixelRng {
    state: u64,
}

impl PixelRng {
    pub fn new(seed: u64, frame_index: u64, pixel_index: u64) -> Self {
        let mut s = mix(seed ^ GAMMA);
        s = mix(s ^ frame_index.wrapping_mul(FRAME_SALT));
        s = mix(s ^ pixel_index.wrapping_mul(PIXEL_SALT));
        PixelRng { state: s }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero; the modulo bias is
    /// below 2^-32 for the small ranges used here (bank sizes, neighbor
    /// counts) and is accepted in exchange for a fixed draw count.
    #[inline]
    pub fn next_below(&mut self, n: u32) -> u32 {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as u32
    }

    /// Uniform integer in `[lo, hi]`, both ends included.
    #[inline]
    pub fn next_in_range(&mut self, lo: i32, hi: i32) -> i32 {
        debug_assert!(lo <= hi);
        let span = (hi as i64 - lo as i64 + 1) as u64;
        lo + (self.next_u64() % span) as i32
    }
}
