//! Philox4x32-10 counter-based generator.
//!
//! Every Gaussian draw in the simulators is addressed by
//! `(seed, path, step, coordinate)`, so results do not depend on how paths
//! are scheduled across threads.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

/// Step index reserved for draws made before the first time step.
pub const INITIAL_STEP: u32 = u32::MAX;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = (a as u64) * (b as u64);
    ((p >> 32) as u32, p as u32)
}

#[inline(always)]
fn round(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let (hi0, lo0) = mulhilo(M0, ctr[0]);
    let (hi1, lo1) = mulhilo(M1, ctr[2]);
    [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0]
}

/// Raw Philox4x32 with ten rounds.
#[inline]
pub fn philox4x32(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for r in 0..10 {
        if r > 0 {
            key[0] = key[0].wrapping_add(W0);
            key[1] = key[1].wrapping_add(W1);
        }
        ctr = round(ctr, key);
    }
    ctr
}

#[inline(always)]
fn open_unit(hi: u32, lo: u32) -> f64 {
    // 53 random bits mapped to the open interval (0, 1).
    let bits = (((hi as u64) << 32) | lo as u64) >> 11;
    (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Keyed stream family. Cheap to copy; holds no mutable state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    key: [u32; 2],
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams { key: [seed as u32, (seed >> 32) as u32] }
    }

    /// A derived family for an independent purpose (e.g. a separate experiment arm).
    pub fn fork(&self, tag: u32) -> Self {
        let out = philox4x32([tag, 0x5EED_F0E5, 0, 0], self.key);
        Streams { key: [out[0], out[1]] }
    }

    #[inline]
    fn block(&self, word: u32, step: u32, path: u64) -> [u32; 4] {
        philox4x32([word, step, path as u32, (path >> 32) as u32], self.key)
    }

    /// Two independent uniforms on (0, 1).
    #[inline]
    pub fn uniform_pair(&self, word: u32, step: u32, path: u64) -> (f64, f64) {
        let b = self.block(word, step, path);
        (open_unit(b[0], b[1]), open_unit(b[2], b[3]))
    }

    /// Two independent standard normals (Box–Muller).
    #[inline]
    pub fn normal_pair(&self, word: u32, step: u32, path: u64) -> (f64, f64) {
        let (u1, u2) = self.uniform_pair(word, step, path);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }

    /// Fills `out` with the standard normals of `(path, step)`; coordinate `i`
    /// always receives the same draw regardless of `out.len()`.
    #[inline]
    pub fn fill_normals(&self, path: u64, step: u32, out: &mut [f64]) {
        let mut chunks = out.chunks_exact_mut(2);
        let mut word = 0u32;
        for pair in &mut chunks {
            let (a, b) = self.normal_pair(word, step, path);
            pair[0] = a;
            pair[1] = b;
            word += 1;
        }
        if let [last] = chunks.into_remainder() {
            *last = self.normal_pair(word, step, path).0;
        }
    }
}
