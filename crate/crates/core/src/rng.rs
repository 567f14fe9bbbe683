//! Counter-based random streams.
//!
//! Every uniform is a pure function of `(seed, stream, lane, path, draw)`,
//! computed with the Philox4x32-10 block function. Parallel workers can
//! therefore produce any path in any order and the output never depends on
//! how paths were scheduled.
//!
//! The key carries the seed and the counter carries
//! `[draw block, path lo, path hi ^ (lane << 16), stream]`. Paths are limited
//! to 2^48, lanes to 2^16 and draws per path to 2^33.

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let prod = u64::from(a) * u64::from(b);
    ((prod >> 32) as u32, prod as u32)
}

/// Philox4x32 with 10 rounds.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut ctr = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0];
    }
    ctr
}

/// Maps 64 random bits to the open interval (0, 1).
#[inline]
pub fn bits_to_open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / 4_503_599_627_370_496.0)
}

/// A keyed family of random streams.
///
/// `stream` distinguishes experiments sharing a seed; `lane` distinguishes
/// the independent ingredients of one experiment (claim counts, weights,
/// severities, ...). Within a lane each path owns its own counter range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    stream: u32,
    lane: u16,
}

impl RngStream {
    pub fn new(seed: u64, stream: u32) -> Self {
        Self {
            seed,
            stream,
            lane: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u32 {
        self.stream
    }

    pub fn lane_index(&self) -> u16 {
        self.lane
    }

    /// The same stream restricted to another lane. Lanes never overlap.
    pub fn lane(&self, lane: u16) -> Self {
        Self { lane, ..*self }
    }

    /// A different stream index under the same seed.
    pub fn with_stream(&self, stream: u32) -> Self {
        Self {
            stream,
            lane: 0,
            ..*self
        }
    }

    /// Sequential generator for one path.
    pub fn path(&self, path: u64) -> PathRng {
        debug_assert!(path < (1u64 << 48), "path index out of range");
        PathRng {
            key: [self.seed as u32, (self.seed >> 32) as u32],
            words: [
                path as u32,
                ((path >> 32) as u32) ^ (u32::from(self.lane) << 16),
                self.stream,
            ],
            block: 0,
            buf: [0; 4],
            used: 4,
        }
    }

    /// The `draw`-th uniform of `path`, computed without state.
    pub fn uniform_at(&self, path: u64, draw: u64) -> f64 {
        let mut rng = self.path(path);
        rng.block = (draw / 2) as u32;
        rng.refill();
        rng.used = 2 * (draw % 2) as usize;
        rng.next_uniform()
    }
}

/// Draws for a single path of an [`RngStream`].
#[derive(Debug, Clone)]
pub struct PathRng {
    key: [u32; 2],
    words: [u32; 3],
    block: u32,
    buf: [u32; 4],
    used: usize,
}

impl PathRng {
    fn refill(&mut self) {
        let counter = [self.block, self.words[0], self.words[1], self.words[2]];
        self.buf = philox4x32_10(counter, self.key);
        self.block = self.block.wrapping_add(1);
        self.used = 0;
    }

    pub fn next_u64(&mut self) -> u64 {
        if self.used >= 4 {
            self.refill();
        }
        let lo = u64::from(self.buf[self.used]);
        let hi = u64::from(self.buf[self.used + 1]);
        self.used += 2;
        (hi << 32) | lo
    }

    /// Uniform on (0, 1), never exactly 0 or 1.
    pub fn next_uniform(&mut self) -> f64 {
        bits_to_open_unit(self.next_u64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors from the Random123 distribution.
    #[test]
    fn philox_known_answers() {
        assert_eq!(
            philox4x32_10([0, 0, 0, 0], [0, 0]),
            [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]
        );
        assert_eq!(
            philox4x32_10([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]
        );
        assert_eq!(
            philox4x32_10(
                [0x243f_6a88, 0x85a3_08d3, 0x1319_8a2e, 0x0370_7344],
                [0xa409_3822, 0x299f_31d0]
            ),
            [0xd16c_fe09, 0x94fd_cceb, 0x5001_e420, 0x2412_6ea1]
        );
    }

    #[test]
    fn uniforms_are_open_interval() {
        assert!(bits_to_open_unit(0) > 0.0);
        assert!(bits_to_open_unit(u64::MAX) < 1.0);
    }

    #[test]
    fn random_access_matches_sequential() {
        let s = RngStream::new(7, 3).lane(2);
        let mut seq = s.path(11);
        for draw in 0..9 {
            assert_eq!(seq.next_uniform(), s.uniform_at(11, draw));
        }
    }

    #[test]
    fn lanes_streams_and_paths_differ() {
        let base = RngStream::new(1, 0);
        let a = base.path(0).next_u64();
        assert_ne!(a, base.lane(1).path(0).next_u64());
        assert_ne!(a, base.with_stream(1).path(0).next_u64());
        assert_ne!(a, base.path(1).next_u64());
        assert_ne!(a, RngStream::new(2, 0).path(0).next_u64());
    }

    #[test]
    fn uniform_mean_and_variance() {
        let s = RngStream::new(42, 0);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..n {
            let u = s.uniform_at(i, 0);
            sum += u;
            sum_sq += u * u;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((mean - 0.5).abs() < 0.003, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 0.002, "var {var}");
    }
}
