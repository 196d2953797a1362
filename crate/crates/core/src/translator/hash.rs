//! Seed-stable 64-bit hashing.
//!
//! The toy decoder's instability term and every per-sentence random stream
//! are keyed through this function, so its exact definition is part of the
//! trace format: changing it changes every simulated trace.
//!
//! Construction (all arithmetic wrapping, all integers little-endian):
//!
//! ```text
//! mix(z)       = splitmix64 finalizer:
//!                z ^= z >> 30; z *= 0xbf58476d1ce4e5b9;
//!                z ^= z >> 27; z *= 0x94d049bb133111eb;
//!                z ^= z >> 31
//! new(seed)    : state = mix(seed ^ GOLDEN)
//! write_u64(x) : state = mix((state + GOLDEN) ^ x)
//! write_str(s) : write_u64(len(s) in bytes), then write_u64 of each 8-byte
//!                chunk of the UTF-8 bytes (last chunk zero-padded)
//! finish()     : mix(state)
//! ```
//!
//! with `GOLDEN = 0x9e3779b97f4a7c15`.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug)]
pub struct Hash64 {
    state: u64,
}

impl Hash64 {
    pub fn new(seed: u64) -> Self {
        Hash64 { state: mix64(seed ^ GOLDEN) }
    }

    pub fn write_u64(&mut self, x: u64) -> &mut Self {
        self.state = mix64(self.state.wrapping_add(GOLDEN) ^ x);
        self
    }

    pub fn write_str(&mut self, s: &str) -> &mut Self {
        let bytes = s.as_bytes();
        self.write_u64(bytes.len() as u64);
        for chunk in bytes.chunks(8) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            self.write_u64(u64::from_le_bytes(buf));
        }
        self
    }

    pub fn finish(&self) -> u64 {
        mix64(self.state)
    }
}

/// Maps a hash uniformly onto `[-1, 1)` using its top 53 bits.
pub fn to_signed_unit(h: u64) -> f64 {
    let unit = (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    2.0 * unit - 1.0
}
