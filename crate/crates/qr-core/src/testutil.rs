//! Shared helpers for unit tests.

/// Minimal deterministic xorshift RNG so tests stay reproducible without
/// pulling the full rand stack into every module.
pub(crate) struct SmallRng(pub u64);

impl SmallRng {
    pub fn next(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }
}
