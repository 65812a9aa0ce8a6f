//! Dense tanh networks with hand-written reverse mode, Adam, and the two
//! stochastic policy heads used by the agents.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod head;
pub mod mlp;

pub use adam::Adam;
pub use checkpoint::Checkpoint;
pub use head::{Categorical, DiagonalGaussian, PolicyHead};
pub use mlp::{Init, Mlp, MlpCache, MlpGrads};

/// Mutable access to every parameter tensor as flat slices, in a fixed order.
pub trait Parameters {
    fn param_slices(&self) -> Vec<&[f64]>;
    fn param_slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    fn to_flat(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    /// Overwrites the parameters from a flat vector produced by [`Parameters::to_flat`].
    fn load_flat(&mut self, flat: &[f64]) -> crate::Result<()> {
        let n = self.param_count();
        if flat.len() != n {
            return Err(crate::Error::Dimension {
                what: "flat parameter vector",
                expected: n,
                got: flat.len(),
            });
        }
        let mut off = 0;
        for s in self.param_slices_mut() {
            s.copy_from_slice(&flat[off..off + s.len()]);
            off += s.len();
        }
        Ok(())
    }

    /// Order-sensitive hash of the exact parameter bits.
    fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for s in self.param_slices() {
            for v in s {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}
