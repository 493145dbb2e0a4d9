use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use super::Matrix;

/// A reproducible random sequence identified by `(master_seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id selecting an independent ChaCha
/// stream, so the sequence is identical on every platform. Streams are not
/// meant to be shared between threads; derive siblings with
/// [`RandomStream::child`] instead.
#[derive(Debug, Clone)]
pub struct RandomStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        RandomStream {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Sibling stream under the same master seed. Labels are mixed so that
    /// nested derivations (`child(a).child(b)`) do not collide with flat ones.
    pub fn child(&self, label: u64) -> RandomStream {
        RandomStream::new(self.master_seed, mix(self.stream_id, label))
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    pub fn exp1(&mut self) -> f64 {
        self.rng.sample(Exp1)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn sign(&mut self) -> f64 {
        if self.rng.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

// splitmix64 finalizer over the pair
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(b)
        .wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Matrix of i.i.d. standard normal entries, filled row-major.
pub fn gaussian_matrix(rows: usize, cols: usize, stream: &mut RandomStream) -> Matrix {
    let data = stream.normal_vec(rows * cols);
    Matrix::from_vec(rows, cols, data).expect("length matches by construction")
}

/// Uniform sample from the `(n-1)`-simplex: normalized unit-rate exponentials.
pub fn dirichlet_flat(n: usize, stream: &mut RandomStream) -> Vec<f64> {
    assert!(n >= 1, "dirichlet_flat needs n >= 1");
    let draws: Vec<f64> = (0..n).map(|_| stream.exp1()).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        let a = gaussian_matrix(4, 5, &mut RandomStream::new(3, 1));
        let b = gaussian_matrix(4, 5, &mut RandomStream::new(3, 1));
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn distinct_streams_differ() {
        let a = RandomStream::new(3, 1).normal_vec(8);
        let b = RandomStream::new(3, 2).normal_vec(8);
        assert_ne!(a, b);
    }

    #[test]
    fn child_is_deterministic() {
        let s = RandomStream::new(9, 4);
        assert_eq!(s.child(2).normal_vec(3), s.child(2).normal_vec(3));
        assert_ne!(s.child(2).normal_vec(3), s.child(3).normal_vec(3));
    }

    #[test]
    fn dirichlet_single_point() {
        assert_eq!(dirichlet_flat(1, &mut RandomStream::new(0, 0)), vec![1.0]);
    }

    #[test]
    fn dirichlet_on_simplex() {
        let mut s = RandomStream::new(1, 0);
        for n in 1..10 {
            let a = dirichlet_flat(n, &mut s);
            assert!(a.iter().all(|&x| x >= 0.0));
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
