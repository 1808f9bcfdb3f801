//! Seedable, reproducible random number streams.
//!
//! Every sampler takes an explicit generator, so identical seeds reproduce
//! identical output bit for bit. Parallel Monte Carlo derives one independent
//! stream per replica from a master seed with a fixed splitting rule, which
//! makes results independent of the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The pseudo-random generator used throughout the crate.
pub type Prng = ChaCha12Rng;

/// Creates a generator from a bare 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Prng {
    Prng::seed_from_u64(seed)
}

/// Derives the seed of replica `replica` from a master seed.
///
/// The rule is fixed: `splitmix64(master + (replica + 1) * GOLDEN)` where
/// `GOLDEN = 0x9E3779B97F4A7C15`. Replica streams are therefore reproducible
/// and independent of how replicas are distributed over threads.
pub fn replica_seed(master: u64, replica: u64) -> u64 {
    splitmix64(master.wrapping_add(replica.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Creates the generator for one replica of a parallel run.
pub fn replica_rng(master: u64, replica: u64) -> Prng {
    rng_from_seed(replica_seed(master, replica))
}

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `n` replicas of `f`, replica `i` drawing from its own derived stream,
/// and returns the results in replica order. `threads = 1` runs inline; any
/// thread count yields the same output.
pub fn parallel_replicas<T, F>(master: u64, n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut Prng) -> T + Sync,
{
    let threads = threads.max(1);
    if threads == 1 || n < 2 * threads {
        return (0..n)
            .map(|i| {
                let mut rng = replica_rng(master, i as u64);
                f(i, &mut rng)
            })
            .collect();
    }
    let chunk = n.div_ceil(threads);
    let mut out: Vec<Option<T>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (t, slot) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (j, cell) in slot.iter_mut().enumerate() {
                    let i = t * chunk + j;
                    let mut rng = replica_rng(master, i as u64);
                    *cell = Some(f(i, &mut rng));
                }
            });
        }
    });
    out.into_iter()
        .map(|x| x.expect("replica completed"))
        .collect()
}
