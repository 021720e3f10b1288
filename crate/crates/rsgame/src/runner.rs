use rayon::prelude::*;
use rsgame_core::simulate::PathRunner;

/// Runs paths on a rayon pool. Output order is path order, so results do not
/// depend on the thread count.
pub struct RayonRunner {
    pool: rayon::ThreadPool,
}

impl RayonRunner {
    /// `threads = 0` lets rayon pick.
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        Ok(Self { pool: rayon::ThreadPoolBuilder::new().num_threads(threads).build()? })
    }
}

impl PathRunner for RayonRunner {
    fn run(&self, paths: usize, f: &(dyn Fn(usize) -> [f64; 4] + Sync)) -> Vec<[f64; 4]> {
        self.pool.install(|| (0..paths).into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rsgame_core::simulate::Sequential;

    #[test]
    fn matches_sequential() {
        let f = |p: usize| [p as f64, (p * p) as f64, 0.0, 1.0];
        let a = RayonRunner::new(3).unwrap().run(1000, &f);
        let b = Sequential.run(1000, &f);
        assert_eq!(a, b);
    }
}
