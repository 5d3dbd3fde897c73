//! Data-parallel helpers with a sequential fallback.
//!
//! Parallel execution is only available with the `parallel` feature; without
//! it `Execution::Parallel` silently runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `(0..n).map(f)` collected in index order.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Applies `f` to consecutive chunks of `data` of length `chunk`, passing
    /// the chunk number.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        let a = Execution::Sequential.map_range(1000, |i| i * i);
        let b = Execution::Parallel.map_range(1000, |i| i * i);
        assert_eq!(a, b);
        let mut x = vec![1usize; 100];
        let mut y = x.clone();
        Execution::Sequential.for_each_chunk_mut(&mut x, 7, |c, s| s.iter_mut().for_each(|v| *v += c));
        Execution::Parallel.for_each_chunk_mut(&mut y, 7, |c, s| s.iter_mut().for_each(|v| *v += c));
        assert_eq!(x, y);
    }
}
