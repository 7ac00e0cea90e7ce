//! Element-parallel map with a sequential fallback.
//!
//! Results always come back in input order, and every reduction over them is
//! done sequentially by the caller, so both modes produce identical bits.

/// How per-element work is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Order-preserving map over `items`.
pub fn map_collect<I, T, F>(exec: Execution, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Fallible variant of [`map_collect`]; the first error in input order wins.
pub fn try_map_collect<I, T, E, F>(exec: Execution, items: &[I], f: F) -> Result<Vec<T>, E>
where
    I: Sync,
    T: Send,
    E: Send,
    F: Fn(&I) -> Result<T, E> + Sync + Send,
{
    map_collect(exec, items, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<f64> = (0..1000).map(|k| k as f64 * 0.1).collect();
        let a = map_collect(Execution::Sequential, &xs, |x| x.sin());
        let b = map_collect(Execution::Parallel, &xs, |x| x.sin());
        assert_eq!(a, b);
        let e: Result<Vec<f64>, usize> =
            try_map_collect(Execution::Parallel, &xs, |x| if *x > 50.0 { Err(*x as usize) } else { Ok(*x) });
        assert_eq!(e, Err(50));
    }
}
