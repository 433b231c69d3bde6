//! Batch execution over independent work items.
//!
//! Sweeps (arrival grids, seed batches, offset scans) are embarrassingly
//! parallel: every item owns its scenario and generator. With the `parallel`
//! feature the parallel mode fans out over rayon's pool; without it both
//! modes run sequentially, byte-identical either way since items never share
//! state.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How to execute a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Fan out over the rayon pool (falls back to sequential when the crate
    /// is built without the `parallel` feature).
    #[default]
    Parallel,
    /// One item after another on the calling thread.
    Sequential,
}

/// Map `f` over `items`, preserving order.
pub fn map_collect<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match exec {
        Execution::Sequential => items.iter().map(f).collect(),
        Execution::Parallel => {
            #[cfg(feature = "parallel")]
            {
                items.par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                items.iter().map(f).collect()
            }
        }
    }
}

/// Map a fallible `f` over `items`; the first error wins.
pub fn try_map_collect<T, U, E, F>(exec: Execution, items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    match exec {
        Execution::Sequential => items.iter().map(f).collect(),
        Execution::Parallel => {
            #[cfg(feature = "parallel")]
            {
                items.par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                items.iter().map(f).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree_and_preserve_order() {
        let items: Vec<u64> = (0..257).collect();
        let seq = map_collect(Execution::Sequential, &items, |&x| x * x);
        let par = map_collect(Execution::Parallel, &items, |&x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[10], 100);
    }

    #[test]
    fn try_map_surfaces_errors() {
        let items: Vec<u64> = (0..64).collect();
        let res: Result<Vec<u64>, String> =
            try_map_collect(Execution::Parallel, &items, |&x| {
                if x == 33 {
                    Err("boom".to_string())
                } else {
                    Ok(x)
                }
            });
        assert_eq!(res.unwrap_err(), "boom");
    }
}
