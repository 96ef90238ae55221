//! Execution helpers: data-parallel maps with a sequential fallback.
//!
//! The crate's heavy loops (per-threshold fits, per-observation counterfactual
//! sums, bootstrap replications, Monte Carlo oracles) are all index-parallel.
//! With the default `parallel` feature they run on rayon; without it they run
//! sequentially behind the same signatures. Both paths produce identical
//! results: parallel work is always collected in index order and reduced with
//! a fixed chunking, never with a thread-count-dependent reduction tree, so
//! output bytes do not depend on the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fixed chunk length for accumulation loops. Constant by design: chunk
/// boundaries define the floating-point reduction order.
pub const CHUNK: usize = 1024;

/// Map `f` over `0..n`, collecting results in index order.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_collect_seq(n, f)
    }
}

/// Sequential twin of [`map_collect`], always available (benchmarked against
/// the parallel path).
pub fn map_collect_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Sum per-index vector contributions of width `width` over `0..n`.
///
/// `f(i, acc)` must add observation `i`'s contribution into `acc`. Indices are
/// processed in fixed chunks of [`CHUNK`]; chunk subtotals are combined in
/// chunk order, so the reduction order — and therefore every output bit — is
/// independent of thread count.
pub fn accumulate<F>(n: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    accumulate_with(n, width, || (), |i, (), acc| f(i, acc))
}

/// [`accumulate`] with per-chunk scratch state: `init` builds one scratch
/// value per chunk and `f(i, scratch, acc)` may reuse it freely (typically
/// prediction buffers), avoiding per-observation allocations. The chunk
/// partition is the same fixed one as [`accumulate`], so results do not
/// depend on thread count.
pub fn accumulate_with<S, I, F>(n: usize, width: usize, init: I, f: F) -> Vec<f64>
where
    S: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(usize, &mut S, &mut [f64]) + Sync + Send,
{
    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<Vec<f64>> = map_collect(n_chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut scratch = init();
        let mut acc = vec![0.0; width];
        for i in lo..hi {
            f(i, &mut scratch, &mut acc);
        }
        acc
    });
    reduce_in_order(partials, width)
}

/// Sequential twin of [`accumulate`] with the same chunking, for benchmarks
/// and for verifying thread-count invariance.
pub fn accumulate_seq<F>(n: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]),
{
    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<Vec<f64>> = map_collect_seq(n_chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut acc = vec![0.0; width];
        for i in lo..hi {
            f(i, &mut acc);
        }
        acc
    });
    reduce_in_order(partials, width)
}

fn reduce_in_order(partials: Vec<Vec<f64>>, width: usize) -> Vec<f64> {
    let mut out = vec![0.0; width];
    for part in partials {
        for (o, p) in out.iter_mut().zip(&part) {
            *o += p;
        }
    }
    out
}

/// Run `f` inside a dedicated pool of `jobs` worker threads (rayon builds the
/// pool; `None` uses the global default). Without the `parallel` feature the
/// closure simply runs on the current thread.
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match jobs {
            Some(j) => rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .expect("thread pool")
                .install(f),
            None => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        f()
    }
}
