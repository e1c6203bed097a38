//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) these run on the rayon pool; without
//! it they are plain loops. Every helper preserves input order so results are
//! bit-identical between the two builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Items processed per task by the chunked helpers.
const CHUNK: usize = 256;

/// Ordered map.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Ordered map over an index range.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Ordered flat map: `f` pushes any number of outputs per item.
pub fn flat_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T, &mut Vec<R>) + Sync + Send,
{
    let run = |chunk: &[T]| {
        let mut buf = Vec::with_capacity(chunk.len() * 2);
        for item in chunk {
            f(item, &mut buf);
        }
        buf
    };
    #[cfg(feature = "parallel")]
    {
        let parts: Vec<Vec<R>> = items.par_chunks(CHUNK).map(run).collect();
        concat(parts)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run(items)
    }
}

/// Ordered fallible flat map; the first error in input order wins.
pub fn try_flat_map<T, R, E, F>(items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T, &mut Vec<R>) -> Result<(), E> + Sync + Send,
{
    let run = |chunk: &[T]| -> Result<Vec<R>, E> {
        let mut buf = Vec::with_capacity(chunk.len() * 2);
        for item in chunk {
            f(item, &mut buf)?;
        }
        Ok(buf)
    };
    #[cfg(feature = "parallel")]
    {
        let parts: Vec<Result<Vec<R>, E>> = items.par_chunks(CHUNK).map(run).collect();
        let parts = parts.into_iter().collect::<Result<Vec<_>, E>>()?;
        Ok(concat(parts))
    }
    #[cfg(not(feature = "parallel"))]
    {
        run(items)
    }
}

/// Sum of `f` over items with a fixed chunk-then-sequential reduction order.
pub fn sum<T, F, S>(items: &[T], f: F) -> S
where
    T: Sync,
    S: Send + std::iter::Sum<S> + std::ops::Add<Output = S> + Default,
    F: Fn(&T) -> S + Sync + Send,
{
    let run = |chunk: &[T]| chunk.iter().map(&f).fold(S::default(), |acc, x| acc + x);
    #[cfg(feature = "parallel")]
    let partials: Vec<S> = items.par_chunks(CHUNK).map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<S> = items.chunks(CHUNK).map(run).collect();
    partials.into_iter().fold(S::default(), |acc, x| acc + x)
}

/// Unstable sort; only for keys known to be unique.
pub fn sort_unstable_by_key<T, K, F>(v: &mut [T], f: F)
where
    T: Send,
    K: Ord,
    F: Fn(&T) -> K + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if v.len() > 4 * CHUNK {
            v.par_sort_unstable_by_key(f);
            return;
        }
    }
    v.sort_unstable_by_key(f);
}

#[cfg(feature = "parallel")]
fn concat<R>(parts: Vec<Vec<R>>) -> Vec<R> {
    let total = parts.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(total);
    for mut p in parts {
        out.append(&mut p);
    }
    out
}

/// Runs `f` on a pool with `threads` workers (ignored without `parallel`).
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
                return pool.install(f);
            }
        }
        f()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let xs: Vec<usize> = (0..2000).collect();
        let out = flat_map(&xs, |&x, buf| {
            if x % 3 == 0 {
                buf.push(x);
                buf.push(x + 1);
            }
        });
        let expect: Vec<usize> = xs.iter().filter(|x| *x % 3 == 0).flat_map(|&x| [x, x + 1]).collect();
        assert_eq!(out, expect);
        assert_eq!(map_range(5, |i| i * i), vec![0, 1, 4, 9, 16]);
    }

    #[test]
    fn sum_is_reproducible() {
        let xs: Vec<f64> = (0..5000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let a: f64 = sum(&xs, |x| *x);
        let b: f64 = with_threads(Some(1), || sum(&xs, |x| *x));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
