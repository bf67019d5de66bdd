//! Parallel corpus counting. Shards are counted independently and summed;
//! since summation is associative and commutative, the worker count never
//! changes the result.

use rayon::prelude::*;
use retok_core::audit::{count_fires, Doc, FireCounts};
use retok_core::Tokenizer;

/// Documents per shard.
const SHARD: usize = 64;

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool")
}

/// Runs `f` on a pool of `jobs` workers (0 = rayon's default).
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    if jobs == 0 {
        f()
    } else {
        pool(jobs).install(f)
    }
}

pub fn count_fires_parallel(tokenizer: &Tokenizer, docs: &[Doc<'_>], jobs: usize) -> FireCounts {
    if jobs == 1 {
        return count_fires(tokenizer, docs.iter().copied());
    }
    let n = tokenizer.encoder().id_space();
    with_jobs(jobs, || {
        docs.par_chunks(SHARD)
            .map(|shard| count_fires(tokenizer, shard.iter().copied()))
            .reduce(
                || FireCounts::new(n),
                |mut a, b| {
                    a.merge(&b);
                    a
                },
            )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use retok_core::pretokenize::Gpt2Split;
    use retok_core::TokenizerModel;

    #[test]
    fn workers_do_not_change_counts() {
        let m = TokenizerModel::byte_level_base("");
        let t = Tokenizer::new(&m, Gpt2Split).unwrap();
        let texts: Vec<String> = (0..500).map(|i| format!("doc {i} नमस्ते")).collect();
        let docs: Vec<Doc> = texts
            .iter()
            .enumerate()
            .map(|(i, s)| Doc::new(if i % 3 == 0 { Some("hi") } else { None }, s.as_bytes()))
            .collect();
        let one = count_fires_parallel(&t, &docs, 1);
        for jobs in [0, 2, 4, 8] {
            assert_eq!(count_fires_parallel(&t, &docs, jobs), one, "jobs={jobs}");
        }
        assert_eq!(one, count_fires(&t, docs.iter().copied()));
    }
}
