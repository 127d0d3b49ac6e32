#pragma once

#include <cstdint>
#include <functional>
#include <random>

namespace metagam {

/// Number of worker threads: METAGAM_THREADS when set (>= 1), otherwise the
/// hardware concurrency.
int thread_budget();

/// Run fn(i) for i in [0, count) across min(threads, count) workers with a
/// strided index split. Deterministic work assignment; the first exception
/// is rethrown after all workers join.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

/// splitmix64 mix of a seed and a stream index; used to derive independent
/// per-replication RNG streams so results do not depend on scheduling.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(mix_seed(seed, stream));
}

}  // namespace metagam
