#pragma once

#include <cstdint>
#include <functional>
#include <random>

namespace pilate {

// Engine for replication `index` of a run seeded with `seed`. Streams depend only on
// (seed, index), so results do not depend on execution order or thread count.
std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t index);

// Runs body(i) for i in [0, n) on up to `threads` workers; body must write only to slot i.
void parallel_for(int n, int threads, const std::function<void(int)>& body);

int default_threads();

}  // namespace pilate
