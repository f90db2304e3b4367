#pragma once

#include <cstddef>
#include <functional>

namespace coxmesh {

/// Worker cap used by parallel_for. 0 means hardware concurrency.
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Iterations must write to disjoint outputs;
/// the caller reduces in index order so results do not depend on the
/// number of workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace coxmesh
