#include "splat4d/parallel.hpp"

#include <atomic>

namespace splat4d {

namespace {
std::atomic<bool> g_strict{false};
}

void set_strict_sequential(bool on) { g_strict.store(on); }
bool strict_sequential() { return g_strict.load(); }

int worker_threads() { return g_strict.load() ? 1 : omp_get_max_threads(); }

} // namespace splat4d
