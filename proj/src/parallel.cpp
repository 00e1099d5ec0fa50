#include "nfcs/parallel.hpp"

namespace nfcs {

namespace {
std::atomic<int> g_threads{1};
}

int default_threads() { return g_threads.load(); }
void set_default_threads(int threads) { g_threads.store(std::max(1, threads)); }

}  // namespace nfcs
