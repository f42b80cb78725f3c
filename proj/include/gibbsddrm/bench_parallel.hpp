#ifndef GIBBSDDRM_BENCH_PARALLEL_HPP_
#define GIBBSDDRM_BENCH_PARALLEL_HPP_

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

namespace gibbsddrm::bench {

template <typename Fn>
auto for_each_seed(const std::vector<std::uint64_t>& seeds, unsigned threads,
                   Fn fn) -> std::vector<decltype(fn(std::uint64_t{}))> {
  using R = decltype(fn(std::uint64_t{}));
  std::vector<std::optional<R>> slots(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i; (i = next.fetch_add(1)) < seeds.size();) {
      try {
        slots[i].emplace(fn(seeds[i]));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(
                                      threads, static_cast<unsigned>(seeds.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::vector<R> out;
  out.reserve(seeds.size());
  for (size_t i = 0; i < seeds.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

}  // namespace gibbsddrm::bench

#endif  // GIBBSDDRM_BENCH_PARALLEL_HPP_
