#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace btdet {

using cx = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;

// Principal square root with the branch Im(sqrt(z)) >= 0, cut along [0, inf).
// On the cut itself (z real >= 0) returns the nonnegative real root.
inline cx sqrt_upper(cx z) {
  cx r = std::sqrt(z);
  if (r.imag() < 0.0) r = -r;
  return r;
}

// Index-deterministic parallel map: fn(i) for i in [0, n). jobs <= 1 runs inline.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                         unsigned jobs = 1) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  unsigned workers = jobs < n ? jobs : static_cast<unsigned>(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

} // namespace btdet
