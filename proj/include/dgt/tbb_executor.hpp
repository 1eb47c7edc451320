// Parallel agent rounds on oneTBB. Requires linking TBB::tbb.
#pragma once

#include "dgt/executor.hpp"

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

namespace dgt {

struct TbbExecutor {
  std::size_t grain = 1;

  template <class Fn>
  void for_each_agent(std::size_t n, Fn&& fn) const {
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, grain), [&](const tbb::blocked_range<std::size_t>& r) {
      for (std::size_t i = r.begin(); i != r.end(); ++i) fn(i);
    });
  }
};

}  // namespace dgt
