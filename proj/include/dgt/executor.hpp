// How one synchronous round is scheduled across agents. Each agent writes only
// its own slot, so any executor yields bitwise the same result as the
// sequential one.
#pragma once

#include <concepts>
#include <cstddef>
#include <functional>

namespace dgt {

template <class E>
concept AgentExecutor = requires(const E& e, std::size_t n, const std::function<void(std::size_t)>& fn) {
  e.for_each_agent(n, fn);
};

struct SequentialExecutor {
  template <class Fn>
  void for_each_agent(std::size_t n, Fn&& fn) const {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  }
};

}  // namespace dgt
