#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pmp {

/// Row-major matrix of assignments (one row per sample).
struct SampleSet {
  std::size_t num_vars = 0;
  std::vector<std::uint16_t> values;
  std::string label;

  SampleSet() = default;
  explicit SampleSet(std::size_t vars, std::string label_ = {}) : num_vars(vars), label(std::move(label_)) {}

  std::size_t size() const noexcept { return num_vars ? values.size() / num_vars : 0; }
  bool empty() const noexcept { return values.empty(); }
  std::span<const std::uint16_t> row(std::size_t r) const {
    return std::span<const std::uint16_t>(values).subspan(r * num_vars, num_vars);
  }
  std::span<std::uint16_t> row(std::size_t r) { return std::span<std::uint16_t>(values).subspan(r * num_vars, num_vars); }

  template <class Int>
  void push_back(std::span<const Int> x) {
    for (auto v : x) values.push_back(static_cast<std::uint16_t>(v));
  }
  template <class Int>
  void push_back(const std::vector<Int>& x) {
    push_back(std::span<const Int>(x));
  }
  void resize(std::size_t rows) { values.resize(rows * num_vars); }
  bool operator==(const SampleSet& o) const { return num_vars == o.num_vars && values == o.values; }
};

}  // namespace pmp
