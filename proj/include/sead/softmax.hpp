#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "sead/random.hpp"

namespace sead {

/// Overflow-safe softmax: subtracts the row maximum before exponentiating.
inline void softmax(std::span<const double> logits, std::span<double> probs) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - m);
    z += probs[i];
  }
  for (double& p : probs) p /= z;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> probs(logits.size());
  softmax(logits, probs);
  return probs;
}

inline double log_sum_exp(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  return m + std::log(z);
}

/// Row-major table of logits: one categorical distribution per row.
class LogitTable {
 public:
  LogitTable() = default;
  LogitTable(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const LogitTable&, const LogitTable&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A sampled decision as seen by the policy-gradient estimator.
struct PolicyStep {
  int row = 0;
  int action = 0;
  double log_prob = 0.0;

  friend bool operator==(const PolicyStep&, const PolicyStep&) = default;
};

/// One categorical draw from a table row, with its exact log-probability.
struct RowSample {
  int choice = 0;
  double log_prob = 0.0;
  std::vector<double> probs;
};

inline RowSample sample_row(const LogitTable& table, std::size_t row, Rng& rng) {
  RowSample s;
  s.probs = softmax(table.row(row));
  s.choice = static_cast<int>(rng.categorical(s.probs));
  s.log_prob = std::log(s.probs[static_cast<std::size_t>(s.choice)]);
  return s;
}

}  // namespace sead
