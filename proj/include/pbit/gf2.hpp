#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace pbit {

// Dense bit-packed linear system over GF(2), solved by Gauss-Jordan
// elimination. Column `num_vars` holds the right-hand side.
class Gf2System {
 public:
  explicit Gf2System(std::size_t num_vars)
      : num_vars_(num_vars), words_((num_vars + 1 + 63) / 64) {}

  std::size_t num_vars() const noexcept { return num_vars_; }
  std::size_t num_rows() const noexcept { return rows_.size() / words_; }

  // Repeated column indices cancel, as they would in an XOR.
  void add_row(std::span<const std::uint32_t> vars, bool rhs) {
    const std::size_t base = rows_.size();
    rows_.resize(base + words_, 0);
    for (auto v : vars) flip(base, v);
    if (rhs) flip(base, num_vars_);
  }

  // A particular solution with free variables set to 0, or nullopt when the
  // system is inconsistent.
  std::optional<std::vector<std::uint8_t>> solve() const {
    std::vector<std::uint64_t> m = rows_;
    const std::size_t nrows = num_rows();
    std::vector<std::size_t> pivot_col;
    std::size_t rank = 0;
    for (std::size_t col = 0; col < num_vars_ && rank < nrows; ++col) {
      std::size_t pivot = rank;
      while (pivot < nrows && !bit(m, pivot, col)) ++pivot;
      if (pivot == nrows) continue;
      if (pivot != rank) {
        for (std::size_t w = 0; w < words_; ++w)
          std::swap(m[pivot * words_ + w], m[rank * words_ + w]);
      }
      for (std::size_t r = 0; r < nrows; ++r) {
        if (r != rank && bit(m, r, col)) {
          for (std::size_t w = col / 64; w < words_; ++w) m[r * words_ + w] ^= m[rank * words_ + w];
        }
      }
      pivot_col.push_back(col);
      ++rank;
    }
    // Remaining rows are all-zero on the left; a set rhs is a contradiction.
    for (std::size_t r = rank; r < nrows; ++r) {
      if (bit(m, r, num_vars_)) return std::nullopt;
    }
    std::vector<std::uint8_t> x(num_vars_, 0);
    for (std::size_t r = 0; r < rank; ++r) x[pivot_col[r]] = bit(m, r, num_vars_) ? 1 : 0;
    return x;
  }

 private:
  bool bit(const std::vector<std::uint64_t>& m, std::size_t row, std::size_t col) const {
    return (m[row * words_ + col / 64] >> (col % 64)) & 1U;
  }
  void flip(std::size_t base, std::size_t col) {
    rows_[base + col / 64] ^= std::uint64_t{1} << (col % 64);
  }

  std::size_t num_vars_;
  std::size_t words_;
  std::vector<std::uint64_t> rows_;
};

}  // namespace pbit
