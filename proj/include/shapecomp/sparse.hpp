#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "shapecomp/error.hpp"

namespace shapecomp {

/// Compressed sparse row matrix with sorted column indices per row.
struct SparseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::int64_t> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;

  SparseMatrix() = default;
  SparseMatrix(int r, int c) : rows(r), cols(c), row_ptr(static_cast<std::size_t>(r) + 1, 0) {}

  std::size_t nnz() const { return val.size(); }

  std::span<const int> row_cols(int i) const {
    return {col.data() + row_ptr[i], static_cast<std::size_t>(row_ptr[i + 1] - row_ptr[i])};
  }
  std::span<const double> row_vals(int i) const {
    return {val.data() + row_ptr[i], static_cast<std::size_t>(row_ptr[i + 1] - row_ptr[i])};
  }

  double row_dot(int i, std::span<const double> x) const {
    double s = 0.0;
    for (auto k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
    return s;
  }

  double at(int i, int j) const {
    const auto b = col.begin() + row_ptr[i], e = col.begin() + row_ptr[i + 1];
    auto it = std::lower_bound(b, e, j);
    return (it != e && *it == j) ? val[it - col.begin()] : 0.0;
  }

  SparseMatrix transpose() const {
    SparseMatrix t(cols, rows);
    std::vector<std::int64_t> count(static_cast<std::size_t>(cols) + 1, 0);
    for (int c : col) ++count[c + 1];
    for (int j = 0; j < cols; ++j) count[j + 1] += count[j];
    t.row_ptr = count;
    t.col.resize(nnz());
    t.val.resize(nnz());
    std::vector<std::int64_t> pos(count.begin(), count.end() - 1);
    for (int i = 0; i < rows; ++i)
      for (auto k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
        const auto p = pos[col[k]]++;
        t.col[p] = i;
        t.val[p] = val[k];
      }
    return t;
  }
};

/// Row-by-row builder; entries within a row may arrive unsorted.
class SparseBuilder {
 public:
  explicit SparseBuilder(int cols) : m_(0, cols) {}

  void add(int j, double v) {
    if (j < 0 || j >= m_.cols) throw error(error_kind::dimension_mismatch, "sparse column out of range");
    if (v != 0.0) pending_.emplace_back(j, v);
  }

  void end_row() {
    std::sort(pending_.begin(), pending_.end());
    for (std::size_t k = 0; k < pending_.size(); ++k) {
      if (!m_.col.empty() && m_.row_ptr.back() < static_cast<std::int64_t>(m_.col.size()) &&
          m_.col.back() == pending_[k].first) {
        m_.val.back() += pending_[k].second;
        continue;
      }
      m_.col.push_back(pending_[k].first);
      m_.val.push_back(pending_[k].second);
    }
    pending_.clear();
    m_.row_ptr.push_back(static_cast<std::int64_t>(m_.col.size()));
    ++m_.rows;
  }

  SparseMatrix finish() && { return std::move(m_); }

 private:
  SparseMatrix m_;
  std::vector<std::pair<int, double>> pending_;
};

}  // namespace shapecomp
