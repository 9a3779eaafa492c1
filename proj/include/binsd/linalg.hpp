#ifndef BINSD_LINALG_HPP
#define BINSD_LINALG_HPP

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace binsd {

using Vec = std::vector<double>;

/// Dense row-major matrix. Embedding dimensions are a few dozen, so
/// explicit loops suffice and the storage maps 1:1 onto the checkpoint
/// format.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

/// y = M x
inline Vec matvec(const Mat& m, const Vec& x) {
  assert(m.cols() == x.size());
  Vec y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) acc += m(r, c) * x[c];
    y[r] = acc;
  }
  return y;
}

/// y = M^T x
inline Vec matvec_t(const Mat& m, const Vec& x) {
  assert(m.rows() == x.size());
  Vec y(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) y[c] += m(r, c) * x[r];
  return y;
}

/// M += a b^T
inline void add_outer(Mat& m, const Vec& a, const Vec& b) {
  assert(m.rows() == a.size() && m.cols() == b.size());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) += a[r] * b[c];
}

inline void add_to(Vec& a, const Vec& b) {
  assert(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

inline double dot(const Vec& a, const Vec& b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

}  // namespace binsd

#endif  // BINSD_LINALG_HPP
