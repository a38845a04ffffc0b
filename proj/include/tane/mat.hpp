#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace tane {

/// Dense row-major matrix of doubles. Vectors are 1×n matrices where a
/// matrix is needed and plain spans everywhere else.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Mat row_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool all_finite() const;

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Mat matmul(const Mat& a, const Mat& b);
/// a · bᵀ
Mat matmul_nt(const Mat& a, const Mat& b);
/// aᵀ · b
Mat matmul_tn(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);

void add_inplace(Mat& dst, const Mat& src);
void add_scaled_inplace(Mat& dst, const Mat& src, double scale);

/// Rows of `a` selected by index, in the given order.
Mat gather_rows(const Mat& a, std::span<const std::size_t> indices);
Mat vstack(std::span<const Mat> blocks);

}  // namespace tane
