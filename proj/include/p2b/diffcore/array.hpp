#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace p2b::diffcore {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

// Dense row-major array of 64-bit floats.
struct Array {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;

  Array() = default;
  Array(Shape s, double fill = 0.0)
      : shape(std::move(s)), values(shape_numel(shape), fill) {}
  Array(Shape s, std::vector<double> v);

  std::size_t numel() const { return values.size(); }
  int rows() const;
  int cols() const;

  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * cols() + j]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * cols() + j]; }

  bool all_finite() const;
};

Array make_scalar(double v);
Array make_row(const std::vector<double>& v);            // shape [1 x n]
Array make_matrix(int rows, int cols, const std::vector<double>& v);

}  // namespace p2b::diffcore
