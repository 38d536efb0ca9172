#include "p2b/diffcore/array.hpp"

#include <cmath>
#include <sstream>

#include "p2b/common.hpp"

namespace p2b::diffcore {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) throw ContractError("negative dimension in shape " + shape_str(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Array::Array(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  if (shape_numel(shape) != values.size())
    throw ContractError("Array: " + std::to_string(values.size()) +
                        " values do not fill shape " + shape_str(shape));
}

int Array::rows() const {
  if (shape.size() != 2) throw ContractError("rows(): array is not 2-D, shape " + shape_str(shape));
  return shape[0];
}

int Array::cols() const {
  if (shape.size() != 2) throw ContractError("cols(): array is not 2-D, shape " + shape_str(shape));
  return shape[1];
}

bool Array::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

Array make_scalar(double v) { return Array{Shape{}, std::vector<double>{v}}; }

Array make_row(const std::vector<double>& v) {
  return Array{Shape{1, static_cast<int>(v.size())}, v};
}

Array make_matrix(int rows, int cols, const std::vector<double>& v) {
  return Array{Shape{rows, cols}, v};
}

}  // namespace p2b::diffcore
