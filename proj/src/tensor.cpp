#include "vsel/tensor.hpp"

#include <sstream>

namespace vsel {

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor tensor_from_planes(const std::vector<Grid>& planes) {
  if (planes.empty()) throw ShapeError("cannot build a tensor from zero planes");
  const Index h = planes.front().rows();
  const Index w = planes.front().cols();
  Tensor t({static_cast<Index>(planes.size()), h, w});
  for (std::size_t c = 0; c < planes.size(); ++c) {
    if (planes[c].rows() != h || planes[c].cols() != w) {
      throw ShapeError("image planes have inconsistent sizes");
    }
    t.channel(static_cast<Index>(c)) = planes[c];
  }
  return t;
}

}  // namespace vsel
