#include "zseg/tensor.hpp"

#include <sstream>

namespace zseg {

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
  return os.str();
}

}  // namespace zseg
