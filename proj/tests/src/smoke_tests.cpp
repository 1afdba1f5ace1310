#include <doctest.h>

#include "taskforge/tensor.hpp"

TEST_CASE("tensor basics") {
  taskforge::Tensor t = taskforge::Tensor::zeros(2, 3);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
}
