#include "doctest.h"

#include "amopt/surface.hpp"

#include <cmath>
#include <sstream>

using namespace amopt;

TEST_SUITE("surface") {

TEST_CASE("uniform axis") {
  const Vector a = uniform_axis(5, 50, 40);
  CHECK(a.size() == 40);
  CHECK(a[0] == 5.0);
  CHECK(a[39] == 50.0);
  CHECK_THROWS_AS(uniform_axis(1, 1, 4), std::invalid_argument);
  CHECK_THROWS_AS(uniform_axis(0, 1, 1), std::invalid_argument);
}

TEST_CASE("interpolation and time lookup") {
  ValueSurface s(uniform_axis(0, 1, 3), {uniform_axis(0, 10, 11)});
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 11; ++j) s.values()(i, j) = 2.0 * s.xs()[j] + i;
  }
  CHECK(s.interpolate(0, 3.25) == doctest::Approx(6.5));
  CHECK(*s.interpolate(2, Vector::Constant(1, 9.5)) == doctest::Approx(21.0));
  CHECK_FALSE(s.interpolate(0, Vector::Constant(1, 10.5)).has_value());
  CHECK(s.interpolate_clamped(1, Vector::Constant(1, -3.0)) == 1.0);
  CHECK_THROWS_AS(s.interpolate(0, 11.0), std::out_of_range);
  CHECK(s.slice_at_or_after(0.0) == 0);
  CHECK(s.slice_at_or_after(0.2) == 1);
  CHECK(s.slice_at_or_after(0.5) == 1);
  CHECK(s.slice_at_or_after(0.5 + 1e-13) == 1);
  CHECK(s.slice_at_or_after(0.51) == 2);
  CHECK_THROWS_AS(s.slice_at_or_after(1.1), std::out_of_range);
}

TEST_CASE("bilinear interpolation") {
  ValueSurface s(Vector::Zero(1), {uniform_axis(0, 2, 3), uniform_axis(0, 1, 2)});
  CHECK(s.num_nodes() == 6);
  for (Index k = 0; k < 6; ++k) {
    const Vector n = s.node(k);
    s.values()(0, k) = 1.0 + n[0] + 3.0 * n[1];
  }
  CHECK(s.node(1)[0] == 1.0);  // first axis fastest
  CHECK(s.node(3)[1] == 1.0);
  CHECK(*s.interpolate(0, (Vector(2) << 1.5, 0.25).finished()) == doctest::Approx(3.25));
  CHECK(s.interpolate_clamped(0, (Vector(2) << 5.0, 5.0).finished()) == doctest::Approx(6.0));
}

TEST_CASE("csv round trip") {
  ValueSurface s(uniform_axis(0, 1, 4), {uniform_axis(0.1, 3.7, 9)});
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 9; ++j) s.values()(i, j) = std::exp(-0.37 * i) / 3.0 + std::sqrt(s.xs()[j]) * 1e-7;
  }
  std::stringstream io;
  write_surface_csv(s, io);
  const std::string text = io.str();
  CHECK(text.rfind("t,x,v\n", 0) == 0);
  const ValueSurface back = read_surface_csv(io);
  CHECK(back.same_grid(s, 0.0));
  CHECK(back.values() == s.values());

  ValueSurface d2(uniform_axis(0, 1, 2), {uniform_axis(1, 2, 3), uniform_axis(5, 7, 2)});
  d2.values().setRandom();
  std::stringstream io2;
  write_surface_csv(d2, io2);
  CHECK(io2.str().rfind("t,x1,x2,v\n", 0) == 0);
  const ValueSurface back2 = read_surface_csv(io2);
  CHECK(back2.dim() == 2);
  CHECK(back2.values() == d2.values());
}

TEST_CASE("format and parse helpers") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
  CHECK(std::stod(format_double(5.05e-300)) == 5.05e-300);
  CHECK(split_csv_line("a,b,,c") == std::vector<std::string>{"a", "b", "", "c"});
  std::stringstream bad("t,x,v\n0,1,2\n0,2\n");
  CHECK_THROWS_AS(read_surface_csv(bad), std::invalid_argument);
  std::stringstream holes("t,x,v\n0,1,2\n0,2,3\n1,1,4\n");
  CHECK_THROWS_AS(read_surface_csv(holes), std::invalid_argument);
}

}
