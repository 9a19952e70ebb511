#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "bidomain/field_io.hpp"

using namespace support;

TEST_CASE("field dump round trip") {
  for (const GridSpec& g : {torus1(12), box2(5, 2.5),
                            GridSpec({1.0, 2.0}, {6, 5}, {Boundary::periodic, Boundary::neumann_box})}) {
    const auto f = random_field(g, 11, true);
    std::stringstream buffer;
    write_field_dump(buffer, f);
    const auto back = read_field_dump(buffer);
    CHECK(back.grid() == g);
    CHECK((back.values() - f.values()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("real dumps drop the imaginary part") {
  const auto f = random_field(torus1(8), 2, true);
  std::stringstream buffer;
  write_field_dump(buffer, f, ScalarKind::real);
  const auto back = read_field_dump(buffer);
  CHECK((back.values().real() - f.values().real()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.values().imag().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("corrupt dumps are rejected") {
  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(read_field_dump(bad), InvalidArgument);
  const auto f = random_field(torus1(8), 2);
  std::stringstream buffer;
  write_field_dump(buffer, f);
  std::string bytes = buffer.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream truncated(bytes);
  CHECK_THROWS_AS(read_field_dump(truncated), InvalidArgument);
}

TEST_CASE("csv layout") {
  const auto f = ScalarField::constant(torus2(4), Complex(1.5, -2.0));
  std::stringstream out;
  write_field_csv(out, f);
  std::string header;
  std::getline(out, header);
  CHECK(header == "i0,i1,re,im");
  std::string first;
  std::getline(out, first);
  CHECK(first == "0,0,1.5,-2");

  std::stringstream real_out;
  write_field_csv(real_out, f, ScalarKind::real);
  std::getline(real_out, header);
  CHECK(header == "i0,i1,value");
}
