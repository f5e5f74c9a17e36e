#include "doctest.h"

#include "bcrb/errors.hpp"
#include "bcrb/field_io.hpp"

#include <cstdio>
#include <fstream>

using namespace bcrb;

namespace {

const ParameterGrid kGrid({-1.0, 0.5}, {2.0, 1.5}, {4, 3});

}  // namespace

TEST_CASE("scalar field round trip") {
  auto f = ScalarField::from_function(kGrid, [](const Vec& x) { return std::exp(x[0]) / 3 + x[1]; });
  write_csv_file("field_io_s.csv", f);
  auto g = read_scalar_csv("field_io_s.csv");
  std::remove("field_io_s.csv");
  CHECK(g.grid() == kGrid);
  CHECK((g.values() - f.values()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("vector field round trip keeps the variance") {
  for (auto variance : {Variance::contravariant, Variance::covariant}) {
    auto f = VectorField::from_function(
        kGrid, [](const Vec& x) { return Vec(Vec::Constant(2, 0.1) + x / 7); }, variance);
    write_csv_file("field_io_v.csv", f);
    auto g = read_vector_csv("field_io_v.csv");
    std::remove("field_io_v.csv");
    CHECK(g.variance() == variance);
    CHECK(g.grid() == kGrid);
    CHECK((g.values() - f.values()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("matrix field round trip") {
  auto f = MatrixField::from_function(kGrid, [](const Vec& x) {
    Mat m(2, 2);
    m << 1 + x[0] * x[0], x[1] / 3, x[1] / 3, 2;
    return m;
  });
  write_csv_file("field_io_m.csv", f);
  std::ifstream in("field_io_m.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "x0,x1,m0_0,m0_1,m1_0,m1_1");
  auto g = read_matrix_csv("field_io_m.csv");
  std::remove("field_io_m.csv");
  for (Index i = 0; i < kGrid.size(); ++i) CHECK((g[i] - f[i]).norm() == 0.0);
}

TEST_CASE("malformed field CSV") {
  {
    std::ofstream out("field_io_bad.csv");
    out << "x0,value\n0,1\n1,2\n3,4\n";
  }
  CHECK_THROWS_AS(read_scalar_csv("field_io_bad.csv"), InvalidArgument);
  {
    std::ofstream out("field_io_bad.csv");
    out << "x0,value\n0,1\n1,abc\n";
  }
  CHECK_THROWS_AS(read_scalar_csv("field_io_bad.csv"), InvalidArgument);
  CHECK_THROWS_AS(read_vector_csv("field_io_bad.csv"), InvalidArgument);
  std::remove("field_io_bad.csv");
  CHECK_THROWS_AS(read_scalar_csv("does/not/exist.csv"), IoError);
  CHECK_THROWS_AS(write_csv_file("does/not/exist.csv", ScalarField::constant(kGrid, 1)), IoError);
}
