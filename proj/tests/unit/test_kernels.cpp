#include <doctest.h>

#include <vector>

#include "generators.hpp"
#include "wsod/adagrad.hpp"
#include "wsod/kernels.hpp"

using namespace wsod;
using namespace wsod::testing;
namespace ser = wsod::kernels::serial;
namespace par = wsod::kernels::omp;

TEST_SUITE("kernels") {

TEST_CASE("affine forward and backward agree bitwise between serial and OpenMP") {
  Rng rng(11);
  for (auto [m, in, out] : std::vector<std::array<std::size_t, 3>>{{1, 1, 1}, {7, 5, 3}, {300, 62, 5}, {0, 4, 2}}) {
    const auto x = random_matrix(rng, m, in);
    const auto layer = random_affine(rng, in, out);
    const auto dy = random_matrix(rng, m, out);
    Matrix ys, yp;
    ser::affine_forward(x, layer, ys);
    par::affine_forward(x, layer, yp);
    CHECK(ys == yp);

    AffineLayer gs(in, out), gp(in, out);
    Matrix dxs, dxp;
    ser::affine_backward(x, layer, dy, gs, &dxs);
    par::affine_backward(x, layer, dy, gp, &dxp);
    CHECK(gs == gp);
    CHECK(dxs == dxp);
  }
}

TEST_CASE("affine forward matches a hand computation") {
  AffineLayer l(2, 1);
  l.weight.data = {2.0, -1.0};
  l.bias = {0.5};
  Matrix x(2, 2);
  x.data = {1, 1, 3, 4};
  Matrix y;
  ser::affine_forward(x, l, y);
  CHECK(y.data == std::vector<double>{1.5, 2.5});
  AffineLayer g(2, 1);
  Matrix dy(2, 1, 1.0);
  ser::affine_backward(x, l, dy, g, nullptr);
  CHECK(g.weight.data == std::vector<double>{4.0, 5.0});
  CHECK(g.bias == std::vector<double>{2.0});
  // gradients accumulate
  ser::affine_backward(x, l, dy, g, nullptr);
  CHECK(g.bias == std::vector<double>{4.0});
}

TEST_CASE("softmaxes agree bitwise and normalise the right axis") {
  Rng rng(12);
  const auto logits = random_matrix(rng, 257, 9, -30, 30);
  Matrix cs, cp, rs, rp;
  ser::softmax_columns(logits, cs);
  par::softmax_columns(logits, cp);
  ser::softmax_rows(logits, rs);
  par::softmax_rows(logits, rp);
  CHECK(cs == cp);
  CHECK(rs == rp);
  for (std::size_t c = 0; c < 9; ++c) {
    double sum = 0;
    for (std::size_t i = 0; i < 257; ++i) sum += cs(i, c);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (std::size_t i = 0; i < 257; ++i) {
    double sum = 0;
    for (double v : rs.row(i)) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  Matrix huge(2, 1);
  huge.data = {1000.0, 999.0};
  Matrix out;
  ser::softmax_columns(huge, out);
  CHECK(all_finite(out.data));
  CHECK(out(0, 0) > out(1, 0));
}

TEST_CASE("iou matrix agrees bitwise and with the scalar function") {
  Rng rng(13);
  const auto a = random_boxes(rng, 120), b = random_boxes(rng, 33, true);
  Matrix s, p;
  ser::iou_matrix(a, b, s);
  par::iou_matrix(a, b, p);
  CHECK(s == p);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) REQUIRE(s(i, j) == iou(a[i], b[j]));
}

TEST_CASE("adagrad step") {
  Adagrad opt{.lr = 0.5, .initial_accumulator = 0.1};
  std::vector<double> p{1.0, -2.0}, g{0.3, 0.0}, acc{0.1, 0.1};
  opt.step(p, g, acc);
  CHECK(acc[0] == doctest::Approx(0.19));
  CHECK(p[0] == doctest::Approx(1.0 - 0.5 * 0.3 / std::sqrt(0.19)));
  CHECK(p[1] == -2.0);
  std::vector<double> wrong{1.0};
  CHECK_THROWS(opt.step(p, g, wrong));
}

}
