#include <doctest.h>

#include <cmath>
#include <limits>

#include "generators.hpp"
#include "gradcheck.hpp"
#include "wsod/error.hpp"
#include "wsod/mil.hpp"

using namespace wsod;

namespace {

ProposalSet one_hot_rows(std::size_t m) {
  ProposalSet p;
  p.image_id = "t";
  p.features = Matrix(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    p.features(i, i) = 1.0;
    p.boxes.push_back({double(i), 0, double(i) + 1, 1});
  }
  return p;
}

ScoreBundle with_image_scores(std::vector<double> image_probs) {
  ScoreBundle s;
  s.image_probs = std::move(image_probs);
  return s;
}

}  // namespace

TEST_SUITE("mil") {

TEST_CASE("single proposal: detection weight one and image score sigmoid of its logit") {
  auto p = one_hot_rows(1);
  MilHead h(1, 2);
  h.cls.weight(0, 0) = 0.7;
  h.cls.bias[1] = -1.2;
  h.det.weight(1, 0) = 5.0;
  const auto s = mil_forward(p, h);
  CHECK(s.det_probs(0, 0) == 1.0);
  CHECK(s.det_probs(0, 1) == 1.0);
  CHECK(s.image_probs[0] == doctest::Approx(sigmoid(0.7)));
  CHECK(s.image_probs[1] == doctest::Approx(sigmoid(-1.2)));
}

TEST_CASE("equal detection logits spread weight evenly") {
  auto p = one_hot_rows(3);
  MilHead h(3, 1);
  h.det.bias[0] = 4.0;
  const auto s = mil_forward(p, h);
  for (std::size_t i = 0; i < 3; ++i) CHECK(s.det_probs(i, 0) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("two-proposal hand case aggregates logits") {
  auto p = one_hot_rows(2);
  MilHead h(2, 1);
  h.det.weight(0, 1) = std::log(3.0);
  h.cls.weight(0, 0) = 2.0;
  h.cls.weight(0, 1) = -2.0;
  const auto s = mil_forward(p, h);
  CHECK(s.det_probs(0, 0) == doctest::Approx(0.25));
  CHECK(s.det_probs(1, 0) == doctest::Approx(0.75));
  CHECK(s.pooled_logits[0] == doctest::Approx(-1.0));
  CHECK(s.image_probs[0] == doctest::Approx(sigmoid(-1.0)));
  CHECK(s.cls_probs(0, 0) == doctest::Approx(sigmoid(2.0)));
}

TEST_CASE("multiple-instance loss values") {
  CHECK(mid_loss(with_image_scores({0.5}), std::vector<double>{1.0}) == doctest::Approx(std::log(2.0)));
  CHECK(mid_loss(with_image_scores({0.9, 0.1}), std::vector<double>{1.0, 0.0}) ==
        doctest::Approx(-2.0 * std::log(0.9)));
  CHECK(mid_loss(with_image_scores({0.9, 0.1}), std::vector<double>{1.0, 0.0}) == doctest::Approx(0.2107).epsilon(1e-3));
  // Saturated predictions are clamped, so the loss stays finite.
  const double perfect = mid_loss(with_image_scores({1.0, 0.0}), std::vector<double>{1.0, 0.0});
  CHECK(perfect == doctest::Approx(-2.0 * std::log(1.0 - kProbEpsilon)));
  CHECK(std::isfinite(mid_loss(with_image_scores({0.0}), std::vector<double>{1.0})));
  CHECK(mid_loss(with_image_scores({0.0}), std::vector<double>{1.0}) == doctest::Approx(-std::log(kProbEpsilon)));
  CHECK_THROWS_AS(mid_loss(with_image_scores({0.5}), std::vector<double>{1.0, 0.0}), ShapeMismatch);
}

TEST_CASE("label sets become multi-hot targets") {
  CHECK(multi_hot({{0, 2}, Provenance::gold}, 3) == std::vector<double>{1, 0, 1});
  CHECK_THROWS_AS(multi_hot({{3}, Provenance::gold}, 3), ShapeMismatch);
  CHECK(mid_loss(with_image_scores({0.5, 0.5}), LabelSet{{1}, Provenance::gold}) ==
        doctest::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("initial detection scores are the product of both streams") {
  ScoreBundle s;
  s.cls_logits = Matrix(2, 2);
  s.cls_probs = Matrix(2, 2);
  s.det_probs = Matrix(2, 2);
  s.cls_probs.data = {0.5, 0.2, 0.4, 1.0};
  s.det_probs.data = {0.25, 0.5, 0.75, 0.5};
  const auto initial = initial_detection_scores(s);
  REQUIRE(initial.cols == 3);
  CHECK(initial(0, 0) == doctest::Approx(0.125));
  CHECK(initial(0, 1) == doctest::Approx(0.1));
  CHECK(initial(1, 0) == doctest::Approx(0.3));
  CHECK(initial(1, 1) == doctest::Approx(0.5));
  CHECK(initial(0, 2) == 0.0);
  CHECK(initial(1, 2) == 0.0);

  s.cls_probs = Matrix(2, 2);
  for (const double v : initial_detection_scores(s).data) CHECK(v == 0.0);

  auto single = mil_forward(one_hot_rows(1), MilHead(1, 2));
  const auto s1 = initial_detection_scores(single);
  CHECK(s1(0, 0) == single.cls_probs(0, 0));
  CHECK(s1(0, 2) == 0.0);
}

TEST_CASE("non-finite inputs are rejected") {
  auto p = one_hot_rows(2);
  p.features(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(p.validate(), NonFiniteScore);
  CHECK_THROWS_AS(mil_forward(p, MilHead(2, 1)), NonFiniteScore);
  p.features(1, 1) = std::nan("");
  CHECK_THROWS_AS(mil_forward(p, MilHead(2, 1)), NonFiniteScore);
}

TEST_CASE("proposal sets are validated") {
  auto p = one_hot_rows(3);
  CHECK_NOTHROW(p.validate());
  CHECK_THROWS_AS(p.validate(2), ShapeMismatch);
  p.boxes.pop_back();
  CHECK_THROWS_AS(p.validate(), ShapeMismatch);
  ProposalSet empty;
  CHECK_THROWS_AS(empty.validate(), ShapeMismatch);
  auto degenerate = one_hot_rows(1);
  degenerate.boxes[0].x2 = degenerate.boxes[0].x1;
  CHECK_THROWS_AS(degenerate.validate(), ShapeMismatch);
}

TEST_CASE("multiple-instance gradients match finite differences") {
  testing::Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto r = testing::gradcheck_mid(rng);
    CHECK(r.relative_error < testing::kGradientTolerance);
  }
}

}
