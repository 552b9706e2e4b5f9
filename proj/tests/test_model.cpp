#include <doctest.h>

#include <cmath>
#include <random>

#include "binn/model.hpp"
#include "test_support.hpp"

using namespace binn;
using binn::testing::finite_difference_gradient;
using binn::testing::max_relative_error;
using binn::testing::random_matrix;
using binn::testing::random_vector;

namespace {

std::vector<std::string> names(const std::string& prefix, Index n) {
  std::vector<std::string> out;
  for (Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

LayerMask mask_4x2() {
  // Entity 0 reads markers {0,1}; entity 1 reads markers {2,3}.
  return LayerMask(1, names("m", 4), {"e0", "e1"}, {{0, 1}, {2, 3}});
}

SubnetSpec linear_spec() {
  SubnetSpec s;
  s.hidden_widths = {};
  s.activation = Activation::kIdentity;
  s.output_activation = Activation::kIdentity;
  return s;
}

// Random model over p markers: two entities with overlapping support plus two
// unannotated markers feeding the residual net.
BinnModel small_random_model(Index p, std::uint64_t seed, bool hidden = true) {
  std::vector<std::vector<Index>> support = {{0, 1, 2}, {2, 3, 4, 5}};
  LayerMask mask(1, names("m", p), {"a", "b"}, support);
  SubnetSpec pathway;
  pathway.hidden_widths = hidden ? std::vector<int>{3} : std::vector<int>{};
  SubnetSpec residual;
  residual.hidden_widths = hidden ? std::vector<int>{2} : std::vector<int>{};
  SubnetSpec integrator;
  integrator.hidden_widths = {4};
  return BinnModel::build({mask}, pathway, residual, integrator, seed);
}

}  // namespace

TEST_CASE("mask structure routes inputs: latent 0 ignores markers 2,3") {
  auto model = BinnModel::build({mask_4x2()}, linear_spec(), linear_spec(),
                                linear_spec(), 42);
  std::mt19937_64 rng(1);
  Matrix X = random_matrix(5, 4, rng);
  const auto base = model.forward(X);

  Matrix X2 = X;
  X2.col(2).setConstant(9.0);
  X2.col(3).setConstant(-9.0);
  const auto moved = model.forward(X2);
  CHECK((base.per_layer_latents[0].col(0) - moved.per_layer_latents[0].col(0)).norm() == 0.0);
  CHECK((base.per_layer_latents[0].col(1) - moved.per_layer_latents[0].col(1)).norm() != 0.0);
}

TEST_CASE("same seed gives bit-identical parameters") {
  auto a = small_random_model(8, 77);
  auto b = small_random_model(8, 77);
  CHECK(a.parameters() == b.parameters());
  auto c = small_random_model(8, 78);
  CHECK(a.parameters() != c.parameters());
}

TEST_CASE("all-zero mask column is rejected") {
  Matrix entries = Matrix::Zero(4, 2);
  entries(0, 0) = 1;
  entries(1, 0) = 1;
  CHECK_THROWS_AS(LayerMask::from_dense(1, entries, names("m", 4), {"e0", "e1"}),
                  EmptyEntity);
}

TEST_CASE("mask chain dimension mismatch is rejected") {
  LayerMask l1(1, names("m", 4), {"e0", "e1"}, {{0, 1}, {2, 3}});
  LayerMask l2_bad(2, names("x", 3), {"f0"}, {{0, 1}});
  CHECK_THROWS_AS(
      BinnModel::build({l1, l2_bad}, linear_spec(), linear_spec(), linear_spec(), 0),
      DimensionMismatch);
}

TEST_CASE("identity linear model reproduces its input") {
  LayerMask mask(1, {"m0"}, {"e0"}, {{0}});
  auto model = BinnModel::build({mask}, linear_spec(), linear_spec(), linear_spec(), 0);
  REQUIRE(model.parameter_count() == 4);  // subnet w,b + integrator w,b
  Vector theta(4);
  theta << 1.0, 0.0, 1.0, 0.0;
  model.set_parameters(theta);

  Matrix X(1, 1);
  X << 2.0;
  const auto trace = model.forward(X);
  CHECK(trace.per_layer_latents[0](0, 0) == 2.0);
  CHECK(trace.prediction[0] == 2.0);
  CHECK(trace.residual_output.cols() == 0);
  CHECK_FALSE(model.has_residual());
}

TEST_CASE("forward rejects wrong marker count") {
  auto model = small_random_model(8, 3);
  std::mt19937_64 rng(2);
  Matrix X = random_matrix(4, 7, rng);
  CHECK_THROWS_AS(model.forward(X), DimensionMismatch);
}

TEST_CASE("forward matches an independent scalar re-implementation") {
  // Hand-rolled evaluation of the masked forward chain for a 8-marker,
  // 2-entity model with one hidden sigmoid layer per subnet.
  const Index p = 8;
  auto model = small_random_model(p, 1234);
  std::mt19937_64 rng(5);
  Matrix X = random_matrix(3, p, rng);
  const auto trace = model.forward(X);

  const auto sigmoid = [](double u) { return 1.0 / (1.0 + std::exp(-u)); };
  const Vector theta = model.parameters();

  // Scalar MLP evaluation straight from the flat layout:
  // per dense layer, the out-by-in weight matrix column-major, then bias.
  struct Walker {
    const Vector& theta;
    Index off = 0;
    std::vector<double> dense(const std::vector<double>& in, Index out_w,
                              bool sigmoid_act) {
      const Index in_w = static_cast<Index>(in.size());
      std::vector<double> pre(static_cast<std::size_t>(out_w), 0.0);
      for (Index c = 0; c < in_w; ++c) {
        for (Index r = 0; r < out_w; ++r) {
          pre[static_cast<std::size_t>(r)] += theta[off + c * out_w + r] * in[static_cast<std::size_t>(c)];
        }
      }
      off += in_w * out_w;
      for (Index r = 0; r < out_w; ++r) {
        pre[static_cast<std::size_t>(r)] += theta[off + r];
      }
      off += out_w;
      if (sigmoid_act) {
        for (auto& v : pre) v = 1.0 / (1.0 + std::exp(-v));
      }
      return pre;
    }
  };

  for (Index row = 0; row < X.rows(); ++row) {
    Walker w{theta};
    // Entity a: markers {0,1,2}, hidden width 3 sigmoid, output identity.
    std::vector<double> in_a = {X(row, 0), X(row, 1), X(row, 2)};
    const double lat_a = w.dense(w.dense(in_a, 3, true), 1, false)[0];
    // Entity b: markers {2,3,4,5}.
    std::vector<double> in_b = {X(row, 2), X(row, 3), X(row, 4), X(row, 5)};
    const double lat_b = w.dense(w.dense(in_b, 3, true), 1, false)[0];
    // Residual: markers {6,7}, hidden width 2.
    std::vector<double> in_r = {X(row, 6), X(row, 7)};
    const double res = w.dense(w.dense(in_r, 2, true), 1, false)[0];
    // Integrator over [lat_a, lat_b, res], hidden width 4.
    const double yhat = w.dense(w.dense({lat_a, lat_b, res}, 4, true), 1, false)[0];

    CHECK(trace.per_layer_latents[0](row, 0) == doctest::Approx(lat_a).epsilon(1e-12));
    CHECK(trace.per_layer_latents[0](row, 1) == doctest::Approx(lat_b).epsilon(1e-12));
    CHECK(trace.residual_output(row, 0) == doctest::Approx(res).epsilon(1e-12));
    CHECK(trace.prediction[row] == doctest::Approx(yhat).epsilon(1e-12));
    (void)sigmoid;
  }
}

TEST_CASE("residual partition covers all markers exactly once") {
  auto model = small_random_model(8, 9);
  REQUIRE(model.has_residual());
  const auto& res = model.residual_marker_index();
  CHECK(res == std::vector<Index>{6, 7});

  std::vector<char> covered(8, 0);
  for (Index j = 0; j < model.mask(1).cols(); ++j) {
    for (Index m : model.mask(1).support(j)) covered[static_cast<std::size_t>(m)] = 1;
  }
  for (Index m : res) {
    CHECK_FALSE(covered[static_cast<std::size_t>(m)]);
    covered[static_cast<std::size_t>(m)] = 1;
  }
  for (char c : covered) CHECK(c == 1);
}

TEST_CASE("zero upstream gradient produces all-zero parameter gradients") {
  auto model = small_random_model(8, 11);
  std::mt19937_64 rng(6);
  Matrix X = random_matrix(4, 8, rng);
  const Vector g = model.backward(X, Vector::Zero(4));
  CHECK(g.norm() == 0.0);
}

TEST_CASE("analytic gradients match finite differences (mse loss)") {
  auto model = small_random_model(10, 21);
  std::mt19937_64 rng(8);
  const Matrix X = random_matrix(12, 10, rng);
  const Vector y = random_vector(12, rng);
  LossConfig cfg{LossMode::kMse, 0.0};

  Vector analytic;
  model.loss_and_gradient(X, y, nullptr, cfg, analytic);
  const Vector fd = finite_difference_gradient(model, X, y, nullptr, cfg);
  CHECK(max_relative_error(analytic, fd) <= 1e-4);
}

TEST_CASE("analytic gradients match finite differences (constrained losses)") {
  auto model = small_random_model(10, 22);
  std::mt19937_64 rng(9);
  const Matrix X = random_matrix(14, 10, rng);
  const Vector y = random_vector(14, rng);
  auto truth = IntermediateTruth::single_layer(random_matrix(14, 2, rng), 0.7, 4);

  for (LossMode mode : {LossMode::kSoftConstraint, LossMode::kHardConstraint}) {
    LossConfig cfg{mode, 0.4};
    Vector analytic;
    model.loss_and_gradient(X, y, &truth, cfg, analytic);
    const Vector fd = finite_difference_gradient(model, X, y, &truth, cfg);
    CHECK(max_relative_error(analytic, fd) <= 1e-4);
  }
}

TEST_CASE("multi-layer chain: forward shapes and gradient check") {
  // 6 markers -> 3 gene entities -> 2 metabolite entities.
  LayerMask l1(1, names("m", 6), {"g0", "g1", "g2"}, {{0, 1}, {2, 3}, {4}});
  LayerMask l2(2, {"g0", "g1", "g2"}, {"A", "B"}, {{0, 1}, {1, 2}});
  SubnetSpec pathway;
  pathway.hidden_widths = {2};
  SubnetSpec integrator;
  integrator.hidden_widths = {3};
  auto model = BinnModel::build({l1, l2}, pathway, pathway, integrator, 5);

  std::mt19937_64 rng(10);
  const Matrix X = random_matrix(7, 6, rng);
  const auto trace = model.forward(X);
  REQUIRE(trace.per_layer_latents.size() == 2);
  CHECK(trace.per_layer_latents[0].cols() == 3);
  CHECK(trace.per_layer_latents[1].cols() == 2);
  CHECK(model.has_residual());  // marker 5 is unannotated

  const Vector y = random_vector(7, rng);
  // Truth at the final layer only.
  IntermediateTruth truth;
  truth.layers.resize(2);
  IntermediateTruth::Layer layer;
  layer.values = random_matrix(7, 2, rng);
  layer.line_labeled.assign(7, 1);
  layer.entity_available.assign(2, 1);
  truth.layers[1] = layer;

  LossConfig cfg{LossMode::kSoftConstraint, 0.3};
  Vector analytic;
  model.loss_and_gradient(X, y, &truth, cfg, analytic);
  const Vector fd = finite_difference_gradient(model, X, y, &truth, cfg);
  CHECK(max_relative_error(analytic, fd) <= 1e-4);
}

TEST_CASE("masking invariance: perturbing masked-out inputs changes nothing, exactly") {
  // A linear integrator makes the backward signal into each subnet a fixed
  // multiple of the upstream gradient, so subnet-j parameter gradients cannot
  // depend on markers outside j's support. (With a nonlinear integrator the
  // latent columns are still exactly invariant but the gradients are not.)
  std::vector<std::vector<Index>> support = {{0, 1, 2}, {2, 3, 4, 5}};
  LayerMask mask(1, names("m", 8), {"a", "b"}, support);
  SubnetSpec pathway;
  pathway.hidden_widths = {3};
  auto model = BinnModel::build({mask}, pathway, pathway, linear_spec(), 31);

  std::mt19937_64 rng(12);
  std::uniform_int_distribution<Index> pick_row(0, 5);
  std::uniform_real_distribution<double> bump(-5.0, 5.0);

  const Matrix X = random_matrix(6, 8, rng);
  const auto base = model.forward(X);
  const Vector upstream = random_vector(6, rng);

  // Gradient restricted to entity a's subnet parameters.
  const auto subnet_grad = [&](const Matrix& input) {
    const Vector g = model.backward(input, upstream);
    return Vector(g.head(model.pathway_subnet(1, 0).parameter_count()));
  };
  const Vector base_grad = subnet_grad(X);

  for (int trial = 0; trial < 200; ++trial) {
    Matrix X2 = X;
    // Markers 3,4,5,6,7 are outside entity a's support {0,1,2}.
    const Index col = 3 + (trial % 5);
    X2(pick_row(rng), col) += bump(rng);
    const auto moved = model.forward(X2);
    // Exact, bitwise equality.
    for (Index r = 0; r < X.rows(); ++r) {
      CHECK(moved.per_layer_latents[0](r, 0) == base.per_layer_latents[0](r, 0));
    }
    const Vector g2 = subnet_grad(X2);
    for (Index i = 0; i < g2.size(); ++i) CHECK(g2[i] == base_grad[i]);
  }
}

TEST_CASE("sigmoid-activated latents stay in (0,1)") {
  SubnetSpec pathway;
  pathway.hidden_widths = {3};
  pathway.output_activation = Activation::kSigmoid;
  LayerMask mask(1, names("m", 4), {"e0", "e1"}, {{0, 1}, {2, 3}});
  SubnetSpec integrator;
  integrator.hidden_widths = {4};
  auto model = BinnModel::build({mask}, pathway, pathway, integrator, 2);

  std::mt19937_64 rng(14);
  const Matrix X = random_matrix(50, 4, rng, -10.0, 10.0);
  const auto trace = model.forward(X);
  CHECK((trace.per_layer_latents[0].array() > 0.0).all());
  CHECK((trace.per_layer_latents[0].array() < 1.0).all());
}

TEST_CASE("latent clamp fixes one column and leaves siblings untouched") {
  auto model = small_random_model(8, 55);
  std::mt19937_64 rng(15);
  const Matrix X = random_matrix(6, 8, rng);
  const auto base = model.forward(X);

  LatentClamp clamp{1, 0, 0.25};
  const auto clamped = model.forward(X, clamp);
  CHECK((clamped.per_layer_latents[0].col(0).array() == 0.25).all());
  for (Index r = 0; r < 6; ++r) {
    CHECK(clamped.per_layer_latents[0](r, 1) == base.per_layer_latents[0](r, 1));
  }
  // Prediction changes (entity a influences the integrator).
  CHECK((clamped.prediction - base.prediction).norm() != 0.0);

  CHECK_THROWS_AS(model.forward(X, LatentClamp{1, 7, 0.0}), UnknownEntity);
  CHECK_THROWS_AS(model.forward(X, LatentClamp{3, 0, 0.0}), UnknownEntity);
}

TEST_CASE("auto hidden width resolves to min(8, ceil(fan_in/2))") {
  SubnetSpec spec;
  spec.hidden_widths = {kAutoHiddenWidth};
  Subnet tiny(3, spec);
  CHECK(tiny.layer_widths() == std::vector<int>{3, 2, 1});
  Subnet wide(400, spec);
  CHECK(wide.layer_widths() == std::vector<int>{400, 8, 1});
  Subnet one(1, spec);
  CHECK(one.layer_widths() == std::vector<int>{1, 1, 1});
}

TEST_CASE("deterministic forward: same seed and input, same outputs") {
  auto a = small_random_model(8, 91);
  auto b = small_random_model(8, 91);
  std::mt19937_64 rng(16);
  const Matrix X = random_matrix(9, 8, rng);
  const auto ta = a.forward(X);
  const auto tb = b.forward(X);
  CHECK((ta.prediction - tb.prediction).norm() == 0.0);
}
