#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "aqi/siamese.hpp"
#include "oracles.hpp"

namespace aqi {
namespace {

FeatureVector random_point(std::mt19937_64& rng, const std::string& id = "x") {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureVector x;
  x.candidate_id = id;
  for (auto& v : x.values) v = u(rng);
  return x;
}

// Forward pass written from the definition: every unit is
// logistic(sum_j softplus(v_kj) x_j + b_k).
double reference_forward(const SiameseNet& net, const std::vector<double>& x) {
  std::vector<double> a = x;
  for (const auto& layer : net.layers) {
    std::vector<double> next(static_cast<std::size_t>(layer.free.rows()));
    for (Eigen::Index k = 0; k < layer.free.rows(); ++k) {
      double z = layer.bias[k];
      for (Eigen::Index j = 0; j < layer.free.cols(); ++j)
        z += std::log1p(std::exp(layer.free(k, j))) * a[static_cast<std::size_t>(j)];
      next[static_cast<std::size_t>(k)] = 1.0 / (1.0 + std::exp(-z));
    }
    a = std::move(next);
  }
  return a.front();
}

template <typename Sample>
std::vector<double> numeric_gradient(const SiameseNet& net, const std::vector<Sample>& batch, double margin,
                                     double eps) {
  auto loss = [&](const std::vector<double>& p) {
    SiameseNet probe = net;
    unflatten(probe, p);
    double s = 0;
    for (const auto& b : batch) s += sample_loss(probe, b, margin);
    return s / static_cast<double>(batch.size());
  };
  return oracle::central_differences(loss, flatten(net), eps);
}

TEST(Init, SameSeedSameBytes) {
  const auto a = flatten(init_network(default_architecture(), 7));
  const auto b = flatten(init_network(default_architecture(), 7));
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
  EXPECT_NE(a, flatten(init_network(default_architecture(), 8)));
}

TEST(Init, ArchitectureChecks) {
  try {
    init_network({21, 4, 2}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadArchitecture);
  }
  EXPECT_THROW(init_network({20, 4, 1}, 1), Error);
  EXPECT_THROW(init_network({21, 0, 1}, 1), Error);
  EXPECT_EQ(init_network({21, 16, 8, 1}, 1).parameter_count(), 21u * 16 + 16 + 16 * 8 + 8 + 8 + 1);
}

TEST(Forward, MatchesDefinitionAndRange) {
  std::mt19937_64 rng(2);
  const auto net = init_network(default_architecture(), 3);
  for (int i = 0; i < 50; ++i) {
    const auto x = random_point(rng);
    const double s = forward(net, x);
    EXPECT_NEAR(s, reference_forward(net, {x.values.begin(), x.values.end()}), 1e-14);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
  }
}

TEST(Forward, MonotoneInEveryInput) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 400; ++trial) {
    const auto net = init_network(default_architecture(), static_cast<std::uint64_t>(trial % 10));
    auto lo = random_point(rng);
    auto hi = lo;
    for (auto& v : hi.values) v += (1 - v) * u(rng) * (u(rng) < 0.3);
    ASSERT_LE(forward(net, lo), forward(net, hi) + 1e-12);
  }
}

TEST(ContrastiveLoss, Examples) {
  EXPECT_DOUBLE_EQ(contrastive_loss(0.5, 0.2, 1, 0.5), 0.3 * 0.3);
  EXPECT_DOUBLE_EQ(contrastive_loss(0.4, 0.4, 0, 0.5), 0.25);
  EXPECT_EQ(contrastive_loss(0.9, 0.3, 0, 0.5), 0.0);
  EXPECT_EQ(contrastive_loss(0.8, 0.3, 0, 0.5), 0.0);
  EXPECT_EQ(contrastive_loss(0.6, 0.6, 1, 0.5), 0.0);
}

TEST(TripletLoss, Examples) {
  EXPECT_EQ(triplet_loss(0.5, 0.6, 0.0, 0.2), 0.0);
  EXPECT_NEAR(triplet_loss(0.5, 0.1, 0.6, 0.2), 0.25, 1e-15);
  EXPECT_NEAR(triplet_loss(0.3, 0.3, 0.3, 0.2), 0.04, 1e-17);
}

TEST(Losses, NonNegativeProperty) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 5000; ++i) {
    const double m = 0.05 + 0.95 * u(rng);
    ASSERT_GE(contrastive_loss(u(rng), u(rng), i % 2, m), 0.0);
    ASSERT_GE(triplet_loss(u(rng), u(rng), u(rng), m), 0.0);
  }
}

TEST(Training, IdenticalSimilarPairsAreAFixedPoint) {
  std::mt19937_64 rng(10);
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < 6; ++i) {
    const auto x = random_point(rng);
    pairs.push_back({x, x, 1});
  }
  const auto net = init_network(default_architecture(), 1);
  const auto [loss, g] = batch_loss_and_gradient(net, std::span<const TrainingPair>(pairs), 0.5);
  EXPECT_EQ(loss, 0.0);
  for (double v : flatten(g)) EXPECT_EQ(v, 0.0);

  TrainConfig cfg;
  cfg.epochs = 5;
  const auto r = train_contrastive(net, pairs, cfg);
  for (double l : r.loss_history) EXPECT_EQ(l, 0.0);
  EXPECT_EQ(flatten(r.net), flatten(net));
}

TEST(Training, DegenerateTripletsHaveMarginSquaredLoss) {
  std::mt19937_64 rng(12);
  std::vector<TrainingTriplet> ts;
  for (int i = 0; i < 4; ++i) {
    const auto x = random_point(rng);
    ts.push_back({x, x, x});
  }
  const auto net = init_network(default_architecture(), 2);
  for (const auto& t : ts) EXPECT_NEAR(sample_loss(net, t, 0.2), 0.04, 1e-17);
}

TEST(Training, SameSeedSameHistory) {
  std::mt19937_64 rng(14);
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < 20; ++i) pairs.push_back({random_point(rng), random_point(rng), i % 3 == 0});
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 8;
  const auto net = init_network(default_architecture(), 5);
  const auto a = train_contrastive(net, pairs, cfg);
  const auto b = train_contrastive(net, pairs, cfg);
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_EQ(flatten(a.net), flatten(b.net));
  EXPECT_EQ(a.loss_history.size(), 15u);
}

TEST(Training, TrainedNetStaysMonotone) {
  std::mt19937_64 rng(15);
  std::vector<TrainingTriplet> ts;
  for (int i = 0; i < 12; ++i) ts.push_back({random_point(rng), random_point(rng), random_point(rng)});
  TrainConfig cfg;
  cfg.epochs = 30;
  const auto r = train_triplet(init_network(default_architecture(), 1), ts, cfg);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    auto lo = random_point(rng);
    auto hi = lo;
    for (auto& v : hi.values) v += (1 - v) * u(rng);
    ASSERT_LE(forward(r.net, lo), forward(r.net, hi) + 1e-12);
  }
}

// Backpropagation against central differences computed by the test oracle.
TEST(Gradient, ContrastiveMatchesCentralDifferences) {
  std::mt19937_64 rng(16);
  const double eps = 1e-5;
  for (int trial = 0; trial < 3; ++trial) {
    const auto net = init_network(default_architecture(), static_cast<std::uint64_t>(100 + trial));
    std::vector<TrainingPair> batch;
    for (int i = 0; i < 8; ++i) batch.push_back({random_point(rng), random_point(rng), i % 2});
    const auto smooth = smooth_samples(net, std::span<const TrainingPair>(batch), 0.5, eps);
    ASSERT_FALSE(smooth.empty());
    const auto analytic = flatten(batch_loss_and_gradient(net, std::span<const TrainingPair>(smooth), 0.5).second);
    const auto numeric = numeric_gradient(net, smooth, 0.5, eps);
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      const double scale = std::max(std::abs(analytic[k]), std::abs(numeric[k]));
      if (scale == 0) continue;
      ASSERT_LE(std::abs(analytic[k] - numeric[k]) / scale, 1e-4) << "parameter " << k;
    }
  }
}

TEST(Gradient, TripletCheckWithinTolerance) {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 3; ++trial) {
    const auto net = init_network(default_architecture(), static_cast<std::uint64_t>(200 + trial));
    std::vector<TrainingTriplet> batch;
    for (int i = 0; i < 8; ++i) batch.push_back({random_point(rng), random_point(rng), random_point(rng)});
    EXPECT_LE(gradient_check(net, std::span<const TrainingTriplet>(batch), 0.5), 1e-4);
  }
}

TEST(Gradient, ZeroLossBatchHasZeroError) {
  std::mt19937_64 rng(19);
  const auto x = random_point(rng);
  std::vector<TrainingPair> batch = {{x, x, 1}};
  const auto net = init_network(default_architecture(), 3);
  EXPECT_EQ(gradient_check(net, std::span<const TrainingPair>(batch), 0.5), 0.0);
}

TEST(Gradient, PerturbedGradientIsCaught) {
  std::mt19937_64 rng(20);
  const auto net = init_network(default_architecture(), 4);
  std::vector<TrainingPair> batch;
  for (int i = 0; i < 6; ++i) batch.push_back({random_point(rng), random_point(rng), i % 2});
  auto [loss, g] = batch_loss_and_gradient(net, std::span<const TrainingPair>(batch), 0.5);
  (void)loss;
  g.bias.back()[0] *= 1.5;
  EXPECT_GT(gradient_check_against(net, std::span<const TrainingPair>(batch), 0.5, 1e-5, g), 1e-2);
}

TEST(Gradient, EpsilonRange) {
  const auto net = init_network(default_architecture(), 4);
  std::vector<TrainingPair> batch;
  EXPECT_THROW(gradient_check(net, std::span<const TrainingPair>(batch), 0.5, 1e-3), Error);
}

TEST(Documents, NetworkAndConfigRoundTrip) {
  const auto net = init_network({21, 4, 1}, 9);
  const auto again = network_from_json(network_to_json(net));
  EXPECT_EQ(flatten(again), flatten(net));
  EXPECT_EQ(again.layer_sizes, net.layer_sizes);
  TrainConfig cfg;
  cfg.margin = 0.3;
  cfg.epochs = 17;
  const auto c2 = train_config_from_json(train_config_to_json(cfg));
  EXPECT_EQ(c2.margin, 0.3);
  EXPECT_EQ(c2.epochs, 17u);
  cfg.margin = 0;
  EXPECT_THROW(check_train_config(cfg), Error);
}

}  // namespace
}  // namespace aqi
