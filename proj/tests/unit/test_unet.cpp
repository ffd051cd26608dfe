#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bevcast/unet.hpp"

using namespace bevcast;

namespace {

// Direct-loop evaluation of the layer recipe, independent of the im2col and
// GEMM path.
class NaiveUNet {
 public:
  NaiveUNet(const UNetConfig& cfg, std::span<const double> p, const std::vector<LayerShape>& layers)
      : cfg_(cfg), p_(p), layers_(layers) {}

  Tensor<double> forward(const Tensor<double>& x) const {
    const int n = cfg_.depth_levels;
    std::size_t li = 0;
    std::vector<Tensor<double>> skip;
    Tensor<double> a = relu(conv(layers_[li++], x));
    skip.push_back(relu(conv(layers_[li++], a)));
    for (int i = 1; i <= n; ++i) {
      Tensor<double> pooled = pool(skip.back());
      Tensor<double> b = relu(conv(layers_[li++], pooled));
      skip.push_back(relu(conv(layers_[li++], b)));
    }
    Tensor<double> u = skip.back();
    for (int i = n; i >= 1; --i) {
      Tensor<double> up = upconv(layers_[li++], u);
      Tensor<double> cat(up.channels + skip[i - 1].channels, up.rows, up.cols);
      std::copy(up.data.begin(), up.data.end(), cat.data.begin());
      std::copy(skip[i - 1].data.begin(), skip[i - 1].data.end(), cat.data.begin() + up.size());
      Tensor<double> b = relu(conv(layers_[li++], cat));
      u = relu(conv(layers_[li++], b));
    }
    Tensor<double> out = conv(layers_[li++], u);
    for (double& v : out.data) {
      if (cfg_.terminal == Terminal::tanh) v = std::tanh(v);
      if (cfg_.terminal == Terminal::clipped_relu) v = std::clamp(v, 0.0, cfg_.clip_hi);
    }
    return out;
  }

 private:
  static Tensor<double> relu(Tensor<double> t) {
    for (double& v : t.data) v = std::max(v, 0.0);
    return t;
  }

  // Weight (o, ci, tap) sits at offset + (o * in + ci) * taps + tap.
  Tensor<double> conv(const LayerShape& L, const Tensor<double>& x) const {
    const int taps = L.kind == LayerKind::conv3x3 ? 9 : 1;
    const int half = L.kind == LayerKind::conv3x3 ? 1 : 0;
    Tensor<double> y(L.out_channels, x.rows, x.cols);
    for (int o = 0; o < L.out_channels; ++o) {
      for (int r = 0; r < x.rows; ++r) {
        for (int c = 0; c < x.cols; ++c) {
          double s = p_[L.bias_offset + o];
          for (int ci = 0; ci < L.in_channels; ++ci) {
            for (int t = 0; t < taps; ++t) {
              const int rr = r + t / 3 * (taps == 9) - half;
              const int cc = c + t % 3 * (taps == 9) - half;
              if (rr < 0 || rr >= x.rows || cc < 0 || cc >= x.cols) continue;
              s += p_[L.weight_offset + static_cast<std::size_t>((o * L.in_channels + ci) * taps + t)] *
                   x.at(ci, rr, cc);
            }
          }
          y.at(o, r, c) = s;
        }
      }
    }
    return y;
  }

  static Tensor<double> pool(const Tensor<double>& x) {
    Tensor<double> y(x.channels, x.rows / 2, x.cols / 2);
    for (int ch = 0; ch < x.channels; ++ch) {
      for (int r = 0; r < y.rows; ++r) {
        for (int c = 0; c < y.cols; ++c) {
          y.at(ch, r, c) = std::max({x.at(ch, 2 * r, 2 * c), x.at(ch, 2 * r, 2 * c + 1),
                                     x.at(ch, 2 * r + 1, 2 * c), x.at(ch, 2 * r + 1, 2 * c + 1)});
        }
      }
    }
    return y;
  }

  // Weight (o, ci) of offset (a, b) sits at offset + ((a * 2 + b) * out + o) * in + ci.
  Tensor<double> upconv(const LayerShape& L, const Tensor<double>& x) const {
    Tensor<double> y(L.out_channels, x.rows * 2, x.cols * 2);
    for (int o = 0; o < L.out_channels; ++o) {
      for (int r = 0; r < y.rows; ++r) {
        for (int c = 0; c < y.cols; ++c) {
          const int a = r % 2, b = c % 2;
          double s = p_[L.bias_offset + o];
          for (int ci = 0; ci < L.in_channels; ++ci) {
            s += p_[L.weight_offset +
                    static_cast<std::size_t>(((a * 2 + b) * L.out_channels + o) * L.in_channels + ci)] *
                 x.at(ci, r / 2, c / 2);
          }
          y.at(o, r, c) = s;
        }
      }
    }
    return y;
  }

  UNetConfig cfg_;
  std::span<const double> p_;
  const std::vector<LayerShape>& layers_;
};

Tensor<double> random_tensor(int c, int r, int w, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(c, r, w);
  for (double& v : t.data) v = u(gen);
  return t;
}

UNetModel<double> randomized(const UNetConfig& cfg, std::uint64_t seed) {
  auto m = UNetModel<double>::build(cfg, seed);
  // Nonzero biases so every parameter carries signal.
  std::mt19937_64 gen(seed + 1);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  auto p = m.parameters();
  const auto mask = m.weight_mask();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!mask[i]) p[i] = u(gen);
  }
  return m;
}

}  // namespace

TEST(Config, MinimumInputGate) {
  UNetConfig cfg;
  cfg.depth_levels = 4;
  EXPECT_EQ(cfg.min_input_size(), 16);
  EXPECT_NO_THROW(cfg.check_input_size(16, 16));
  EXPECT_THROW(cfg.check_input_size(12, 12), std::invalid_argument);
  EXPECT_THROW(cfg.check_input_size(15, 16), std::invalid_argument);
  EXPECT_THROW(cfg.check_input_size(0, 16), std::invalid_argument);
  cfg.depth_levels = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.depth_levels = 9;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(ReceptiveRadius, ReportedValues) {
  EXPECT_EQ(receptive_radius(4), 76);
  EXPECT_EQ(receptive_radius(5), 156);
  EXPECT_EQ(receptive_radius(2), 16);
  EXPECT_THROW(receptive_radius(1), std::invalid_argument);
}

TEST(ParamCount, MatchesBuiltModelForRandomConfigs) {
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<int> n(2, 6), k(1, 12), d(1, 10);
  for (int i = 0; i < 20; ++i) {
    UNetConfig cfg;
    cfg.depth_levels = n(gen);
    cfg.base_features = k(gen);
    cfg.in_channels = d(gen);
    cfg.out_channels = d(gen);
    const auto m = UNetModel<float>::build(cfg, 3);
    EXPECT_EQ(static_cast<std::int64_t>(m.parameter_count()), param_count(cfg));
  }
}

TEST(ParamCount, LayerShapeSum) {
  UNetConfig cfg;
  const auto m = UNetModel<float>::build(cfg, 0);
  std::int64_t total = 0;
  for (const auto& L : m.layers()) {
    const int taps = L.kind == LayerKind::conv3x3 ? 9 : (L.kind == LayerKind::upconv2x2 ? 4 : 1);
    total += static_cast<std::int64_t>(L.in_channels) * L.out_channels * taps + L.out_channels;
  }
  EXPECT_EQ(total, param_count(cfg));
  EXPECT_EQ(param_count(cfg), 486240);
}

TEST(ParamCount, ScalingWithWidthAndDepth) {
  UNetConfig cfg;
  cfg.base_features = 64;
  const double at_k = static_cast<double>(param_count(cfg));
  cfg.base_features = 128;
  EXPECT_NEAR(param_count(cfg) / at_k, 4.0, 0.05);
  // The 3x3 encoder/decoder convolutions dominate and grow 4x per level, so
  // the depth ratio tends to 4 for this recipe.
  cfg.base_features = 8;
  cfg.depth_levels = 7;
  const double n7 = static_cast<double>(param_count(cfg));
  cfg.depth_levels = 8;
  EXPECT_NEAR(param_count(cfg) / n7, 4.0, 0.01);
}

TEST(Build, SameSeedIsBitIdentical) {
  UNetConfig cfg;
  cfg.depth_levels = 3;
  const auto a = UNetModel<float>::build(cfg, 17);
  const auto b = UNetModel<float>::build(cfg, 17);
  const auto c = UNetModel<float>::build(cfg, 18);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
}

TEST(Build, FromParametersChecksLength) {
  UNetConfig cfg;
  EXPECT_THROW(UNetModel<float>::from_parameters(cfg, std::vector<float>(10)), std::invalid_argument);
}

TEST(Forward, MatchesDirectLoopOracle) {
  for (const Terminal t : {Terminal::linear, Terminal::tanh, Terminal::clipped_relu}) {
    UNetConfig cfg;
    cfg.depth_levels = 2;
    cfg.base_features = 3;
    cfg.in_channels = 2;
    cfg.out_channels = 3;
    cfg.terminal = t;
    cfg.clip_hi = 0.3;
    const auto m = randomized(cfg, 5);
    const auto x = random_tensor(2, 8, 12, 6);
    const auto y = m.forward(x);
    const NaiveUNet naive(cfg, m.parameters(), m.layers());
    const auto z = naive.forward(x);
    ASSERT_TRUE(y.same_shape(z));
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.data[i], z.data[i], 1e-12);
  }
}

TEST(Forward, ShapeAndChannelChecks) {
  UNetConfig cfg;
  cfg.depth_levels = 3;
  cfg.in_channels = 4;
  cfg.out_channels = 5;
  const auto m = UNetModel<float>::build(cfg, 1);
  Tensor<float> x(4, 24, 40);
  const auto y = m.forward(x);
  EXPECT_EQ(y.channels, 5);
  EXPECT_EQ(y.rows, 24);
  EXPECT_EQ(y.cols, 40);
  EXPECT_THROW(m.forward(Tensor<float>(3, 24, 40)), std::invalid_argument);
  EXPECT_THROW(m.forward(Tensor<float>(4, 20, 40)), std::invalid_argument);
}

TEST(Forward, TerminalRanges) {
  UNetConfig cfg;
  cfg.depth_levels = 2;
  cfg.in_channels = 2;
  cfg.out_channels = 2;
  auto x = random_tensor(2, 16, 16, 3, -50.0, 50.0);
  Tensor<float> xf(2, 16, 16);
  std::copy(x.data.begin(), x.data.end(), xf.data.begin());
  cfg.terminal = Terminal::clipped_relu;
  for (float v : UNetModel<float>::build(cfg, 2).forward(xf).data) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  cfg.terminal = Terminal::tanh;
  for (float v : UNetModel<float>::build(cfg, 2).forward(xf).data) {
    EXPECT_GE(v, -1.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Forward, ZeroWeightsGiveFinalBias) {
  UNetConfig cfg;
  cfg.depth_levels = 2;
  cfg.out_channels = 3;
  auto m = UNetModel<double>::build(cfg, 1);
  auto p = m.parameters();
  std::fill(p.begin(), p.end(), 0.0);
  const auto& post = m.layers().back();
  for (int o = 0; o < 3; ++o) p[post.bias_offset + o] = 0.1 * (o + 1);
  const auto y = m.forward(random_tensor(8, 16, 16, 4));
  for (int o = 0; o < 3; ++o) {
    for (int i = 0; i < 256; ++i) EXPECT_DOUBLE_EQ(y.data[o * 256 + i], 0.1 * (o + 1));
  }
}

TEST(Forward, RepeatedRunsAreBitIdentical) {
  UNetConfig cfg;
  const auto m = UNetModel<float>::build(cfg, 8);
  Tensor<float> x(8, 32, 32);
  for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = static_cast<float>((i * 37) % 101) / 101.0f;
  const auto a = m.forward(x);
  const auto b = m.forward(x);
  EXPECT_EQ(a.data, b.data);
}

class GradientCheck : public ::testing::TestWithParam<Terminal> {};

TEST_P(GradientCheck, AnalyticMatchesCentralDifferences) {
  UNetConfig cfg;
  cfg.depth_levels = 2;
  cfg.base_features = 2;
  cfg.in_channels = 2;
  cfg.out_channels = 2;
  cfg.terminal = GetParam();
  cfg.clip_hi = 1.0;
  auto m = randomized(cfg, 21);
  const auto x = random_tensor(2, 16, 16, 22, 0.0, 1.0);
  const auto target = random_tensor(2, 16, 16, 23, 0.0, 1.0);
  const double n = static_cast<double>(target.size());
  auto loss = [&](const UNetModel<double>& model) {
    const auto y = model.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y.data[i] - target.data[i]) * (y.data[i] - target.data[i]);
    return 0.5 * s / n;
  };
  std::vector<double> grad(m.parameter_count(), 0.0);
  Tensor<double> dx;
  m.forward_backward(
      x,
      [&](const Tensor<double>& y) {
        Tensor<double> d = y;
        for (std::size_t i = 0; i < d.size(); ++i) d.data[i] = (y.data[i] - target.data[i]) / n;
        return d;
      },
      grad, &dx);

  // Near the cube root of machine epsilon: small enough to avoid ReLU and pooling
  // kinks, large enough that rounding in the loss stays below the tolerance.
  const double h = 1e-5;
  double worst = 0.0;
  auto p = m.parameters();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    const double up = loss(m);
    p[i] = keep - h;
    const double down = loss(m);
    p[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    const double rel = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
    worst = std::max(worst, rel);
  }
  EXPECT_LT(worst, 1e-4);

  // Input gradient on a sample of pixels.
  auto xin = x;
  UNetModel<double>& mm = m;
  auto loss_in = [&](const Tensor<double>& xi) {
    const auto y = mm.forward(xi);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y.data[i] - target.data[i]) * (y.data[i] - target.data[i]);
    return 0.5 * s / n;
  };
  double worst_in = 0.0;
  for (std::size_t i = 0; i < xin.size(); i += 7) {
    const double keep = xin.data[i];
    xin.data[i] = keep + h;
    const double up = loss_in(xin);
    xin.data[i] = keep - h;
    const double down = loss_in(xin);
    xin.data[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    worst_in = std::max(worst_in, std::abs(fd - dx.data[i]) / std::max({std::abs(fd), std::abs(dx.data[i]), 1e-6}));
  }
  EXPECT_LT(worst_in, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Terminals, GradientCheck,
                         ::testing::Values(Terminal::linear, Terminal::tanh, Terminal::clipped_relu),
                         [](const auto& info) { return to_string(info.param); });

namespace {

UNetConfig probe_config(int n) {
  UNetConfig cfg;
  cfg.depth_levels = n;
  cfg.base_features = 2;
  cfg.in_channels = 1;
  cfg.out_channels = 1;
  return cfg;
}

}  // namespace

TEST(ReceptiveField, ProbeMatchesStructuralBox) {
  for (int n = 2; n <= 4; ++n) {
    const auto cfg = probe_config(n);
    const auto m = UNetModel<double>::build(cfg, 100 + n);
    const int rows = 256, cols = 32;
    const auto probe = empirical_receptive_field(m, rows, cols, 128, 16);
    const auto expect = structural_receptive_box(cfg, rows, cols, 128, 16);
    EXPECT_LE(std::abs(probe.row_min - expect.row_min), 4) << n;
    EXPECT_LE(std::abs(probe.row_max - expect.row_max), 4) << n;
    EXPECT_TRUE(expect.contains(probe.row_min, probe.col_min));
    EXPECT_TRUE(expect.contains(probe.row_max, probe.col_max));
  }
}

TEST(ReceptiveField, GrowsWithDepth) {
  int previous = 0;
  for (int n = 3; n <= 5; ++n) {
    const auto cfg = probe_config(n);
    const auto m = UNetModel<double>::build(cfg, 7);
    const auto box = empirical_receptive_field(m, 512, 32, 256, 16);
    const int extent = box.row_max - box.row_min;
    EXPECT_GT(extent, previous) << n;
    previous = extent;
  }
}

TEST(ReceptiveField, NoInfluenceOutsideStructuralBox) {
  const auto cfg = probe_config(3);
  const auto m = UNetModel<double>::build(cfg, 4);
  const int rows = 128, cols = 64, r = 60, c = 30;
  const auto box = structural_receptive_box(cfg, rows, cols, r, c);
  const auto base_in = random_tensor(1, rows, cols, 9, 0.0, 1.0);
  const auto base = m.forward(base_in);
  std::mt19937_64 gen(10);
  std::uniform_int_distribution<int> ur(0, rows - 1), uc(0, cols - 1);
  int tried = 0;
  while (tried < 40) {
    const int pr = ur(gen), pc = uc(gen);
    if (box.contains(pr, pc)) continue;
    ++tried;
    auto x = base_in;
    x.at(0, pr, pc) += 3.0;
    EXPECT_EQ(m.forward(x).at(0, r, c), base.at(0, r, c));
  }
}
