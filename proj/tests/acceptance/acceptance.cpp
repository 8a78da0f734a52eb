// Copyright 2026 The TEL Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "tel/annotations.hpp"
#include "tel/toy_train.hpp"
#include "tel/tree_filter.hpp"
#include "tel/verify.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(bool ok, const char* name, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void oracle_equivalence() {
  tel::VerifyOptions opt;
  opt.trials = 100;
  opt.max_size = 64;
  const auto t0 = Clock::now();
  tel::CheckReport r = tel::verify_filter_oracle(opt);
  const double secs = seconds_since(t0);
  report(r.passed && secs < 60.0, "oracle equivalence",
         fmt("max relative error %.3e", r.max_error) + fmt(" (tol 1e-5), %.1f s", secs) +
             " (limit 60 s) over 100 grids up to 64x64");
}

void mst_correctness() {
  tel::VerifyOptions opt;
  opt.trials = 100;
  opt.max_size = 64;
  tel::CheckReport r = tel::verify_mst(opt);
  report(r.passed, "MST correctness",
         fmt("max |Boruvka - Kruskal| total weight %.3e", r.max_error) +
             " over 100 grids, half with tied weights; edge sets compared");
}

void gradient_correctness() {
  tel::VerifyOptions opt;
  opt.trials = 100;
  opt.max_size = 5;
  tel::CheckReport f = tel::verify_filter_gradients(opt);
  tel::CheckReport c = tel::verify_composite_gradient(opt);
  report(f.passed && c.passed, "gradient correctness",
         fmt("filter grad_P/grad_t max rel error %.3e", f.max_error) +
             fmt(", composite loss %.3e", c.max_error) + " (tol 1e-4, h 1e-4, 100 5x5 instances, " +
             std::to_string(c.skipped) + " kink coordinates skipped)");
}

void conservation() {
  double simplex = 0.0, fixed = 0.0, bound = 0.0, root = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> dim(1, 24);
    std::uniform_real_distribution<double> u(0.0, 1.0), sig(0.005, 1.0);
    const std::size_t h = dim(rng), w = dim(rng), c = 4;
    const double sigma = sig(rng);
    tel::DenseTensor<double> guide(3, h, w), p(c, h, w), flat(c, h, w);
    for (double& v : guide.data()) v = u(rng);
    for (double& v : p.data()) v = u(rng);
    for (std::size_t i = 0; i < p.pixels(); ++i) {
      double z = 0.0;
      for (std::size_t k = 0; k < c; ++k) z += p.at(k, i);
      for (std::size_t k = 0; k < c; ++k) p.at(k, i) /= z;
    }
    for (std::size_t k = 0; k < c; ++k)
      for (double& v : flat.channel(k)) v = 0.1 * static_cast<double>(k + 1);

    tel::AffinityTree a = tel::build_affinity_tree(guide, sigma);
    auto out = tel::tree_filter(p, a);
    for (std::size_t i = 0; i < p.pixels(); ++i) {
      double z = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        z += out.at(k, i);
        simplex = std::max(simplex, -out.at(k, i));
      }
      simplex = std::max(simplex, std::abs(z - 1.0));
    }
    auto same = tel::tree_filter(flat, a);
    for (std::size_t k = 0; k < flat.size(); ++k) {
      fixed = std::max(fixed, std::abs(same.data()[k] - flat.data()[k]));
    }
    for (std::size_t k = 0; k < c; ++k) {
      auto [lo, hi] = std::minmax_element(p.channel(k).begin(), p.channel(k).end());
      for (double v : out.channel(k)) {
        bound = std::max({bound, *lo - v, v - *hi});
      }
    }
    const auto other_root = static_cast<std::uint32_t>(seed * 7919 % p.pixels());
    auto rerooted = tel::tree_filter(p, tel::build_affinity_tree(guide, sigma, other_root));
    for (std::size_t k = 0; k < p.size(); ++k) {
      root = std::max(root, std::abs(rerooted.data()[k] - out.data()[k]));
    }
  }
  const bool ok = simplex <= 1e-6 && fixed <= 1e-6 && bound <= 1e-6 && root < 1e-6;
  report(ok, "conservation properties",
         fmt("simplex deviation %.2e", simplex) + fmt(", constant drift %.2e", fixed) +
             fmt(", bound excess %.2e", bound) + fmt(", root change %.2e", root) +
             " over 50 random grids");
}

struct FixtureRun {
  std::vector<tel::StepRecord> records;
  double seconds = 0.0;
};

FixtureRun run_fixture(double lambda) {
  tel::Fixture fx = tel::two_region_fixture(0);
  tel::TrainConfig config;
  config.steps = 500;
  config.seed = 0;
  config.loss.lambda = lambda;
  config.loss.sigma_low = 0.02;
  config.threads = 1;
  const auto t0 = Clock::now();
  tel::Trainer trainer(fx.image, fx.sparse, fx.truth, config);
  FixtureRun run;
  run.records = trainer.run();
  run.seconds = seconds_since(t0);
  return run;
}

void self_training(const FixtureRun& tel_run, const FixtureRun& baseline) {
  const double acc = tel_run.records.back().pixel_accuracy;
  const double base = baseline.records.back().pixel_accuracy;
  const bool ok = acc >= 0.95 && base <= 0.7 && tel_run.seconds < 120.0;
  report(ok, "self-training efficacy",
         fmt("lambda=0.4 final pixel accuracy %.4f (need >= 0.95)", acc) +
             fmt(", lambda=0 baseline %.4f (need <= 0.7)", base) +
             fmt(", %.1f s", tel_run.seconds) + " (limit 120 s)");
}

void pseudo_label_trend(const FixtureRun& tel_run) {
  const tel::StepRecord* at10 = nullptr;
  for (const auto& r : tel_run.records) {
    if (r.step == 10) at10 = &r;
  }
  if (!at10) {
    report(false, "pseudo-label quality trend", "no record at step 10");
    return;
  }
  report(at10->pseudo_label_accuracy >= at10->prediction_accuracy, "pseudo-label quality trend",
         fmt("step 10 on unlabeled pixels: argmax(pseudo label) %.4f", at10->pseudo_label_accuracy) +
             fmt(" vs argmax(P) %.4f", at10->prediction_accuracy));
}

// City-block distance to the nearest location with another value or outside
// the image, by exhaustive search.
std::vector<long> brute_distance(const tel::LabelMap& m) {
  const long h = static_cast<long>(m.height()), w = static_cast<long>(m.width());
  std::vector<long> d(m.pixels(), 0);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y * w + x);
      if (!m.is_labeled(i)) continue;
      long best = std::min({y + 1, x + 1, h - y, w - x});
      for (long v = 0; v < h; ++v)
        for (long u = 0; u < w; ++u)
          if (m.at(static_cast<std::size_t>(v * w + u)) != m.at(i))
            best = std::min(best, std::abs(v - y) + std::abs(u - x));
      d[i] = best;
    }
  }
  return d;
}

void block_synthesis() {
  double worst_ratio = 0.0;
  bool nested = true, maximal = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t h = 48, w = 64;
    std::vector<std::uint8_t> v(h * w, 0);
    std::uniform_int_distribution<std::size_t> ry(0, h - 1), rx(0, w - 1);
    std::uniform_int_distribution<int> cls(0, 5);
    for (int r = 0; r < 8; ++r) {
      std::size_t y0 = ry(rng), y1 = ry(rng), x0 = rx(rng), x1 = rx(rng);
      if (y0 > y1) std::swap(y0, y1);
      if (x0 > x1) std::swap(x0, x1);
      const int c = cls(rng);
      for (std::size_t y = y0; y <= y1; ++y)
        for (std::size_t x = x0; x <= x1; ++x)
          v[y * w + x] = c == 5 ? tel::kIgnoreLabel : static_cast<std::uint8_t>(c);
    }
    tel::LabelMap full(h, w, 5, v);
    const auto dist = brute_distance(full);
    const auto components = tel::connected_components(full);
    const double total = static_cast<double>(full.labeled_count());
    tel::LabelMap previous = full;
    for (double ratio : {0.5, 0.2, 0.1}) {
      tel::LabelMap out = tel::synth_block_annotation(full, ratio);
      worst_ratio = std::max(worst_ratio,
                             std::abs(static_cast<double>(out.labeled_count()) / total - ratio));
      for (std::size_t i = 0; i < out.pixels(); ++i) {
        if (out.is_labeled(i) && (!previous.is_labeled(i) || out.at(i) != full.at(i))) {
          nested = false;
        }
      }
      for (const auto& comp : components) {
        long kept_min = 1L << 30, dropped_max = 0;
        for (std::uint32_t i : comp) {
          if (out.is_labeled(i)) kept_min = std::min(kept_min, dist[i]);
          else dropped_max = std::max(dropped_max, dist[i]);
        }
        if (kept_min < dropped_max) maximal = false;
      }
      previous = out;
    }
  }
  report(worst_ratio <= 0.01 && nested && maximal, "block synthesis",
         fmt("worst |achieved - target| %.5f (tol 0.01)", worst_ratio) +
             (nested ? ", nested" : ", NOT nested") +
             (maximal ? ", distance-maximal per region" : ", NOT distance-maximal") +
             " for ratios 0.1/0.2/0.5 on 10 maps");
}

void performance() {
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random = [&](std::size_t c, std::size_t s) {
    tel::DenseTensor<double> t(c, s, s);
    for (double& v : t.data()) v = u(rng);
    return t;
  };

  tel::AffinityTree big = tel::build_affinity_tree(random(3, 512), 0.02);
  auto p = random(21, 512), g = random(21, 512);
  const auto t0 = Clock::now();
  auto fwd = tel::tree_filter_forward(p, big.tree, big.transmittance, 1);
  auto bwd = tel::tree_filter_backward(g, fwd.workspace, big.tree, big.transmittance, p, 1);
  const double fb = seconds_since(t0);
  (void)bwd;

  // Least-squares slope of log(forward time) against log(pixels).
  std::vector<double> lx, ly;
  for (std::size_t s : {64, 128, 256, 512}) {
    tel::AffinityTree a = tel::build_affinity_tree(random(3, s), 0.02);
    auto in = random(21, s);
    double best = 1e300;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t = Clock::now();
      auto out = tel::tree_filter_forward(in, a.tree, a.transmittance, 1);
      best = std::min(best, seconds_since(t));
    }
    lx.push_back(std::log(static_cast<double>(s * s)));
    ly.push_back(std::log(best));
  }
  const double mx = (lx[0] + lx[1] + lx[2] + lx[3]) / 4, my = (ly[0] + ly[1] + ly[2] + ly[3]) / 4;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  const double slope = sxy / sxx;
  report(fb < 2.0 && slope >= 0.9 && slope <= 1.3, "performance",
         fmt("512x512x21 forward+backward %.3f s", fb) + " (limit 2 s)" +
             fmt(", forward scaling exponent %.3f", slope) + " (need 0.9 to 1.3)");
}

}  // namespace

int main() {
  oracle_equivalence();
  mst_correctness();
  gradient_correctness();
  conservation();
  const FixtureRun with_tree = run_fixture(0.4);
  const FixtureRun baseline = run_fixture(0.0);
  self_training(with_tree, baseline);
  pseudo_label_trend(with_tree);
  block_synthesis();
  performance();
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
