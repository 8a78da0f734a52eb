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

// tel: command-line front end for the tree energy loss library.
//
// Exit codes: 0 success, 1 invalid input or arguments, 2 verification failure.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tel/annotations.hpp"
#include "tel/dense_oracle.hpp"
#include "tel/io.hpp"
#include "tel/losses.hpp"
#include "tel/mst.hpp"
#include "tel/toy_train.hpp"
#include "tel/tree_filter.hpp"
#include "tel/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitVerifyFailed = 2;

struct Globals {
  std::uint64_t seed = 0;
  int threads = 1;
};

bool is_tensor_path(const std::string& path) {
  return std::filesystem::path(path).extension() == ".telt";
}

tel::DenseTensor<double> load_any(const std::string& path) {
  if (is_tensor_path(path)) return tel::load_tensor(path).cast<double>();
  return tel::load_image(path).cast<double>();
}

void save_any(const tel::DenseTensor<double>& t, const std::string& path) {
  if (is_tensor_path(path)) {
    tel::save_tensor(t.cast<float>(), path);
  } else {
    tel::save_image(t, path);
  }
}

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// ---------------------------------------------------------------- filter

struct FilterArgs {
  std::string input, guide, output, dump_distance;
  double sigma = 0.02;
};

int run_filter(const FilterArgs& a, const Globals& g) {
  tel::DenseTensor<double> input = load_any(a.input);
  tel::DenseTensor<double> guide = a.guide.empty() ? input : load_any(a.guide);
  if (guide.height() != input.height() || guide.width() != input.width()) {
    throw tel::ArgumentError("guide is " + std::to_string(guide.height()) + "x" +
                             std::to_string(guide.width()) + ", input is " +
                             std::to_string(input.height()) + "x" +
                             std::to_string(input.width()));
  }
  if (!a.dump_distance.empty() && input.pixels() > tel::kDenseOracleMaxNodes) {
    throw tel::CapacityError("--dump-distance needs a grid of at most 64x64 pixels");
  }
  tel::AffinityTree affinity = tel::build_affinity_tree(guide, a.sigma);
  save_any(tel::tree_filter(input, affinity, g.threads), a.output);
  if (!a.dump_distance.empty()) {
    tel::DenseMatrix d = tel::dense_distance(affinity.tree);
    tel::DenseTensor<float> out(1, d.n, d.n);
    for (std::size_t k = 0; k < d.values.size(); ++k) {
      out.data()[k] = static_cast<float>(d.values[k]);
    }
    tel::save_tensor(out, a.dump_distance);
  }
  std::cout << "filtered " << input.channels() << "x" << input.height() << "x"
            << input.width() << " with sigma " << a.sigma << " -> " << a.output << "\n";
  return kExitOk;
}

// ---------------------------------------------------------- synth-blocks

struct SynthArgs {
  std::string labels, output;
  double ratio = 0.1;
  int num_classes = 21;
};

int run_synth_blocks(const SynthArgs& a) {
  tel::LabelMap full = tel::load_label_map(a.labels, a.num_classes);
  tel::LabelMap out = tel::synth_block_annotation(full, a.ratio);
  tel::save_label_map(out, a.output);
  const std::size_t total = full.labeled_count();
  const double achieved =
      total ? static_cast<double>(out.labeled_count()) / static_cast<double>(total) : 0.0;
  std::cout << "achieved ratio " << std::fixed << std::setprecision(4) << achieved
            << " (" << out.labeled_count() << " of " << total
            << " labeled pixels kept)\n";
  return kExitOk;
}

// ------------------------------------------------------------ demo-train

struct TrainArgs {
  std::string fixture = "two-region";
  std::string labels, truth;
  std::string metrics, output = "prediction.png";
  double lambda = 0.4;
  double sigma = 0.02;
  int steps = 500;
  double lr = 0.5;
  double momentum = 0.0;
  int eval_interval = 10;
  int num_classes = 2;
  std::optional<double> naive_threshold;
  std::string delta = "L1";
  std::string aggregation = "LH_C";
  bool detach = false;
};

int run_demo_train(const TrainArgs& a, const Globals& g) {
  tel::TrainConfig config;
  config.steps = a.steps;
  config.learning_rate = a.lr;
  config.momentum = a.momentum;
  config.seed = g.seed;
  config.eval_interval = a.eval_interval;
  config.threads = g.threads;
  config.loss.lambda = a.lambda;
  config.loss.sigma_low = a.sigma;
  config.loss.naive_threshold = a.naive_threshold;
  config.loss.delta = tel::parse_delta(a.delta);
  config.loss.aggregation = tel::parse_aggregation(a.aggregation);
  config.loss.detach_pseudo_label = a.detach;
  config.validate();

  tel::DenseTensor<double> image;
  tel::LabelMap sparse;
  std::optional<tel::LabelMap> truth;
  if (a.fixture == "two-region" || a.fixture == "checkerboard") {
    tel::Fixture fx = a.fixture == "two-region" ? tel::two_region_fixture(g.seed)
                                                : tel::checkerboard_fixture(g.seed);
    image = std::move(fx.image);
    sparse = std::move(fx.sparse);
    truth = std::move(fx.truth);
    config.shape.num_classes = 2;
  } else {
    if (a.labels.empty()) {
      throw tel::ArgumentError("an image fixture needs --labels <sparse label png>");
    }
    config.shape.num_classes = static_cast<std::size_t>(a.num_classes);
    image = tel::load_image(a.fixture).cast<double>();
    sparse = tel::load_label_map(a.labels, a.num_classes);
    if (!a.truth.empty()) truth = tel::load_label_map(a.truth, a.num_classes);
  }

  std::ofstream csv;
  if (!a.metrics.empty()) {
    csv.open(a.metrics);
    if (!csv) throw tel::FormatError("cannot open '" + a.metrics + "' for writing");
    csv.imbue(std::locale::classic());
    csv << "step,L_seg,L_tree,pixel_acc,mIoU,pseudo_label_acc,prediction_acc\n";
    csv << std::setprecision(9);
  }
  tel::Trainer trainer(std::move(image), std::move(sparse), truth, config);
  tel::StepRecord last;
  trainer.run([&](const tel::StepRecord& r) {
    last = r;
    if (csv.is_open()) {
      csv << r.step << ',' << r.seg << ',' << r.tree << ',' << r.pixel_accuracy << ','
          << r.mean_iou << ',' << r.pseudo_label_accuracy << ',' << r.prediction_accuracy
          << '\n';
    }
  });

  tel::DenseTensor<double> p = trainer.predict();
  tel::LabelMap prediction(p.height(), p.width(), static_cast<int>(p.channels()));
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    prediction.set(i, static_cast<std::uint8_t>(tel::argmax_at(p, i)));
  }
  tel::save_label_map(prediction, a.output);

  std::cout << std::fixed << std::setprecision(4) << "step " << last.step
            << " loss " << last.total << " (seg " << last.seg << ", tree " << last.tree
            << ")";
  if (truth) {
    std::cout << " pixel_acc " << last.pixel_accuracy << " mIoU " << last.mean_iou;
  }
  std::cout << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  std::size_t max_size = 64;
  int trials = 100;
  bool sign_flip = false;
};

int run_verify(const VerifyArgs& a, const Globals& g) {
  tel::VerifyOptions opt;
  opt.max_size = a.max_size;
  opt.trials = a.trials;
  opt.seed = g.seed;
  opt.threads = g.threads;
  opt.inject_sign_flip = a.sign_flip;
  bool ok = true;
  for (const tel::CheckReport& r : tel::run_verification(opt)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": max relative error "
              << std::scientific << std::setprecision(3) << r.max_error << " (tolerance "
              << r.tolerance << ", " << r.trials << " trials";
    if (r.skipped) std::cout << ", " << r.skipped << " kink coordinates skipped";
    std::cout << ")";
    if (r.failing_seed) std::cout << " first failing seed " << *r.failing_seed;
    std::cout << "\n";
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitVerifyFailed;
}

// ----------------------------------------------------------------- bench

struct BenchArgs {
  std::vector<std::size_t> sizes{64, 128, 256, 512};
  std::string output;
  std::size_t channels = 21;
};

int run_bench(const BenchArgs& a, const Globals& g) {
  std::ostringstream rows;
  rows.imbue(std::locale::classic());
  rows << "size,ms_mst,ms_fwd,ms_bwd,ms_dense_or_NA\n" << std::fixed << std::setprecision(3);
  for (std::size_t size : a.sizes) {
    std::mt19937_64 rng(g.seed + size);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    tel::DenseTensor<double> guide(3, size, size), input(a.channels, size, size),
        grad(a.channels, size, size);
    for (double& v : guide.data()) v = u(rng);
    for (double& v : input.data()) v = u(rng);
    for (double& v : grad.data()) v = u(rng);

    auto t0 = Clock::now();
    tel::AffinityTree affinity = tel::build_affinity_tree(guide, 0.02);
    const double ms_mst = ms_since(t0);
    t0 = Clock::now();
    auto fwd = tel::tree_filter_forward(input, affinity.tree, affinity.transmittance, g.threads);
    const double ms_fwd = ms_since(t0);
    t0 = Clock::now();
    auto bwd = tel::tree_filter_backward(grad, fwd.workspace, affinity.tree,
                                         affinity.transmittance, input, g.threads);
    const double ms_bwd = ms_since(t0);
    (void)bwd;
    rows << size << ',' << ms_mst << ',' << ms_fwd << ',' << ms_bwd << ',';
    if (size * size <= tel::kDenseOracleMaxNodes) {
      t0 = Clock::now();
      auto dense = tel::dense_filter(input, tel::dense_distance(affinity.tree), 0.02);
      rows << ms_since(t0) << '\n';
    } else {
      rows << "NA\n";
    }
  }
  std::cout << rows.str();
  if (!a.output.empty()) {
    std::ofstream out(a.output);
    if (!out) throw tel::FormatError("cannot open '" + a.output + "' for writing");
    out << rows.str();
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree energy loss toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  FilterArgs fa;
  auto* filter = app.add_subcommand("filter", "Edge-preserving tree filtering of an image or tensor");
  filter->add_option("--input", fa.input, "PNG or TELT input")->required()->check(CLI::ExistingFile);
  filter->add_option("--sigma", fa.sigma, "Affinity scale")->required()->check(CLI::PositiveNumber);
  filter->add_option("--guide", fa.guide, "PNG or TELT guide (default: the input)")
      ->check(CLI::ExistingFile);
  filter->add_option("--output", fa.output, "PNG or TELT output")->required();
  filter->add_option("--dump-distance", fa.dump_distance,
                     "Write the dense tree distance matrix as TELT (grids up to 64x64)");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth-blocks", "Block-wise sparse labels by boundary peeling");
  synth->add_option("--labels", sa.labels, "Dense label PNG")->required()->check(CLI::ExistingFile);
  synth->add_option("--ratio", sa.ratio, "Fraction of labeled pixels to keep")
      ->required()
      ->check(CLI::Range(0.0, 1.0))
      ->check(CLI::Validator(
          [](std::string& s) { return std::stod(s) > 0.0 ? "" : "ratio must be > 0"; }, "", ""));
  synth->add_option("--num-classes", sa.num_classes, "Number of classes")
      ->required()
      ->check(CLI::Range(1, 255));
  synth->add_option("--output", sa.output, "Sparse label PNG")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("demo-train", "Train the toy model with the tree energy loss");
  train->add_option("--fixture", ta.fixture, "two-region, checkerboard, or an image PNG")
      ->capture_default_str();
  train->add_option("--labels", ta.labels, "Sparse label PNG (image fixture)")
      ->check(CLI::ExistingFile);
  train->add_option("--truth", ta.truth, "Dense ground-truth PNG for metrics (image fixture)")
      ->check(CLI::ExistingFile);
  train->add_option("--num-classes", ta.num_classes, "Classes (image fixture)")
      ->check(CLI::Range(1, 255))
      ->capture_default_str();
  train->add_option("--lambda", ta.lambda, "Weight of the tree energy term")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  train->add_option("--sigma", ta.sigma, "Low-level affinity scale")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--steps", ta.steps, "Gradient steps")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--lr", ta.lr, "Learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--momentum", ta.momentum, "Momentum in [0, 1)")
      ->check(CLI::Range(0.0, 0.999999))
      ->capture_default_str();
  train->add_option("--eval-interval", ta.eval_interval, "Steps between metric rows")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--naive-threshold", ta.naive_threshold,
                    "Replace the soft assignment with hard labels above this confidence");
  train->add_option("--delta", ta.delta, "L1, L2, cross_entropy or dot_product")
      ->capture_default_str();
  train->add_option("--aggregation", ta.aggregation, "LH_C, HL_C or LH_P")->capture_default_str();
  train->add_flag("--detach", ta.detach, "Treat the pseudo label as a constant");
  train->add_option("--metrics", ta.metrics, "CSV metrics output");
  train->add_option("--output", ta.output, "Final prediction label PNG")->capture_default_str();

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Randomized oracle checks");
  verify->add_option("--max-size", va.max_size, "Largest grid side")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  verify->add_option("--trials", va.trials, "Trials per check")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  verify->add_flag("--inject-sign-flip", va.sign_flip,
                   "Negate analytic gradients to confirm the checks can fail");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Time MST, forward and backward per grid size");
  bench->add_option("--sizes", ba.sizes, "Comma-separated grid sides")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  bench->add_option("--channels", ba.channels, "Channels filtered")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench->add_option("--output", ba.output, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*filter) return run_filter(fa, g);
    if (*synth) return run_synth_blocks(sa);
    if (*train) return run_demo_train(ta, g);
    if (*verify) return run_verify(va, g);
    if (*bench) return run_bench(ba, g);
  } catch (const tel::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
