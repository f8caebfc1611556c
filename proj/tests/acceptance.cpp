// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
//
// Usage: acceptance [--only N[,N...]] [--work DIR] [--report FILE]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck_ops.hpp"
#include "test_util.hpp"
#include "xview/baselines.hpp"
#include "xview/datapipe.hpp"
#include "xview/flowmatch.hpp"
#include "xview/metrics.hpp"
#include "xview/service.hpp"
#include "xview/signal.hpp"

#ifndef XVIEW_CLI
#error "XVIEW_CLI must name the command-line binary"
#endif

using namespace xview;
using xview::testing::GradCheck;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Desk-scale dataset shared by criteria 1-4 and 8.
GenerateConfig desk_data_config() {
  GenerateConfig cfg;
  cfg.n_scenes = 300;
  cfg.paths_per_scene = 10;
  cfg.frames = 24;
  cfg.grid = 8;
  cfg.order = 20;
  cfg.eval_fraction = 0.05;
  cfg.seed = 3;
  return cfg;
}

// Model and schedule for the desk training run.
DitConfig desk_model_config(const SampleRecord& r) {
  DitConfig c;
  c.layers = 2;
  c.model_dim = 32;
  c.heads = 2;
  c.frames = r.frames;
  c.grid = r.grid;
  c.dct_order = r.order;
  c.context_res = r.context_res;
  c.direction = Direction::kFirstToVideo;
  c.residual_target = true;
  c.init_seed = 0;
  return c;
}

TrainConfig desk_train_config() {
  TrainConfig tc;
  tc.steps = 8000;
  tc.batch_size = 8;
  tc.lr = 1e-3;
  tc.warmup_steps = 200;
  tc.eval_every = 8000;
  tc.eval_samples = 16;
  tc.seed = 0;
  return tc;
}

class Desk {
 public:
  explicit Desk(const std::filesystem::path& work) : dir_(work / "desk") {}

  const Dataset& data() {
    if (!loaded_) {
      const auto t0 = Clock::now();
      generate(desk_data_config(), dir_);
      data_ = load_dataset(dir_);
      data_seconds_ = seconds_since(t0);
      loaded_ = true;
    }
    return data_;
  }
  double data_seconds() const { return data_seconds_; }

  const Dit<float>& model() {
    if (!model_) {
      const Dataset& ds = data();
      std::vector<FlowExample> train_set;
      for (const SampleRecord& r : ds.train) train_set.push_back(to_flow_example(r, Direction::kFirstToVideo));
      const auto t0 = Clock::now();
      TrainResult res = xview::train(Dit<float>(desk_model_config(ds.train.front())), train_set,
                                     desk_train_config());
      train_seconds_ = seconds_since(t0);
      final_loss_ = res.curve.back().loss;
      model_ = std::make_unique<Dit<float>>(std::move(res.checkpoint.model));
    }
    return *model_;
  }
  double train_seconds() const { return train_seconds_; }
  double final_loss() const { return final_loss_; }

 private:
  std::filesystem::path dir_;
  Dataset data_;
  bool loaded_ = false;
  double data_seconds_ = 0.0;
  std::unique_ptr<Dit<float>> model_;
  double train_seconds_ = 0.0;
  double final_loss_ = 0.0;
};

const EvalReport& report(const std::vector<MethodReports>& all, const std::string& method) {
  for (const MethodReports& m : all) {
    if (m.method == method) return m.reports.at(Direction::kFirstToVideo);
  }
  throw std::runtime_error("missing report for " + method);
}

EvalOptions f2v_options(std::vector<std::string> methods) {
  EvalOptions opts;
  opts.methods = std::move(methods);
  opts.directions = {Direction::kFirstToVideo};
  return opts;
}

Outcome criterion1(Desk& desk) {
  const Dataset& ds = desk.data();
  if (ds.eval.size() < 100) return {false, "only " + std::to_string(ds.eval.size()) + " eval pairs"};
  const std::vector<SampleRecord> pairs(ds.eval.begin(), ds.eval.begin() + 100);
  const auto t0 = Clock::now();
  double acc = 0.0;
  for (const SampleRecord& r : pairs) {
    const BoxSequence pred = predict(r, Direction::kFirstToVideo, "warp_corners", nullptr, {});
    acc += mean_iou(pred, r.b_tgt);
  }
  const double secs = seconds_since(t0);
  const double m = acc / pairs.size();
  return {m >= 0.95 && secs < 10.0, "mean IoU " + fmt("%.4f", m) + " over 100 pairs in " + fmt("%.2f", secs) + " s"};
}

Outcome criterion2(Desk& desk) {
  const Dataset& ds = desk.data();
  const Dit<float>& model = desk.model();
  const auto t0 = Clock::now();
  const auto res = evaluate(ds.eval, {{Direction::kFirstToVideo, &model}}, f2v_options({"model", "interpolation"}));
  const double eval_secs = seconds_since(t0);
  const EvalReport& m = report(res, "model");
  const EvalReport& in = report(res, "interpolation");
  const double total = desk.data_seconds() + desk.train_seconds() + eval_secs;
  const TrainConfig tc = desk_train_config();
  const bool pass = ds.train.size() >= 2000 && tc.steps <= 8000 && total <= 3600.0 &&
                    m.mean_iou >= in.mean_iou + 0.05 && m.map50 >= in.map50 + 0.05;
  return {pass, "IoU_f2v " + fmt("%.4f", m.mean_iou) + " vs " + fmt("%.4f", in.mean_iou) + ", mAP " +
                    fmt("%.4f", m.map50) + " vs " + fmt("%.4f", in.map50) + "; " +
                    std::to_string(ds.train.size()) + " train samples, " + std::to_string(tc.steps) +
                    " steps, final loss " + fmt("%.4f", desk.final_loss()) + ", " + fmt("%.0f", total) + " s"};
}

Outcome criterion3(Desk& desk) {
  const Dataset& ds = desk.data();
  const auto res = evaluate(ds.eval, {}, f2v_options({"warp_corners", "noisy-low", "noisy-high"}));
  const double clean = report(res, "warp_corners").map50;
  const double low = report(res, "noisy-low").map50;
  const double high = report(res, "noisy-high").map50;
  const bool pass = low - high >= 0.02 && clean - low >= 0.02;
  return {pass, "mAP noisy-high " + fmt("%.4f", high) + " < noisy-low " + fmt("%.4f", low) + " < clean " +
                    fmt("%.4f", clean)};
}

Outcome criterion4(Desk& desk) {
  const Dataset& ds = desk.data();
  const Dit<float>& model = desk.model();
  EvalOptions opts = f2v_options({"model"});
  opts.moving_only = true;
  const auto with = evaluate(ds.eval, {{Direction::kFirstToVideo, &model}}, opts);
  opts.drop = {Stream::kTrajectories};
  const auto without = evaluate(ds.eval, {{Direction::kFirstToVideo, &model}}, opts);
  const double full = report(with, "model").mean_iou;
  const EvalReport& dropped_rep = report(without, "model");
  const double dropped = dropped_rep.mean_iou;
  return {full - dropped >= 0.05, "moving-camera IoU " + fmt("%.4f", full) + " -> " + fmt("%.4f", dropped) +
                                      " without trajectories over " + std::to_string(dropped_rep.count()) +
                                      " samples"};
}

Outcome criterion5() {
  constexpr int kSeeds = 10;
  double op64 = 0.0, op32 = 0.0;
  std::set<std::string> ops;
  testing::check_all_ops<double>(kSeeds, [&](const char* name, int, const GradCheck& r) {
    op64 = std::max(op64, r.max_rel_error);
    ops.insert(name);
  });
  testing::check_all_ops<float>(kSeeds, [&](const char*, int, const GradCheck& r) {
    op32 = std::max(op32, r.max_rel_error);
  });
  double dit64 = 0.0, dit32 = 0.0;
  for (int s = 0; s < kSeeds; ++s) {
    dit64 = std::max(dit64, testing::check_dit_gradients<double>(s).max_rel_error);
    dit32 = std::max(dit32, testing::check_dit_gradients<float>(s).max_rel_error);
  }
  const bool pass = op64 < 1e-6 && dit64 < 1e-6 && op32 < 1e-4 && dit32 < 1e-4;
  return {pass, std::to_string(ops.size()) + " op cases + tiny DiT, " + std::to_string(kSeeds) +
                    " seeds; max rel err 64-bit " + fmt("%.2e", std::max(op64, dit64)) + ", 32-bit " +
                    fmt("%.2e", std::max(op32, dit32))};
}

Outcome criterion6() {
  double roundtrip = 0.0, parseval = 0.0, ortho = 0.0;
  for (int T = 1; T <= 128; ++T) {
    const auto x = testing::random_vector(T, 500 + T);
    const auto c = dct_encode(x, T);
    const auto back = dct_decode(c, T);
    for (int i = 0; i < T; ++i) roundtrip = std::max(roundtrip, std::abs(back[i] - x[i]));

    // Truncated reconstruction error equals the energy of the dropped
    // coefficients.
    for (int K = 1; K <= T; K += std::max(1, T / 7)) {
      const auto trunc = dct_decode(std::span<const double>(c.data(), K), T);
      double err = 0.0, dropped = 0.0;
      for (int i = 0; i < T; ++i) err += (trunc[i] - x[i]) * (trunc[i] - x[i]);
      for (int k = K; k < T; ++k) dropped += c[k] * c[k];
      parseval = std::max(parseval, std::abs(err - dropped));
    }

    // Basis vectors from unit coefficient vectors; their Gram matrix is I.
    if (T <= 64 || T == 128) {
      std::vector<std::vector<double>> basis;
      for (int k = 0; k < T; ++k) {
        std::vector<double> e(T, 0.0);
        e[k] = 1.0;
        basis.push_back(dct_decode(e, T));
      }
      for (int a = 0; a < T; ++a) {
        for (int b = a; b < T; ++b) {
          double dot = 0.0;
          for (int i = 0; i < T; ++i) dot += basis[a][i] * basis[b][i];
          ortho = std::max(ortho, std::abs(dot - (a == b ? 1.0 : 0.0)));
        }
      }
    }
  }
  const bool pass = roundtrip < 1e-9 && parseval < 1e-9 && ortho < 1e-9;
  return {pass, "T=1..128: roundtrip " + fmt("%.1e", roundtrip) + ", Parseval " + fmt("%.1e", parseval) +
                    ", orthonormality " + fmt("%.1e", ortho)};
}

Outcome criterion7() {
  // Constant field x1 - x0 carries the start point to x1 in one Euler step.
  const std::vector<double> x1 = testing::random_vector(16, 71, 0.0, 1.0);
  SampleConfig one;
  one.num_steps = 1;
  one.seed = 5;
  const auto x0 = initial_noise(x1.size(), one.seed);
  const VelocityFn oracle = [&](std::span<const double>, double, const Conditions&) {
    return target_velocity(x0, x1);
  };
  const auto out = integrate(oracle, {}, x1.size(), one);
  double euler = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) euler = std::max(euler, std::abs(out[i] - x1[i]));

  const DitConfig cfg = testing::tiny_dit_config(2);
  FlowExample ex;
  ex.id = "memorize";
  ex.cond = testing::random_conditions(cfg, 3);
  ex.target = testing::random_vector(static_cast<std::size_t>(cfg.frames) * 4, 4, 0.1, 0.9);
  TrainConfig tc;
  tc.steps = 2000;
  tc.batch_size = 16;
  tc.lr = 3e-3;
  tc.warmup_steps = 100;
  tc.drop_trajectories = 0.0;
  tc.drop_context = 0.0;
  tc.eval_every = 2000;
  tc.eval_samples = 1;
  tc.seed = 6;
  const std::vector<FlowExample> one_sample{ex};
  const TrainResult res = xview::train(Dit<float>(cfg), one_sample, tc);
  const double loss = res.curve.back().loss;

  double l1 = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    SampleConfig sc;
    sc.seed = seed;
    const auto boxes = boxes_to_tokens(sample(res.checkpoint.model, ex.cond, sc));
    for (std::size_t i = 0; i < boxes.size(); ++i, ++n) l1 += std::abs(boxes[i] - ex.target[i]);
  }
  l1 /= static_cast<double>(n);
  const bool pass = loss < 0.05 && l1 < 0.05 && euler < 1e-9;
  return {pass, "final loss " + fmt("%.4f", loss) + ", 28-step L1 " + fmt("%.4f", l1) +
                    ", one-step Euler error " + fmt("%.1e", euler)};
}

Outcome criterion8(Desk& desk) {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) failures.push_back(what);
  };
  const Box2D a = Box2D::from_corners(0, 0, 2, 2);
  const Box2D b = Box2D::from_corners(1, 0, 3, 2);
  expect(iou(a, a) == 1.0, "iou identical");
  expect(iou(a, Box2D::from_corners(4, 4, 5, 5)) == 0.0, "iou disjoint");
  expect(std::abs(iou(a, b) - 1.0 / 3.0) < 1e-12, "iou corner case");

  const BoxSequence gt(4, Box2D{0.5, 0.5, 0.2, 0.2});
  BoxSequence alt = gt;
  alt[0] = Box2D{0.9, 0.9, 0.05, 0.05};
  alt[2] = Box2D{0.1, 0.1, 0.05, 0.05};
  expect(map50(gt, gt) == 1.0, "map50 identical");
  expect(map50(alt, gt) == 0.5, "map50 half");
  expect(map50(BoxSequence(4, Box2D{5, 5, 0.1, 0.1}), gt) == 0.0, "map50 disjoint");
  BoxSequence pred = alt;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const double before = map50(pred, gt);
    pred[t] = gt[t];
    expect(map50(pred, gt) >= before, "map50 monotone");
  }

  expect(tube_iou(gt, gt) == 1.0, "tube identical");
  expect(std::abs(tube_iou(BoxSequence{a, a, a}, BoxSequence{b, b, b}) - 1.0 / 3.0) < 1e-12, "tube 1/3");
  const Box2D c = Box2D::from_corners(0, 0, 1, 2);
  const Box2D d = Box2D::from_corners(5, 0, 6, 2);
  expect(std::abs(tube_iou(BoxSequence{a, c}, BoxSequence{a, d}) - 0.5) < 1e-12, "tube half");
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.2, 0.8), s(0.05, 0.3);
  for (int trial = 0; trial < 200; ++trial) {
    BoxSequence p, g;
    for (int t = 0; t < 6; ++t) {
      p.push_back({u(rng), u(rng), s(rng), s(rng)});
      g.push_back({u(rng), u(rng), s(rng), s(rng)});
    }
    const auto per = per_frame_iou(p, g);
    const double tube = tube_iou(p, g);
    const double lo = *std::min_element(per.begin(), per.end());
    const double hi = *std::max_element(per.begin(), per.end());
    expect(tube >= lo - 1e-15 && tube <= hi + 1e-15, "tube bound");
  }

  int statics = 0;
  for (const SampleRecord& r : desk.data().eval) {
    if (r.camera_moves()) continue;
    ++statics;
    for (double v : per_frame_iou(interpolation_baseline(r.b_ref), r.b_tgt)) expect(v == 1.0, "static pair");
  }
  expect(statics > 0, "static pairs present");

  std::sort(failures.begin(), failures.end());
  failures.erase(std::unique(failures.begin(), failures.end()), failures.end());
  std::string detail = "iou 1/3, tube bound over 200 random sequences, map50 monotone, " +
                       std::to_string(statics) + " static pairs at IoU 1";
  for (const auto& f : failures) detail += "; failed: " + f;
  return {failures.empty(), detail};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& cmd) {
  return std::system((cmd + " >/dev/null 2>&1").c_str());
}

Outcome criterion9(const std::filesystem::path& work) {
  const std::string cli = XVIEW_CLI;
  std::vector<std::string> problems;
  std::map<std::string, std::vector<std::string>> artifacts;
  for (int pass = 0; pass < 2; ++pass) {
    const auto dir = work / ("determinism" + std::to_string(pass));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const std::string data = (dir / "data").string();
    const std::string ckpt = (dir / "f2v.ckpt").string();
    if (run(cli + " gen-data --out " + data + " --scenes 24 --frames 12 --grid 4 --order 6 --eval-fraction 0.2 --seed 9") != 0) {
      return {false, "gen-data failed"};
    }
    if (run(cli + " train --data " + data + " --out " + ckpt + " --loss-csv " + (dir / "loss.csv").string() +
            " --steps 40 --batch 4 --layers 1 --dim 16 --heads 2 --eval-every 20 --eval-samples 4 --seed 5 --quiet") != 0) {
      return {false, "train failed"};
    }
    std::ifstream eval_file(std::filesystem::path(data) / "eval.jsonl");
    std::string first;
    std::getline(eval_file, first);
    const std::string id = nlohmann::json::parse(first).at("id").get<std::string>();
    for (const char* method : {"model", "noisy-high"}) {
      if (run(cli + " transform --data " + data + " --record " + id + " --checkpoint " + ckpt + " --method " +
              method + " --seed 4 --out " + (dir / (std::string(method) + ".json")).string()) != 0) {
        return {false, std::string("transform failed for ") + method};
      }
    }
    for (const char* f : {"data/train.jsonl", "data/val.jsonl", "data/eval.jsonl", "data/manifest.json", "f2v.ckpt",
                          "loss.csv", "model.json", "noisy-high.json"}) {
      artifacts[f].push_back(slurp(dir / f));
    }
  }
  for (const auto& [name, runs] : artifacts) {
    // The val split is empty unless a val fraction is requested.
    const bool may_be_empty = name == "data/val.jsonl";
    if ((runs[0].empty() && !may_be_empty) || runs[0] != runs[1]) problems.push_back(name);
  }
  std::string detail = std::to_string(artifacts.size()) + " artifacts from gen-data, train and transform";
  if (problems.empty()) return {true, detail + " byte-identical across two runs"};
  for (const auto& p : problems) detail += "; differs or empty: " + p;
  return {false, detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  std::filesystem::path work = std::filesystem::temp_directory_path() / "xview_acceptance";
  std::filesystem::path report_path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else if (arg == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (arg == "--report" && i + 1 < argc) {
      report_path = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--only N[,N...]] [--work DIR] [--report FILE]\n");
      return 1;
    }
  }
  std::filesystem::remove_all(work);
  std::filesystem::create_directories(work);

  Desk desk(work);
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, [&] { return criterion1(desk); }}, {2, [&] { return criterion2(desk); }},
      {3, [&] { return criterion3(desk); }}, {4, [&] { return criterion4(desk); }},
      {5, [] { return criterion5(); }},      {6, [] { return criterion6(); }},
      {7, [] { return criterion7(); }},      {8, [&] { return criterion8(desk); }},
      {9, [&] { return criterion9(work); }},
  };

  std::ofstream report_file;
  if (!report_path.empty()) report_file.open(report_path);
  int failed = 0;
  for (const auto& [n, fn] : criteria) {
    if (!only.empty() && !only.count(n)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    char line[1024];
    std::snprintf(line, sizeof line, "CRITERION %d: %s  %s (%.1f s)\n", n, o.pass ? "PASS" : "FAIL",
                  o.detail.c_str(), seconds_since(t0));
    std::fputs(line, stdout);
    std::fflush(stdout);
    if (report_file) report_file << line << std::flush;
  }
  std::filesystem::remove_all(work);
  return failed == 0 ? 0 : 1;
}
