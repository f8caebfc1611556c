// xview: dataset generation, training, evaluation, single-record transforms
// and the HTTP service.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "xview/checkpoint.hpp"
#include "xview/datapipe.hpp"
#include "xview/errors.hpp"
#include "xview/flowmatch.hpp"
#include "xview/service.hpp"

namespace {

using namespace xview;
using nlohmann::json;

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::kIo, "cannot write " + path);
  out << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct GenOpts {
  GenerateConfig cfg;
  std::string out;
};

struct TrainOpts {
  std::string data;
  std::string direction = "f2v";
  std::string out;
  std::string loss_csv;
  DitConfig model;
  TrainConfig train;
  std::size_t limit = 0;
  bool quiet = false;
};

struct EvalOpts {
  std::string data;
  std::string split = "eval";
  std::vector<std::string> checkpoints;
  std::string methods = "model,interpolation,warp_corners,warp_center,noisy-high,noisy-low";
  std::string directions = "f2v,v2f";
  std::string drop;
  std::string out;
  std::string csv;
  std::size_t limit = 0;
  bool moving_only = false;
  int sample_steps = 28;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct TransformOpts {
  std::string data;
  std::string record;
  std::string request;
  std::vector<std::string> checkpoints;
  std::string method = "model";
  std::string direction = "f2v";
  int sample_steps = 28;
  std::uint64_t seed = 0;
  std::string out;
};

struct ServeOpts {
  std::string data;
  std::vector<std::string> checkpoints;
  std::string host = "127.0.0.1";
  int port = 8080;
};

std::vector<LoadedModel> load_models(const std::vector<std::string>& paths) {
  std::vector<LoadedModel> out;
  for (const std::string& p : paths) {
    out.push_back({std::filesystem::path(p).filename().string(), load_checkpoint(p)});
  }
  return out;
}

int run_gen(const GenOpts& o) {
  const json manifest = generate(o.cfg, o.out);
  std::cout << manifest.dump(2) << '\n';
  return 0;
}

int run_train(TrainOpts o) {
  const Direction d = parse_direction(o.direction);
  Dataset ds = load_dataset(o.data);
  if (o.limit && ds.train.size() > o.limit) ds.train.resize(o.limit);
  if (ds.train.empty()) raise(ErrorCode::kEmptyDataset, "training split is empty");
  const SampleRecord& first = ds.train.front();
  o.model.direction = d;
  o.model.frames = first.frames;
  o.model.grid = first.grid;
  o.model.dct_order = first.order;
  o.model.context_res = first.context_res;
  o.model.validate();

  std::vector<FlowExample> train_set;
  for (const SampleRecord& r : ds.train) train_set.push_back(to_flow_example(r, d));
  std::vector<FlowExample> val;
  for (const SampleRecord& r : ds.val.empty() ? ds.eval : ds.val) val.push_back(to_flow_example(r, d));

  const TrainProgress progress = [&](const LossPoint& p) {
    if (o.quiet) return;
    if (p.eval_iou) {
      std::fprintf(stderr, "step %d loss %.6f eval_iou %.4f\n", p.step, p.loss, *p.eval_iou);
    } else if (p.step % 100 == 0) {
      std::fprintf(stderr, "step %d loss %.6f\n", p.step, p.loss);
    }
  };
  TrainResult result = xview::train(Dit<float>(o.model), train_set, o.train, val, progress);
  save_checkpoint(o.out, result.checkpoint);
  if (!o.loss_csv.empty()) write_text(o.loss_csv, loss_curve_csv(result.curve));
  return 0;
}

int run_eval(const EvalOpts& o) {
  const std::vector<SampleRecord> records = load_split(o.data, parse_split(o.split));
  const std::vector<LoadedModel> models = load_models(o.checkpoints);
  std::map<Direction, const Dit<float>*> by_dir;
  for (const LoadedModel& m : models) by_dir[m.checkpoint.model.config().direction] = &m.checkpoint.model;

  EvalOptions opts;
  opts.methods = split_list(o.methods);
  opts.directions.clear();
  for (const std::string& d : split_list(o.directions)) opts.directions.push_back(parse_direction(d));
  for (const std::string& s : split_list(o.drop)) opts.drop.push_back(parse_stream(s));
  opts.sampler.num_steps = o.sample_steps;
  opts.sampler.seed = o.seed;
  opts.limit = o.limit;
  opts.moving_only = o.moving_only;
  opts.threads = o.threads;
  const auto results = evaluate(records, by_dir, opts);

  std::cerr << eval_table(results);
  const std::string body = eval_json(results).dump(2) + "\n";
  if (o.out.empty()) {
    std::cout << body;
  } else {
    write_text(o.out, body);
  }
  if (!o.csv.empty()) {
    std::string csv;
    for (const auto& mr : results) {
      for (const auto& [d, report] : mr.reports) {
        // Keep a single header line.
        const std::string part = report.to_csv();
        csv += csv.empty() ? part : part.substr(part.find('\n') + 1);
      }
    }
    write_text(o.csv, csv);
  }
  return 0;
}

int run_transform(const TransformOpts& o) {
  Service svc(load_dataset(o.data), load_models(o.checkpoints));
  TransformRequest req;
  if (!o.request.empty()) {
    std::ifstream in(o.request, std::ios::binary);
    if (!in) raise(ErrorCode::kIo, "cannot read " + o.request);
    req = parse_transform_request(json::parse(in));
  } else {
    req.record_id = o.record;
    req.method = o.method;
    req.direction = parse_direction(o.direction);
    req.sampler.num_steps = o.sample_steps;
    req.sampler.seed = o.seed;
  }
  const std::string body = svc.transform(req).to_json().dump(2) + "\n";
  if (o.out.empty()) {
    std::cout << body;
  } else {
    write_text(o.out, body);
  }
  return 0;
}

int run_serve(const ServeOpts& o) {
  Service svc(load_dataset(o.data), load_models(o.checkpoints));
  HttpServer server(svc);
  const int port = server.bind(o.host, o.port);
  std::cerr << "listening on http://" << o.host << ':' << port << '\n';
  server.listen();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-view box trajectory transformation"};
  app.require_subcommand(1);

  GenOpts gen;
  auto* g = app.add_subcommand("gen-data", "Generate the synthetic paired-view dataset");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--scenes", gen.cfg.n_scenes, "Number of scenes")->capture_default_str();
  g->add_option("--paths", gen.cfg.paths_per_scene, "Camera paths per scene")->capture_default_str();
  g->add_option("--frames", gen.cfg.frames, "Frames per clip (T)")->capture_default_str();
  g->add_option("--grid", gen.cfg.grid, "Track grid size (G)")->capture_default_str();
  g->add_option("--order", gen.cfg.order, "DCT order (K)")->capture_default_str();
  g->add_option("--eval-fraction", gen.cfg.eval_fraction)->capture_default_str();
  g->add_option("--val-fraction", gen.cfg.val_fraction)->capture_default_str();
  g->add_option("--stationary-probability", gen.cfg.stationary_probability)->capture_default_str();
  g->add_option("--seed", gen.cfg.seed)->capture_default_str();
  g->add_option("--threads", gen.cfg.threads, "Worker threads (0: all cores)");

  TrainOpts tr;
  tr.model.layers = 4;
  tr.model.model_dim = 64;
  tr.model.residual_target = true;
  auto* t = app.add_subcommand("train", "Train a flow-matching DiT for one direction");
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--direction", tr.direction)->check(CLI::IsMember({"f2v", "v2f"}))->capture_default_str();
  t->add_option("--out", tr.out, "Checkpoint path")->required();
  t->add_option("--loss-csv", tr.loss_csv, "Loss curve CSV path");
  t->add_option("--layers", tr.model.layers)->capture_default_str();
  t->add_option("--dim", tr.model.model_dim)->capture_default_str();
  t->add_option("--heads", tr.model.heads)->capture_default_str();
  t->add_option("--mlp-ratio", tr.model.mlp_ratio)->capture_default_str();
  t->add_option("--context-patch", tr.model.context_patch)->capture_default_str();
  t->add_option("--init-seed", tr.model.init_seed)->capture_default_str();
  t->add_flag("--residual,!--no-residual", tr.model.residual_target,
              "Flow on target minus source boxes (default on)");
  t->add_option("--steps", tr.train.steps)->capture_default_str();
  t->add_option("--lr", tr.train.lr)->capture_default_str();
  t->add_option("--weight-decay", tr.train.weight_decay)->capture_default_str();
  t->add_option("--batch", tr.train.batch_size)->capture_default_str();
  t->add_option("--seed", tr.train.seed)->capture_default_str();
  t->add_option("--eval-every", tr.train.eval_every)->capture_default_str();
  t->add_option("--eval-samples", tr.train.eval_samples)->capture_default_str();
  t->add_option("--warmup", tr.train.warmup_steps)->capture_default_str();
  t->add_option("--grad-clip", tr.train.grad_clip)->capture_default_str();
  t->add_option("--drop-trajectories", tr.train.drop_trajectories)->capture_default_str();
  t->add_option("--drop-context", tr.train.drop_context)->capture_default_str();
  t->add_option("--drop-reference", tr.train.drop_reference)->capture_default_str();
  t->add_option("--limit", tr.limit, "Use only the first N training records");
  t->add_flag("--quiet", tr.quiet);

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "Compare methods on a dataset split");
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--split", ev.split)->check(CLI::IsMember({"train", "val", "eval"}))->capture_default_str();
  e->add_option("--checkpoint", ev.checkpoints, "Checkpoint per direction (repeatable)");
  e->add_option("--methods", ev.methods)->capture_default_str();
  e->add_option("--directions", ev.directions)->capture_default_str();
  e->add_option("--drop", ev.drop, "Streams to replace by null tokens (trajectories,context,reference)");
  e->add_option("--out", ev.out, "Report JSON path (stdout when omitted)");
  e->add_option("--csv", ev.csv, "Per-sequence CSV path");
  e->add_option("--limit", ev.limit, "Evaluate only the first N records");
  e->add_flag("--moving-only", ev.moving_only, "Skip static-camera records");
  e->add_option("--sample-steps", ev.sample_steps)->capture_default_str();
  e->add_option("--seed", ev.seed)->capture_default_str();
  e->add_option("--threads", ev.threads);

  TransformOpts tf;
  auto* x = app.add_subcommand("transform", "Transform one record or request");
  x->add_option("--data", tf.data, "Dataset directory")->required();
  auto* rec = x->add_option("--record", tf.record, "Record id");
  auto* reqopt = x->add_option("--request", tf.request, "TransformRequest JSON file");
  rec->excludes(reqopt);
  x->add_option("--checkpoint", tf.checkpoints, "Checkpoint per direction (repeatable)");
  x->add_option("--method", tf.method)->capture_default_str();
  x->add_option("--direction", tf.direction)->check(CLI::IsMember({"f2v", "v2f"}))->capture_default_str();
  x->add_option("--sample-steps", tf.sample_steps)->capture_default_str();
  x->add_option("--seed", tf.seed)->capture_default_str();
  x->add_option("--out", tf.out, "Response JSON path (stdout when omitted)");

  ServeOpts sv;
  auto* s = app.add_subcommand("serve", "Run the HTTP service");
  s->add_option("--data", sv.data, "Dataset directory")->required();
  s->add_option("--checkpoint", sv.checkpoints, "Checkpoint per direction (repeatable)");
  s->add_option("--host", sv.host)->capture_default_str();
  s->add_option("--port", sv.port)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kUsage;
  }
  if (*x && tf.record.empty() && tf.request.empty()) {
    std::cerr << "transform: one of --record or --request is required\n";
    return kUsage;
  }

  try {
    if (*g) return run_gen(gen);
    if (*t) return run_train(tr);
    if (*e) return run_eval(ev);
    if (*x) return run_transform(tf);
    if (*s) return run_serve(sv);
  } catch (const RequestError& err) {
    std::cerr << "error: " << err.reason() << ": " << err.what() << '\n';
    return kRuntime;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
