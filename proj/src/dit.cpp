#include "xview/dit.hpp"

#include <cmath>
#include <random>
#include <string>
#include <unordered_map>

#include "xview/errors.hpp"

namespace xview {

using ad::Graph;
using ad::Parameter;
using ad::Shape;
using ad::Tensor;

std::string_view to_string(Direction d) {
  return d == Direction::kFirstToVideo ? "f2v" : "v2f";
}

Direction parse_direction(std::string_view name) {
  if (name == "f2v") return Direction::kFirstToVideo;
  if (name == "v2f") return Direction::kVideoToFirst;
  raise(ErrorCode::kInvalidArgument, "unknown direction '" + std::string(name) + "'");
}

std::string_view to_string(Stream s) {
  switch (s) {
    case Stream::kTrajectories: return "trajectories";
    case Stream::kContext: return "context";
    case Stream::kReference: return "b_ref";
  }
  return "trajectories";
}

Stream parse_stream(std::string_view name) {
  if (name == "trajectories") return Stream::kTrajectories;
  if (name == "context") return Stream::kContext;
  if (name == "b_ref" || name == "reference") return Stream::kReference;
  raise(ErrorCode::kUnknownStream, std::string(name));
}

void DitConfig::validate() const {
  auto bad = [](const std::string& what) { raise(ErrorCode::kConfigMismatch, what); };
  if (layers < 1) bad("layers must be >= 1");
  if (model_dim < 2 || heads < 1 || model_dim % heads != 0) bad("model_dim must be divisible by heads");
  if (model_dim % 2 != 0) bad("model_dim must be even");
  if (frames < 1) bad("frames must be >= 1");
  if (grid < 1) bad("grid must be >= 1");
  if (dct_order < 1 || dct_order > frames) bad("dct_order must lie in [1, frames]");
  if (context_patch < 1 || context_res < context_patch || context_res % context_patch != 0) {
    bad("context_res must be a positive multiple of context_patch");
  }
  if (mlp_ratio < 1) bad("mlp_ratio must be >= 1");
}

bool Conditions::dropped(Stream s) const {
  switch (s) {
    case Stream::kTrajectories: return drop_trajectories;
    case Stream::kContext: return drop_context;
    case Stream::kReference: return drop_reference;
  }
  return false;
}

Conditions drop_condition(Stream stream, Conditions inputs) {
  switch (stream) {
    case Stream::kTrajectories: inputs.drop_trajectories = true; break;
    case Stream::kContext: inputs.drop_context = true; break;
    case Stream::kReference: inputs.drop_reference = true; break;
  }
  return inputs;
}

Conditions drop_condition(std::string_view stream, Conditions inputs) {
  return drop_condition(parse_stream(stream), std::move(inputs));
}

std::vector<double> timestep_embedding(double t, int dim) {
  const int half = dim / 2;
  std::vector<double> out(dim, 0.0);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    out[i] = std::cos(1000.0 * t * freq);
    out[half + i] = std::sin(1000.0 * t * freq);
  }
  return out;
}

namespace {

// Null-token rows, one per stream.
constexpr std::size_t kNullTrajectories = 0;
constexpr std::size_t kNullContext = 1;
constexpr std::size_t kNullReference = 2;

enum class Init { kXavier, kNormal, kZero };

template <typename T>
void add_param(std::vector<Parameter<T>>& params, std::string name, Shape shape, Init init,
               std::mt19937_64& rng) {
  Parameter<T> p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  p.value.assign(ad::numel(p.shape), T(0));
  if (init == Init::kXavier) {
    const double fan_in = static_cast<double>(p.shape[0]);
    const double fan_out = static_cast<double>(p.shape.size() > 1 ? p.shape[1] : 1);
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    for (T& v : p.value) v = static_cast<T>(u(rng));
  } else if (init == Init::kNormal) {
    std::normal_distribution<double> n(0.0, 0.02);
    for (T& v : p.value) v = static_cast<T>(n(rng));
  }
  params.push_back(std::move(p));
}

template <typename T>
void add_linear(std::vector<Parameter<T>>& params, const std::string& name, std::size_t in,
                std::size_t out, Init init, std::mt19937_64& rng) {
  add_param(params, name + ".w", {in, out}, init, rng);
  add_param(params, name + ".b", {out}, Init::kZero, rng);
}

}  // namespace

template <typename T>
Dit<T>::Dit(const DitConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.init_seed);
  const std::size_t d = cfg_.model_dim;
  const std::size_t patch = static_cast<std::size_t>(cfg_.context_patch) * cfg_.context_patch;
  add_linear(params_, "frame.box", 4, d, Init::kXavier, rng);
  add_linear(params_, "frame.ref", 4, d, Init::kXavier, rng);
  add_linear(params_, "traj", 2 * static_cast<std::size_t>(cfg_.dct_order), d, Init::kXavier, rng);
  add_linear(params_, "ctx", patch, d, Init::kXavier, rng);
  add_param(params_, "null", {3, d}, Init::kNormal, rng);
  add_param(params_, "pos", {static_cast<std::size_t>(cfg_.token_count()), d}, Init::kNormal, rng);
  add_linear(params_, "time.fc1", d, d, Init::kXavier, rng);
  add_linear(params_, "time.fc2", d, d, Init::kXavier, rng);
  const std::size_t hidden = d * cfg_.mlp_ratio;
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string b = "blocks." + std::to_string(l);
    add_linear(params_, b + ".mod", d, 6 * d, Init::kZero, rng);
    add_linear(params_, b + ".attn.qkv", d, 3 * d, Init::kXavier, rng);
    add_linear(params_, b + ".attn.out", d, d, Init::kXavier, rng);
    add_linear(params_, b + ".mlp.fc1", d, hidden, Init::kXavier, rng);
    add_linear(params_, b + ".mlp.fc2", hidden, d, Init::kXavier, rng);
  }
  add_linear(params_, "final.mod", d, 2 * d, Init::kZero, rng);
  add_linear(params_, "head", d, 4, Init::kZero, rng);
}

template <typename T>
Parameter<T>& Dit<T>::parameter(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  raise(ErrorCode::kConfigMismatch, "no parameter named " + std::string(name));
}

template <typename T>
const Parameter<T>& Dit<T>::parameter(std::string_view name) const {
  return const_cast<Dit*>(this)->parameter(name);
}

template <typename T>
std::size_t Dit<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
struct Dit<T>::Bound {
  std::vector<Tensor<T>> tensors;
  std::unordered_map<std::string_view, std::size_t> index;

  const Tensor<T>& operator[](std::string_view name) const { return tensors[index.at(name)]; }
};

template <typename T>
typename Dit<T>::Bound Dit<T>::bind(Graph<T>& g, bool requires_grad) {
  Bound b;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    b.tensors.push_back(g.parameter(params_[i], requires_grad));
    b.index.emplace(params_[i].name, i);
  }
  return b;
}

template <typename T>
typename Dit<T>::Bound Dit<T>::bind_const(Graph<T>& g) const {
  Bound b;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    b.tensors.push_back(g.constant(params_[i].shape, params_[i].value));
    b.index.emplace(params_[i].name, i);
  }
  return b;
}

template <typename T>
void Dit<T>::check_inputs(std::span<const T> x_t, const Conditions& c) const {
  const std::size_t frames = cfg_.frames;
  auto expect = [](std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
      raise(ErrorCode::kShapeMismatch, std::string(what) + " has " + std::to_string(got) +
                                           " values, expected " + std::to_string(want));
    }
  };
  expect(x_t.size(), frames * 4, "x_t");
  if (!c.drop_reference) expect(c.b_ref.size(), frames * 4, "b_ref");
  if (!c.drop_trajectories) {
    expect(c.dct_tokens.size(),
           static_cast<std::size_t>(cfg_.trajectory_tokens()) * 2 * cfg_.dct_order, "dct_tokens");
  }
  if (!c.drop_context) {
    expect(c.context.size(), static_cast<std::size_t>(cfg_.context_res) * cfg_.context_res,
           "context");
  }
}

namespace {

template <typename T>
std::vector<T> to_vec(std::span<const double> v) {
  return std::vector<T>(v.begin(), v.end());
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return ad::add_bias(ad::matmul(x, w), b);
}

// Broadcasts a [1, D] row to [N, D] as ones[N,1] x row.
template <typename T>
Tensor<T> expand_rows(const Tensor<T>& ones, const Tensor<T>& row) {
  return ad::matmul(ones, row);
}

}  // namespace

template <typename T>
Tensor<T> Dit<T>::run(Graph<T>& g, const Bound& p, std::span<const T> x_t, double t,
                      const Conditions& c, bool embeddings_only) const {
  check_inputs(x_t, c);
  const std::size_t frames = cfg_.frames;
  const std::size_t d = cfg_.model_dim;
  const std::size_t n_traj = cfg_.trajectory_tokens();
  const std::size_t n_ctx = cfg_.context_tokens();
  const std::size_t n_tok = cfg_.token_count();

  // Frame tokens with the frame-aligned reference embedding added.
  Tensor<T> x = g.constant({frames, 4}, std::vector<T>(x_t.begin(), x_t.end()));
  Tensor<T> frame_tok = linear(x, p["frame.box.w"], p["frame.box.b"]);
  Tensor<T> ref_tok;
  if (c.drop_reference) {
    std::vector<std::size_t> idx(frames, kNullReference);
    ref_tok = ad::embedding<T>(p["null"], idx);
  } else {
    ref_tok = linear(g.constant({frames, 4}, to_vec<T>(c.b_ref)), p["frame.ref.w"], p["frame.ref.b"]);
  }
  frame_tok = ad::add(frame_tok, ref_tok);

  Tensor<T> traj_tok;
  if (c.drop_trajectories) {
    std::vector<std::size_t> idx(n_traj, kNullTrajectories);
    traj_tok = ad::embedding<T>(p["null"], idx);
  } else {
    const std::size_t feat = 2 * static_cast<std::size_t>(cfg_.dct_order);
    traj_tok = linear(g.constant({n_traj, feat}, to_vec<T>(c.dct_tokens)), p["traj.w"], p["traj.b"]);
  }

  Tensor<T> ctx_tok;
  if (c.drop_context) {
    std::vector<std::size_t> idx(n_ctx, kNullContext);
    ctx_tok = ad::embedding<T>(p["null"], idx);
  } else {
    const int res = cfg_.context_res, ps = cfg_.context_patch, per_side = res / ps;
    std::vector<T> patches;
    patches.reserve(static_cast<std::size_t>(res) * res);
    for (int py = 0; py < per_side; ++py)
      for (int px = 0; px < per_side; ++px)
        for (int j = 0; j < ps; ++j)
          for (int i = 0; i < ps; ++i) {
            patches.push_back(static_cast<T>(c.context[(py * ps + j) * res + px * ps + i]));
          }
    ctx_tok = linear(g.constant({n_ctx, static_cast<std::size_t>(ps * ps)}, std::move(patches)),
                     p["ctx.w"], p["ctx.b"]);
  }

  Tensor<T> h = ad::concat<T>({frame_tok, traj_tok, ctx_tok}, 0);
  if (embeddings_only) return h;
  h = ad::add(h, p["pos"]);

  const std::vector<double> temb = timestep_embedding(t, static_cast<int>(d));
  Tensor<T> cond = g.constant({1, d}, to_vec<T>(temb));
  cond = linear(ad::gelu(linear(cond, p["time.fc1.w"], p["time.fc1.b"])), p["time.fc2.w"],
                p["time.fc2.b"]);
  const Tensor<T> cond_act = ad::gelu(cond);

  const Tensor<T> ones_col = g.constant({n_tok, 1}, std::vector<T>(n_tok, T(1)));
  const Tensor<T> ones_row = g.constant({1, d}, std::vector<T>(d, T(1)));
  auto modulate = [&](const Tensor<T>& xin, const Tensor<T>& shift, const Tensor<T>& scl) {
    const Tensor<T> gain = expand_rows(ones_col, ad::add(scl, ones_row));
    return ad::add(ad::mul(ad::layer_norm(xin), gain), expand_rows(ones_col, shift));
  };

  const std::size_t heads = cfg_.heads;
  const std::size_t dh = d / heads;
  const T attn_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string b = "blocks." + std::to_string(l);
    const Tensor<T> mod = linear(cond_act, p[b + ".mod.w"], p[b + ".mod.b"]);
    auto chunk = [&](std::size_t i) { return ad::slice(mod, 1, i * d, (i + 1) * d); };

    // Self-attention.
    const Tensor<T> a_in = modulate(h, chunk(0), chunk(1));
    const Tensor<T> qkv = linear(a_in, p[b + ".attn.qkv.w"], p[b + ".attn.qkv.b"]);
    std::vector<Tensor<T>> head_out;
    head_out.reserve(heads);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const Tensor<T> q = ad::slice(qkv, 1, hd * dh, (hd + 1) * dh);
      const Tensor<T> k = ad::slice(qkv, 1, d + hd * dh, d + (hd + 1) * dh);
      const Tensor<T> v = ad::slice(qkv, 1, 2 * d + hd * dh, 2 * d + (hd + 1) * dh);
      const Tensor<T> att = ad::softmax(ad::scale(ad::matmul(q, ad::transpose(k)), attn_scale));
      head_out.push_back(ad::matmul(att, v));
    }
    const Tensor<T> attn = linear(ad::concat<T>(head_out, 1), p[b + ".attn.out.w"], p[b + ".attn.out.b"]);
    h = ad::add(h, ad::mul(expand_rows(ones_col, chunk(2)), attn));

    // Feed-forward.
    const Tensor<T> m_in = modulate(h, chunk(3), chunk(4));
    const Tensor<T> mlp = linear(ad::gelu(linear(m_in, p[b + ".mlp.fc1.w"], p[b + ".mlp.fc1.b"])),
                                 p[b + ".mlp.fc2.w"], p[b + ".mlp.fc2.b"]);
    h = ad::add(h, ad::mul(expand_rows(ones_col, chunk(5)), mlp));
  }

  const Tensor<T> fmod = linear(cond_act, p["final.mod.w"], p["final.mod.b"]);
  const Tensor<T> out = modulate(h, ad::slice(fmod, 1, 0, d), ad::slice(fmod, 1, d, 2 * d));
  return linear(ad::slice(out, 0, 0, frames), p["head.w"], p["head.b"]);
}

template <typename T>
Tensor<T> Dit<T>::forward(Graph<T>& g, std::span<const T> x_t, double t, const Conditions& c,
                          bool requires_grad) {
  if (!std::isfinite(t)) raise(ErrorCode::kInvalidArgument, "diffusion time must be finite");
  const Bound p = bind(g, requires_grad);
  return run(g, p, x_t, t, c, false);
}

template <typename T>
std::vector<T> Dit<T>::velocity(std::span<const T> x_t, double t, const Conditions& c) const {
  if (!std::isfinite(t)) raise(ErrorCode::kInvalidArgument, "diffusion time must be finite");
  Graph<T> g;
  const Bound p = bind_const(g);
  const Tensor<T> v = run(g, p, x_t, t, c, false);
  return {v.data().begin(), v.data().end()};
}

template <typename T>
std::vector<T> Dit<T>::token_embeddings(std::span<const T> x_t, const Conditions& c) const {
  Graph<T> g;
  const Bound p = bind_const(g);
  const Tensor<T> e = run(g, p, x_t, 0.0, c, true);
  return {e.data().begin(), e.data().end()};
}

template class Dit<float>;
template class Dit<double>;

}  // namespace xview
