#include "xview/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "xview/errors.hpp"

namespace xview {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

nlohmann::json to_json(const DitConfig& c) {
  return {{"layers", c.layers},
          {"model_dim", c.model_dim},
          {"heads", c.heads},
          {"frames", c.frames},
          {"grid", c.grid},
          {"dct_order", c.dct_order},
          {"context_res", c.context_res},
          {"context_patch", c.context_patch},
          {"mlp_ratio", c.mlp_ratio},
          {"direction", std::string(to_string(c.direction))},
          {"init_seed", c.init_seed},
          {"residual_target", c.residual_target}};
}

DitConfig dit_config_from_json(const nlohmann::json& j) {
  try {
    DitConfig c;
    c.layers = j.at("layers").get<int>();
    c.model_dim = j.at("model_dim").get<int>();
    c.heads = j.at("heads").get<int>();
    c.frames = j.at("frames").get<int>();
    c.grid = j.at("grid").get<int>();
    c.dct_order = j.at("dct_order").get<int>();
    c.context_res = j.value("context_res", 16);
    c.context_patch = j.value("context_patch", 4);
    c.mlp_ratio = j.value("mlp_ratio", 4);
    c.direction = parse_direction(j.value("direction", std::string("f2v")));
    c.init_seed = j.value("init_seed", std::uint64_t{0});
    c.residual_target = j.value("residual_target", false);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::kFormat, std::string("bad model config: ") + e.what());
  }
}

namespace {

constexpr char kMagic[4] = {'T', 'R', 'C', 'E'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void floats(float* dst, std::size_t n) {
    need(n * 4);
    std::memcpy(dst, bytes_.data() + pos_, n * 4);
    pos_ += n * 4;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) raise(ErrorCode::kFormat, "truncated checkpoint");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const ModelCheckpoint& ckpt) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kVersion);
  const nlohmann::json header = {{"config", to_json(ckpt.model.config())},
                                 {"train_step", ckpt.train_step},
                                 {"seed", ckpt.seed}};
  const std::string text = header.dump();
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());

  const auto& params = ckpt.model.parameters();
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    put_u32(out, static_cast<std::uint32_t>(p.shape.size()));
    for (std::size_t e : p.shape) put_u32(out, static_cast<std::uint32_t>(e));
  }
  for (const auto& p : params) {
    const auto* raw = reinterpret_cast<const std::uint8_t*>(p.value.data());
    out.insert(out.end(), raw, raw + p.value.size() * sizeof(float));
  }
  return out;
}

ModelCheckpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(kMagic, 4)) raise(ErrorCode::kFormat, "bad checkpoint magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    raise(ErrorCode::kFormat, "unsupported checkpoint version " + std::to_string(version));
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.str(r.u32()));
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::kFormat, std::string("bad checkpoint header: ") + e.what());
  }
  ModelCheckpoint ckpt{Dit<float>(dit_config_from_json(header.at("config"))),
                       header.value("train_step", std::int64_t{0}),
                       header.value("seed", std::uint64_t{0})};

  auto& params = ckpt.model.parameters();
  const std::uint32_t count = r.u32();
  if (count != params.size()) {
    raise(ErrorCode::kConfigMismatch, "checkpoint has " + std::to_string(count) +
                                          " parameters, config implies " +
                                          std::to_string(params.size()));
  }
  for (auto& p : params) {
    const std::string name = r.str(r.u32());
    ad::Shape shape(r.u32());
    for (auto& e : shape) e = r.u32();
    if (name != p.name || shape != p.shape) {
      raise(ErrorCode::kConfigMismatch, "parameter " + name + " " + ad::shape_string(shape) +
                                            " does not match " + p.name + " " +
                                            ad::shape_string(p.shape));
    }
  }
  for (auto& p : params) r.floats(p.value.data(), p.value.size());
  if (!r.done()) raise(ErrorCode::kFormat, "trailing bytes after checkpoint payload");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& ckpt) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary);
  if (!f) raise(ErrorCode::kIo, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) raise(ErrorCode::kIo, "failed writing " + path.string());
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace xview
