#include "flow/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "flow/error.hpp"

namespace flow {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr std::array<char, 8> kMagic{'F', 'L', 'O', 'W', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }

  void matrix(const nn::Mat<float>& m) { bytes(m.data(), sizeof(float) * static_cast<std::size_t>(m.size())); }

  void commit(const std::filesystem::path& path) const {
    // Write to a sibling first so an interrupted save never leaves a torn file.
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) fail(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
      out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
      if (!out) fail(ErrorKind::Io, "write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorKind::Io, "cannot move checkpoint into place at " + path.string() + ": " + ec.message());
  }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open checkpoint " + path_);
    std::ostringstream ss;
    ss << in.rdbuf();
    buf_ = ss.str();
  }

  template <typename T>
  T get() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  void bytes(void* dst, std::size_t n) {
    if (buf_.size() - pos_ < n) fail(ErrorKind::Parse, "checkpoint " + path_ + " is truncated");
    std::memcpy(dst, buf_.data() + pos_, n);
    pos_ += n;
  }
  void matrix(nn::Mat<float>& m) { bytes(m.data(), sizeof(float) * static_cast<std::size_t>(m.size())); }
  bool at_end() const { return pos_ == buf_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::string buf_;
  std::size_t pos_ = 0;
};

void write_header(Writer& w, const CheckpointInfo& info, const std::vector<double>& mean,
                  const std::vector<double>& scale) {
  w.bytes(kMagic.data(), kMagic.size());
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(info.kind));
  const auto& c = info.config;
  for (int v : {c.steps, c.channels, c.classes, c.views, c.conv_layers, c.conv_filters, c.kernel, c.lstm_layers,
                c.hidden, c.voting_hidden})
    w.put<std::int32_t>(v);
  w.put<std::uint64_t>(info.seed);
  w.put<std::int32_t>(static_cast<std::int32_t>(info.granularity));
  w.put<std::int32_t>(static_cast<std::int32_t>(info.view_set));
  w.put<std::int32_t>(info.epoch);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(mean.size()));
  w.bytes(mean.data(), sizeof(double) * mean.size());
  w.bytes(scale.data(), sizeof(double) * scale.size());
}

struct Header {
  CheckpointInfo info;
  std::vector<double> mean, scale;
};

Header read_header(Reader& r) {
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) fail(ErrorKind::Parse, r.path() + " is not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) fail(ErrorKind::Parse, r.path() + ": unsupported checkpoint version " + std::to_string(version));
  Header h;
  const auto kind = r.get<std::uint32_t>();
  if (kind > 1) fail(ErrorKind::Parse, r.path() + ": unknown model kind");
  h.info.kind = static_cast<ModelKind>(kind);
  auto& c = h.info.config;
  for (int* v : {&c.steps, &c.channels, &c.classes, &c.views, &c.conv_layers, &c.conv_filters, &c.kernel,
                 &c.lstm_layers, &c.hidden, &c.voting_hidden})
    *v = r.get<std::int32_t>();
  h.info.seed = r.get<std::uint64_t>();
  const auto g = r.get<std::int32_t>();
  const auto vs = r.get<std::int32_t>();
  if (g < 0 || g > 3 || vs < 0 || vs > 2) fail(ErrorKind::Parse, r.path() + ": bad granularity or view set code");
  h.info.granularity = static_cast<Granularity>(g);
  h.info.view_set = static_cast<ViewSet>(vs);
  h.info.epoch = r.get<std::int32_t>();
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Parse, r.path() + ": invalid model configuration: " + e.what());
  }
  const auto n = r.get<std::uint32_t>();
  if (n != static_cast<std::uint32_t>(c.channels)) fail(ErrorKind::Parse, r.path() + ": statistics width mismatch");
  h.mean.resize(n);
  h.scale.resize(n);
  r.bytes(h.mean.data(), sizeof(double) * n);
  r.bytes(h.scale.data(), sizeof(double) * n);
  return h;
}

void write_tensors(Writer& w, const nn::ParamList<float>& params) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->name.size()));
    w.bytes(p->name.data(), p->name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->value.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->value.cols()));
    w.matrix(p->value);
  }
}

void read_tensors(Reader& r, const nn::ParamList<float>& params) {
  const auto count = r.get<std::uint32_t>();
  if (count != params.size()) fail(ErrorKind::Parse, r.path() + ": tensor count does not match the model");
  for (auto* p : params) {
    std::string name(r.get<std::uint32_t>(), '\0');
    r.bytes(name.data(), name.size());
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (name != p->name || rows != p->value.rows() || cols != p->value.cols())
      fail(ErrorKind::Parse, r.path() + ": tensor '" + name + "' does not match model tensor '" + p->name + "'");
    r.matrix(p->value);
  }
}

void write_adam(Writer& w, nn::Adam<float>& adam) {
  w.put<std::int64_t>(adam.steps());
  for (std::size_t i = 0; i < adam.first_moments().size(); ++i) {
    w.matrix(adam.first_moments()[i]);
    w.matrix(adam.second_moments()[i]);
  }
}

void read_adam(Reader& r, nn::Adam<float>& adam) {
  adam.set_steps(r.get<std::int64_t>());
  for (std::size_t i = 0; i < adam.first_moments().size(); ++i) {
    r.matrix(adam.first_moments()[i]);
    r.matrix(adam.second_moments()[i]);
  }
}

Header open_kind(Reader& r, ModelKind expected) {
  Header h = read_header(r);
  if (h.info.kind != expected)
    fail(ErrorKind::SpecMismatch, r.path() + ": checkpoint holds a " +
                                      (h.info.kind == ModelKind::Mvf ? "MVFNet" : "baseline") + " model");
  return h;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Model& model, CheckpointInfo info,
                     MvfOptimizers<float>* optimizers) {
  info.kind = ModelKind::Mvf;
  info.config = model.config();
  info.seed = model.seed();
  Writer w;
  write_header(w, info, model.backbone().input_mean(), model.backbone().input_scale());
  write_tensors(w, model.all_params());
  w.put<std::uint32_t>(optimizers ? 2 : 0);
  if (optimizers) {
    write_adam(w, optimizers->backbone_mvf);
    write_adam(w, optimizers->voting);
  }
  w.commit(path);
}

void save_checkpoint(const std::filesystem::path& path, Baseline& model, CheckpointInfo info) {
  info.kind = ModelKind::Baseline;
  info.config = model.config();
  info.seed = model.seed();
  Writer w;
  write_header(w, info, model.backbone().input_mean(), model.backbone().input_scale());
  write_tensors(w, model.all_params());
  w.put<std::uint32_t>(0);
  w.commit(path);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  Reader r(path);
  return read_header(r).info;
}

Model load_mvf(const std::filesystem::path& path, CheckpointInfo* info) {
  Reader r(path);
  Header h = open_kind(r, ModelKind::Mvf);
  Model model(h.info.config, h.info.seed);
  model.backbone().set_input_normalization(h.mean, h.scale);
  read_tensors(r, model.all_params());
  if (info) *info = h.info;
  return model;
}

Baseline load_baseline(const std::filesystem::path& path, CheckpointInfo* info) {
  Reader r(path);
  Header h = open_kind(r, ModelKind::Baseline);
  Baseline model(h.info.config, h.info.seed);
  model.backbone().set_input_normalization(h.mean, h.scale);
  read_tensors(r, model.all_params());
  if (info) *info = h.info;
  return model;
}

bool restore_optimizers(const std::filesystem::path& path, MvfOptimizers<float>& optimizers) {
  Reader r(path);
  Header h = open_kind(r, ModelKind::Mvf);
  Model scratch(h.info.config, h.info.seed);
  read_tensors(r, scratch.all_params());
  const auto groups = r.get<std::uint32_t>();
  if (groups == 0) return false;
  if (groups != 2) fail(ErrorKind::Parse, r.path() + ": unexpected optimizer count");
  read_adam(r, optimizers.backbone_mvf);
  read_adam(r, optimizers.voting);
  if (!r.at_end()) fail(ErrorKind::Parse, r.path() + ": trailing bytes");
  return true;
}

}  // namespace flow
