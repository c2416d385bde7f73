#include "edgesynth/params.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "edgesynth/common.hpp"
#include "edgesynth/ntf.hpp"

namespace edgesynth {

Tensor& ParamStore::add(const std::string& name, Tensor init, bool trainable) {
  ES_CHECK(!has(name), "duplicate parameter name: " + name);
  order_.push_back(name);
  Param p;
  p.value = std::move(init);
  p.trainable = trainable;
  auto [it, ok] = map_.emplace(name, std::move(p));
  (void)ok;
  return it->second.value;
}

Param& ParamStore::at(const std::string& name) {
  auto it = map_.find(name);
  ES_CHECK(it != map_.end(), "unknown parameter: " + name);
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = map_.find(name);
  ES_CHECK(it != map_.end(), "unknown parameter: " + name);
  return it->second;
}

Tensor init_uniform(Rng& rng, std::vector<int> shape, double bound) {
  Tensor t(std::move(shape));
  for (auto& v : t.data)
    v = static_cast<double>(static_cast<float>(rng.uniform(-bound, bound)));
  return t;
}

Tensor init_linear_weight(Rng& rng, int fan_in, int fan_out) {
  double bound = std::sqrt(6.0 / (fan_in + fan_out));
  return init_uniform(rng, {fan_in, fan_out}, bound);
}

namespace {
std::string shape_to_field(const std::vector<int>& shape) {
  std::string s;
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s.empty() ? "scalar" : s;
}
}  // namespace

void save_checkpoint(const ParamStore& store, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir.string());
  std::ofstream os(dir / "checkpoint.tsv", std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + (dir / "checkpoint.tsv").string());
  for (const auto& name : store.names()) {
    const Param& p = store.at(name);
    std::string file = name + ".ntf";
    ntf_write(dir / file, p.value);
    os << name << '\t' << file << '\t' << shape_to_field(p.value.shape) << '\t'
       << (p.trainable ? 1 : 0) << '\n';
  }
  if (!os) throw IoError("write failed: " + (dir / "checkpoint.tsv").string());
}

ParamStore load_checkpoint(const std::filesystem::path& dir) {
  auto manifest = dir / "checkpoint.tsv";
  std::ifstream is(manifest);
  if (!is) throw IoError("cannot open checkpoint manifest: " + manifest.string());
  ParamStore store;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, file, shape_s, trainable_s;
    if (!std::getline(ls, name, '\t') || !std::getline(ls, file, '\t') ||
        !std::getline(ls, shape_s, '\t') || !std::getline(ls, trainable_s, '\t'))
      throw IoError("malformed checkpoint manifest line " +
                    std::to_string(lineno) + " in " + manifest.string());
    Tensor t = ntf_read(dir / file);
    if (shape_to_field(t.shape) != shape_s)
      throw IoError("checkpoint tensor '" + name + "' shape " +
                    shape_to_field(t.shape) + " != manifest " + shape_s);
    store.add(name, std::move(t), trainable_s == "1");
  }
  return store;
}

void check_compatible(const ParamStore& loaded, const ParamStore& expected) {
  for (const auto& name : expected.names()) {
    if (!loaded.has(name))
      throw IoError("checkpoint is missing tensor '" + name + "' (expected " +
                    expected.at(name).value.shape_str() + ")");
    const Tensor& got = loaded.at(name).value;
    const Tensor& want = expected.at(name).value;
    if (got.shape != want.shape)
      throw IoError("checkpoint tensor '" + name + "' has shape " +
                    got.shape_str() + ", config wants " + want.shape_str());
  }
  for (const auto& name : loaded.names())
    if (!expected.has(name))
      throw IoError("checkpoint carries unexpected tensor '" + name + "'");
}

void store_meta_u64(ParamStore& store, const std::string& name, uint64_t v) {
  Tensor t({8});
  for (int i = 0; i < 8; ++i)
    t.data[static_cast<size_t>(i)] =
        static_cast<double>((v >> (8 * i)) & 0xff);
  if (store.has(name))
    store.at(name).value = std::move(t);
  else
    store.add(name, std::move(t), /*trainable=*/false);
}

std::optional<uint64_t> read_meta_u64(const ParamStore& store,
                                      const std::string& name) {
  if (!store.has(name)) return std::nullopt;
  const Tensor& t = store.at(name).value;
  if (t.numel() != 8) return std::nullopt;
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= (static_cast<uint64_t>(t.data[static_cast<size_t>(i)]) & 0xff)
         << (8 * i);
  return v;
}

ag::VPtr GraphParams::operator[](const std::string& name) {
  auto it = leaves_.find(name);
  if (it != leaves_.end()) return it->second;
  const Param& p = store_->at(name);
  bool rg = p.trainable && !freeze_all_;
  auto node = ag::leaf(p.value, rg);
  leaves_.emplace(name, node);
  return node;
}

void GraphParams::accumulate_grads(std::map<std::string, Tensor>& grads) const {
  for (const auto& [name, node] : leaves_) {
    if (!node->requires_grad) continue;
    auto it = grads.find(name);
    if (it == grads.end()) {
      grads.emplace(name, node->grad);
    } else {
      ES_CHECK(it->second.same_shape(node->grad), "grad shape drift: " + name);
      for (size_t i = 0; i < node->grad.data.size(); ++i)
        it->second.data[i] += node->grad.data[i];
    }
  }
}

void adam_step(ParamStore& store, const GradMap& grads, double lr, int64_t t,
               const AdamConfig& cfg) {
  ES_CHECK(t >= 1, "adam step count is 1-based");
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (const auto& name : store.names()) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    Param& p = store.at(name);
    ES_CHECK(p.trainable, "gradient for frozen tensor: " + name);
    const Tensor& g = git->second;
    ES_CHECK(g.same_shape(p.value), "gradient shape mismatch: " + name);
    if (p.adam_m.data.empty()) {
      p.adam_m = Tensor(p.value.shape);
      p.adam_v = Tensor(p.value.shape);
    }
    for (size_t i = 0; i < p.value.data.size(); ++i) {
      double gv = g.data[i];
      p.adam_m.data[i] = cfg.beta1 * p.adam_m.data[i] + (1.0 - cfg.beta1) * gv;
      p.adam_v.data[i] =
          cfg.beta2 * p.adam_v.data[i] + (1.0 - cfg.beta2) * gv * gv;
      double mhat = p.adam_m.data[i] / bc1;
      double vhat = p.adam_v.data[i] / bc2;
      p.value.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace edgesynth
