#include "isac/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

namespace isac {

namespace {

constexpr std::uint64_t kInitDomain = 0x494e4954;  // "INIT"
constexpr char kMagic[8] = {'I', 'S', 'A', 'C', 'N', 'E', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void put_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("checkpoint: truncated");
  return v;
}

double get_f64(std::istream& in) {
  double v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("checkpoint: truncated");
  return v;
}

void append(std::vector<ad::NodePtr>& dst, const std::vector<ad::NodePtr>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

NetworkBlob blob_of(const Mlp& m) {
  NetworkBlob b{m.name, {}};
  for (const auto& l : m.layers) b.layers.emplace_back(l.W->value, l.b->value);
  return b;
}

void assign(const ad::NodePtr& dst, const Grid& src, const std::string& where) {
  if (dst->rows() != src.rows() || dst->cols() != src.cols())
    throw DimensionError("checkpoint: " + where + " is " + std::to_string(src.rows()) + "x" +
                         std::to_string(src.cols()) + ", config expects " + std::to_string(dst->rows()) + "x" +
                         std::to_string(dst->cols()));
  dst->value = src;
}

void load_mlp(Mlp& m, const NetworkBlob& b) {
  if (b.layers.size() != m.layers.size())
    throw DimensionError("checkpoint: network '" + b.name + "' has " + std::to_string(b.layers.size()) +
                         " layers, config expects " + std::to_string(m.layers.size()));
  for (std::size_t l = 0; l < b.layers.size(); ++l) {
    assign(m.layers[l].W, b.layers[l].first, b.name + " layer " + std::to_string(l) + " weight");
    assign(m.layers[l].b, b.layers[l].second, b.name + " layer " + std::to_string(l) + " bias");
  }
}

}  // namespace

IsacModel IsacModel::make(const SystemConfig& cfg, TxMode mode, EstimatorKind estimator, std::uint64_t seed) {
  cfg.validate();
  Rng rng = make_stream(seed, kInitDomain, 0);
  IsacModel m;
  m.mode = mode;
  m.estimator = estimator;
  if (mode == TxMode::Slp)
    m.slp = SlpParams::make(cfg, rng);
  else
    m.blp = BlpParams::make(cfg, rng);
  for (int k = 0; k < cfg.K; ++k) m.decoders.push_back(DecoderParams::make(cfg, k, rng));
  m.detector = DetectorParams::make(cfg, rng);
  if (estimator == EstimatorKind::Lstm)
    m.lstm = LstmParams::make(cfg, rng);
  else
    m.mlp_estimator = MlpEstimatorParams::make(cfg, rng);
  return m;
}

std::vector<ad::NodePtr> IsacModel::transmitter_params() const {
  std::vector<ad::NodePtr> out;
  if (slp) append(out, slp->net.params());
  if (blp) {
    append(out, blp->encoder.params());
    append(out, blp->beamformer.params());
  }
  return out;
}

std::vector<ad::NodePtr> IsacModel::decoder_params() const {
  std::vector<ad::NodePtr> out;
  for (const auto& d : decoders) append(out, d.net.params());
  return out;
}

std::vector<ad::NodePtr> IsacModel::radar_params() const {
  std::vector<ad::NodePtr> out = detector.net.params();
  if (lstm) append(out, lstm->params());
  if (mlp_estimator) append(out, mlp_estimator->net.params());
  return out;
}

std::vector<ad::NodePtr> IsacModel::params() const {
  auto out = transmitter_params();
  append(out, decoder_params());
  append(out, radar_params());
  return out;
}

std::vector<NetworkBlob> export_networks(const IsacModel& model) {
  std::vector<NetworkBlob> nets;
  if (model.slp) nets.push_back(blob_of(model.slp->net));
  if (model.blp) {
    nets.push_back(blob_of(model.blp->encoder));
    nets.push_back(blob_of(model.blp->beamformer));
  }
  for (const auto& d : model.decoders) nets.push_back(blob_of(d.net));
  nets.push_back(blob_of(model.detector.net));
  if (model.lstm) {
    const auto& p = *model.lstm;
    nets.push_back({"lstm_estimator",
                    {{p.Wi->value, p.bi->value},
                     {p.Wf->value, p.bf->value},
                     {p.Wo->value, p.bo->value},
                     {p.Wg->value, p.bg->value},
                     {p.head.W->value, p.head.b->value}}});
  }
  if (model.mlp_estimator) nets.push_back(blob_of(model.mlp_estimator->net));
  return nets;
}

void write_checkpoint(std::ostream& out, const std::vector<NetworkBlob>& nets) {
  out.write(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(nets.size()));
  for (const auto& n : nets) {
    put_u32(out, static_cast<std::uint32_t>(n.name.size()));
    out.write(n.name.data(), static_cast<std::streamsize>(n.name.size()));
    put_u32(out, static_cast<std::uint32_t>(n.layers.size()));
    for (const auto& [W, b] : n.layers) {
      if (b.rows() != W.rows() || b.cols() != 1)
        throw DimensionError("checkpoint: bias of '" + n.name + "' does not match its weight rows");
      put_u32(out, static_cast<std::uint32_t>(W.rows()));
      put_u32(out, static_cast<std::uint32_t>(W.cols()));
      for (Index r = 0; r < W.rows(); ++r)
        for (Index c = 0; c < W.cols(); ++c) put_f64(out, W(r, c));
      for (Index r = 0; r < b.rows(); ++r) put_f64(out, b(r, 0));
    }
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

std::vector<NetworkBlob> read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("checkpoint: bad magic (expected ISACNET1)");
  const auto count = get_u32(in);
  std::vector<NetworkBlob> nets(count);
  for (auto& n : nets) {
    const auto len = get_u32(in);
    n.name.resize(len);
    if (!in.read(n.name.data(), len)) throw std::runtime_error("checkpoint: truncated");
    const auto layers = get_u32(in);
    for (std::uint32_t l = 0; l < layers; ++l) {
      const auto rows = get_u32(in);
      const auto cols = get_u32(in);
      Grid W(rows, cols);
      for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) W(r, c) = get_f64(in);
      Grid b(rows, 1);
      for (Index r = 0; r < rows; ++r) b(r, 0) = get_f64(in);
      n.layers.emplace_back(std::move(W), std::move(b));
    }
  }
  return nets;
}

void save_checkpoint(const std::filesystem::path& path, const IsacModel& model) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  write_checkpoint(f, export_networks(model));
}

IsacModel model_from_networks(const std::vector<NetworkBlob>& nets, const SystemConfig& cfg) {
  std::map<std::string, const NetworkBlob*> by_name;
  for (const auto& n : nets) by_name[n.name] = &n;
  auto need = [&](const std::string& name) -> const NetworkBlob& {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: missing network '" + name + "'");
    return *it->second;
  };
  const TxMode mode = by_name.contains("slp") ? TxMode::Slp : TxMode::Blp;
  const EstimatorKind est = by_name.contains("lstm_estimator") ? EstimatorKind::Lstm : EstimatorKind::Mlp;
  IsacModel m = IsacModel::make(cfg, mode, est, 0);
  if (m.slp) load_mlp(m.slp->net, need("slp"));
  if (m.blp) {
    load_mlp(m.blp->encoder, need("blp_encoder"));
    load_mlp(m.blp->beamformer, need("blp_beamformer"));
  }
  for (auto& d : m.decoders) load_mlp(d.net, need(d.net.name));
  load_mlp(m.detector.net, need("detector"));
  if (m.lstm) {
    const auto& b = need("lstm_estimator");
    if (b.layers.size() != 5) throw DimensionError("checkpoint: lstm_estimator must have 5 layers");
    auto& p = *m.lstm;
    const std::array<std::pair<ad::NodePtr, ad::NodePtr>, 5> slots{
        {{p.Wi, p.bi}, {p.Wf, p.bf}, {p.Wo, p.bo}, {p.Wg, p.bg}, {p.head.W, p.head.b}}};
    for (std::size_t l = 0; l < 5; ++l) {
      assign(slots[l].first, b.layers[l].first, "lstm_estimator layer " + std::to_string(l) + " weight");
      assign(slots[l].second, b.layers[l].second, "lstm_estimator layer " + std::to_string(l) + " bias");
    }
  }
  if (m.mlp_estimator) load_mlp(m.mlp_estimator->net, need("mlp_estimator"));
  return m;
}

IsacModel load_checkpoint(const std::filesystem::path& path, const SystemConfig& cfg) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  return model_from_networks(read_checkpoint(f), cfg);
}

}  // namespace isac
