#include "wqoe/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "wqoe/errors.hpp"

namespace wqoe {

namespace {

constexpr std::uint16_t kFormatVersion = 1;
constexpr char kMagic[4] = {'W', 'Q', 'O', 'E'};

struct Writer {
  std::vector<std::uint8_t> bytes;

  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
};

struct Reader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > size) throw SerializationError("model file: truncated stream");
  }
  std::uint8_t u8() {
    need(1);
    return data[pos++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(data[pos++]) << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
};

void write_norm(Writer& w, const NormStats& n) {
  for (double v : n.feature_mean) w.f64(v);
  for (double v : n.feature_std) w.f64(v);
  w.f64(n.qoe_mean);
  w.f64(n.qoe_std);
}

NormStats read_norm(Reader& r) {
  NormStats n;
  for (double& v : n.feature_mean) v = r.f64();
  for (double& v : n.feature_std) v = r.f64();
  n.qoe_mean = r.f64();
  n.qoe_std = r.f64();
  return n;
}

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < size; ++i) {
    c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
  }
  return c ^ 0xFFFFFFFFu;
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "wavenet") return ModelKind::wavenet;
  if (name == "lstm") return ModelKind::lstm;
  throw DataError("unknown model kind '" + name + "' (expected wavenet or lstm)");
}

std::string model_kind_name(ModelKind kind) {
  return kind == ModelKind::wavenet ? "wavenet" : "lstm";
}

std::size_t Model::param_count() const {
  return std::visit([](const auto& p) { return p.param_count(); }, params);
}

std::vector<nn::ParamRef> Model::param_refs() {
  return std::visit([](auto& p) { return p.param_refs(); }, params);
}

std::vector<std::uint8_t> serialize_model(const Model& model) {
  Writer w;
  w.bytes.insert(w.bytes.end(), kMagic, kMagic + 4);
  w.u16(kFormatVersion);
  w.u8(static_cast<std::uint8_t>(model.kind()));
  w.u8(0);  // reserved
  if (model.kind() == ModelKind::wavenet) {
    const WaveNetConfig& c = std::get<WaveNetParams>(model.params).config;
    w.i32(c.filter_size);
    w.i32(c.num_filters);
    w.i32(c.dilation_base);
    w.i32(c.num_layers);
    w.i32(c.input_features);
  } else {
    const LstmConfig& c = std::get<LstmParams>(model.params).config;
    w.i32(c.input_features);
    w.i32(c.hidden_size);
  }
  w.i32(model.window_len);
  w.u64(model.seed);
  write_norm(w, model.norm);
  // const_cast: param_refs only aliases the tensors, nothing is mutated here.
  auto refs = const_cast<Model&>(model).param_refs();
  for (const nn::ParamRef& r : refs) {
    for (double v : r.value->data) w.f64(v);
  }
  w.u32(crc32(w.bytes.data(), w.bytes.size()));
  return w.bytes;
}

Model deserialize_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw SerializationError("model file: bad magic (not a model file)");
  }
  if (bytes.size() < 10) throw SerializationError("model file: truncated stream");
  const std::uint32_t stored_crc =
      static_cast<std::uint32_t>(bytes[bytes.size() - 4]) |
      static_cast<std::uint32_t>(bytes[bytes.size() - 3]) << 8 |
      static_cast<std::uint32_t>(bytes[bytes.size() - 2]) << 16 |
      static_cast<std::uint32_t>(bytes[bytes.size() - 1]) << 24;

  Reader r{bytes.data(), bytes.size() - 4};
  r.pos = 4;
  const std::uint16_t version = r.u16();
  if (version != kFormatVersion) {
    throw SerializationError("model file: unsupported format version " +
                             std::to_string(version));
  }
  const std::uint8_t kind = r.u8();
  r.u8();  // reserved
  const auto checked = [](std::int32_t v) {
    if (v < 1 || v > 4096) {
      throw SerializationError("model file: implausible config extent " +
                               std::to_string(v) + " (corrupt stream?)");
    }
    return static_cast<int>(v);
  };
  Model model;
  if (kind == static_cast<std::uint8_t>(ModelKind::wavenet)) {
    WaveNetConfig c;
    c.filter_size = checked(r.i32());
    c.num_filters = checked(r.i32());
    c.dilation_base = checked(r.i32());
    c.num_layers = checked(r.i32());
    c.input_features = checked(r.i32());
    model.params = wavenet_init(c, 0);
  } else if (kind == static_cast<std::uint8_t>(ModelKind::lstm)) {
    LstmConfig c;
    c.input_features = checked(r.i32());
    c.hidden_size = checked(r.i32());
    model.params = lstm_init(c, 0);
  } else {
    throw SerializationError("model file: unknown model kind " + std::to_string(kind));
  }
  model.window_len = r.i32();
  model.seed = r.u64();
  model.norm = read_norm(r);
  for (nn::ParamRef ref : model.param_refs()) {
    for (double& v : ref.value->data) v = r.f64();
  }
  if (r.pos != r.size) {
    throw SerializationError("model file: " + std::to_string(r.size - r.pos) +
                             " unexpected trailing bytes");
  }
  if (crc32(bytes.data(), bytes.size() - 4) != stored_crc) {
    throw SerializationError("model file: checksum mismatch");
  }
  return model;
}

void save_model(const Model& model, const std::string& path) {
  const std::vector<std::uint8_t> bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed while writing model file '" + path + "'");
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

double Model::predict_window(const Tensor& window_norm) {
  double norm_pred;
  if (auto* wn = std::get_if<WaveNetParams>(&params)) {
    nn::Tape tape;
    auto pred = wavenet_window_graph(tape, *wn, window_norm);
    norm_pred = tape.value(pred).data[0];
  } else {
    auto& lp = std::get<LstmParams>(params);
    LstmWindowCache cache;
    norm_pred = lstm_window_forward(lp, window_norm, cache)[0];
  }
  return denormalize_qoe(norm_pred, norm);
}

std::vector<double> Model::predict_series_norm(const Tensor& features_norm) {
  const std::size_t T = features_norm.shape[1];
  const std::size_t w = static_cast<std::size_t>(window_len);
  if (auto* wn = std::get_if<WaveNetParams>(&params)) {
    // The full dilated pass equals the per-timestep padded-window pass as
    // long as the effective receptive field fits in the window.
    if (wn->config.effective_receptive_field() <= window_len) {
      return wavenet_forward(*wn, features_norm);
    }
  }
  // Window-at-a-time route, matching the training conditions (state reset
  // per window for the recurrent model, zero padding before t = 0).
  std::vector<double> out(T);
  Tensor window = Tensor::zeros({kNumFeatures, w});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t r = 0; r < kNumFeatures; ++r) {
      for (std::size_t i = 0; i < w; ++i) {
        const std::ptrdiff_t src =
            static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(w - 1 - i);
        window.at(r, i) =
            src < 0 ? 0.0 : features_norm.at(r, static_cast<std::size_t>(src));
      }
    }
    if (auto* wn = std::get_if<WaveNetParams>(&params)) {
      nn::Tape tape;
      auto pred = wavenet_window_graph(tape, *wn, window);
      out[t] = tape.value(pred).data[0];
    } else {
      auto& lp = std::get<LstmParams>(params);
      LstmWindowCache cache;
      out[t] = lstm_window_forward(lp, window, cache)[0];
    }
  }
  return out;
}

std::vector<double> Model::predict_series(const SessionTrace& trace) {
  FeatureMatrix raw = derive_features(trace);
  FeatureMatrix normed = normalize(raw, norm);
  std::vector<double> preds = predict_series_norm(normed.values);
  for (double& p : preds) p = denormalize_qoe(p, norm);
  return preds;
}

}  // namespace wqoe
