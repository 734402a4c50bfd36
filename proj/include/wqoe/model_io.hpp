#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "wqoe/features.hpp"
#include "wqoe/lstm.hpp"
#include "wqoe/wavenet.hpp"

namespace wqoe {

enum class ModelKind : std::uint8_t { wavenet = 1, lstm = 2 };

ModelKind parse_model_kind(const std::string& name);
std::string model_kind_name(ModelKind kind);

/// A trained predictor: weights, the normalization captured on its training
/// data, and the window length it was trained with.
struct Model {
  std::variant<WaveNetParams, LstmParams> params;
  NormStats norm;
  int window_len = 8;
  std::uint64_t seed = 0;  // training seed, kept for reproducibility

  ModelKind kind() const {
    return std::holds_alternative<WaveNetParams>(params) ? ModelKind::wavenet
                                                         : ModelKind::lstm;
  }
  std::size_t param_count() const;
  std::vector<nn::ParamRef> param_refs();

  /// Denormalized QoE prediction for one normalized window [4, w].
  double predict_window(const Tensor& window_norm);

  /// Denormalized per-second predictions over a whole raw trace. Every
  /// timestep is predicted from its trailing window of window_len seconds,
  /// zero-padded (in normalized units) before the session start.
  std::vector<double> predict_series(const SessionTrace& trace);

  /// Same, over pre-normalized features (normalized output).
  std::vector<double> predict_series_norm(const Tensor& features_norm);
};

/// Binary little-endian format: "WQOE" magic, format version, model kind,
/// config block, window length, seed, normalization block, flat weight
/// arrays in declaration order, trailing CRC-32. Bad magic, unsupported
/// version, truncation and checksum failures are reported distinctly.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

std::vector<std::uint8_t> serialize_model(const Model& model);
Model deserialize_model(const std::vector<std::uint8_t>& bytes);

std::uint32_t crc32(const std::uint8_t* data, std::size_t size);

}  // namespace wqoe
