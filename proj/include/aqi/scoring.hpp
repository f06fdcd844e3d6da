#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include <json.hpp>

#include "aqi/error.hpp"
#include "aqi/features.hpp"
#include "aqi/regression.hpp"
#include "aqi/siamese.hpp"

namespace aqi {

enum class ScorerKind { M1, M2, SiameseContrastive, SiameseTriplet };

inline const char* to_string(ScorerKind k) {
  switch (k) {
    case ScorerKind::M1: return "M1";
    case ScorerKind::M2: return "M2";
    case ScorerKind::SiameseContrastive: return "SiameseContrastive";
    case ScorerKind::SiameseTriplet: return "SiameseTriplet";
  }
  return "M1";
}

inline ScorerKind scorer_kind_from_string(const std::string& s) {
  if (s == "M1" || s == "m1") return ScorerKind::M1;
  if (s == "M2" || s == "m2") return ScorerKind::M2;
  if (s == "SiameseContrastive") return ScorerKind::SiameseContrastive;
  if (s == "SiameseTriplet") return ScorerKind::SiameseTriplet;
  throw Error(ErrorCode::ParseError,
              "kind must be one of M1, M2, SiameseContrastive, SiameseTriplet; got '" + s + "'", "kind");
}

/// A scorer plus the preprocessing it was trained with. This is the unit
/// that gets serialized, stored and used for scoring.
struct TrainedModel {
  ScorerKind kind = ScorerKind::M1;
  std::variant<ModelWeights, SiameseNet> scorer;
  NormalizationCaps caps = NormalizationCaps::defaults();
  /// Config, seed and cohort digest; no wall-clock data so that artifacts are
  /// reproducible byte for byte.
  nlohmann::json training = nlohmann::json::object();
};

inline double score_f(const TrainedModel& m, const FeatureVector& x) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ModelWeights>) return eval(s, x);
        else return forward(s, x);
      },
      m.scorer);
}

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json model_to_json(const TrainedModel& m) {
  nlohmann::json j = {{"format", "aqi-model"},
                      {"version", kModelFormatVersion},
                      {"kind", to_string(m.kind)},
                      {"caps", caps_to_json(m.caps)},
                      {"training", m.training}};
  if (const auto* w = std::get_if<ModelWeights>(&m.scorer)) j["regression"] = weights_to_json(*w);
  else j["network"] = network_to_json(std::get<SiameseNet>(m.scorer));
  return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "aqi-model") throw Error(ErrorCode::ParseError, "not a model document", "format");
    if (j.value("version", 0) != kModelFormatVersion) throw Error(ErrorCode::ParseError, "unsupported model version", "version");
    TrainedModel m;
    m.kind = scorer_kind_from_string(j.at("kind").get<std::string>());
    m.caps = caps_from_json(j.at("caps"));
    m.training = j.value("training", nlohmann::json::object());
    if (m.kind == ScorerKind::M1 || m.kind == ScorerKind::M2) {
      auto w = weights_from_json(j.at("regression"));
      if (to_string(w.kind) != std::string(to_string(m.kind))) {
        throw Error(ErrorCode::ParseError, "regression kind disagrees with model kind", "regression.kind");
      }
      m.scorer = std::move(w);
    } else {
      m.scorer = network_from_json(j.at("network"));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed model document: ") + e.what());
  }
}

/// Serialized artifact text: stable key order and formatting.
inline std::string model_artifact(const TrainedModel& m) { return model_to_json(m).dump(2) + "\n"; }

/// 64-bit FNV-1a, hex encoded; used as a content checksum for artifacts.
inline std::string checksum(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace aqi
