#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "metagam/fit.hpp"

namespace metagam {

inline constexpr int kStrippedFormatVersion = 1;

/// Raw-data-free model summary exchanged between sites. The random-intercept
/// coefficient block (one entry per subject) is removed; only its smoothing
/// parameter, EDF, and the subject count remain.
struct StrippedModel {
  FittedGam model;
  std::string cohort_label;
  int format_version = kStrippedFormatVersion;
};

/// Drop everything that is not needed for prediction and pooling, then run
/// the structural privacy audit on the serialized form.
StrippedModel strip_rawdata(const FittedGam& fit, std::string cohort_label);

/// Canonical JSON: UTF-8, keys sorted lexicographically, numbers as shortest
/// round-trip decimals. serialize(deserialize(s)) is byte-identical to s.
std::string serialize(const StrippedModel& sm);
StrippedModel deserialize(const std::string& text);

void save_stripped(const StrippedModel& sm, const std::string& path);
StrippedModel load_stripped(const std::string& path);

/// Full local fit file (keeps the random-intercept block and fit diagnostics;
/// never leaves the site).
std::string serialize_local(const FittedGam& fit);
FittedGam deserialize_local(const std::string& text);
void save_local(const FittedGam& fit, const std::string& path);
FittedGam load_local(const std::string& path);

/// Throws PrivacyAuditFailure if any array anywhere in the document has
/// length n (or n_subjects, when present).
void privacy_audit(const nlohmann::json& doc, long n, std::optional<long> n_subjects);

nlohmann::json stripped_to_json(const StrippedModel& sm);

}  // namespace metagam
