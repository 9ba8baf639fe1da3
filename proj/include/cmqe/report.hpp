#pragma once

// Text forms of labels, probabilities and evaluation reports.

#include <array>
#include <charconv>
#include <cstdio>
#include <span>
#include <string>
#include <system_error>

#include <nlohmann/json.hpp>

#include "cmqe/metrics.hpp"

namespace cmqe {

// Shortest decimal form that reads back to the same double ("7", "0.25").
inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw DataError("cannot format number");
  return std::string(buf.data(), ptr);
}

inline std::string format_fixed5(double v) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.5f", v);
  return buf.data();
}

inline Label parse_label(std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw DataError("not a numeric label: '" + std::string(text) + "'");
  }
  return v;
}

inline std::string_view to_string(Subtask s) { return s == Subtask::A ? "A" : "B"; }

// metric=value lines, five decimals.
inline std::string report_to_text(const EvaluationReport& r) {
  std::string out;
  out += "subtask=" + std::string(to_string(r.subtask)) + "\n";
  out += "n=" + std::to_string(r.n) + "\n";
  out += "f1_weighted=" + format_fixed5(r.f1_weighted) + "\n";
  out += "cohens_kappa=" + format_fixed5(r.cohens_kappa) + "\n";
  out += std::string("cohens_kappa_official=") + (r.kappa_official ? "true" : "false") + "\n";
  out += "mse=" + format_fixed5(r.mse) + "\n";
  return out;
}

inline nlohmann::ordered_json report_to_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["subtask"] = std::string(to_string(r.subtask));
  j["n"] = r.n;
  j["f1_weighted"] = r.f1_weighted;
  j["cohens_kappa"] = r.cohens_kappa;
  j["cohens_kappa_official"] = r.kappa_official;
  j["mse"] = r.mse;
  auto& cm = j["confusion"];
  cm["classes"] = r.confusion.classes;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t g = 0; g < r.confusion.size(); ++g) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t p = 0; p < r.confusion.size(); ++p) row.push_back(r.confusion(g, p));
    rows.push_back(std::move(row));
  }
  cm["counts"] = std::move(rows);
  return j;
}

// Console summary in the FS / CK / MSE layout.
inline std::string report_summary(const EvaluationReport& r) {
  std::string out = "SubTask " + std::string(to_string(r.subtask)) + " (n=" + std::to_string(r.n) + ")\n";
  out += "FS  " + format_fixed5(r.f1_weighted) + "\n";
  if (r.kappa_official) {
    out += "CK  " + format_fixed5(r.cohens_kappa) + "\n";
  } else {
    out += "CK  -  (unofficial " + format_fixed5(r.cohens_kappa) + ")\n";
  }
  out += "MSE " + format_fixed5(r.mse) + "\n";
  return out;
}

}  // namespace cmqe
