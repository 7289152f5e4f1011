#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdmpsim/limit.hpp"

namespace pdmpsim {

enum class Verdict { pass, fail, info };
const char* verdict_name(Verdict v);

// One CSV row. level = -1 marks a study-wide row.
struct Metric {
    std::string study;
    int level = -1;
    std::string metric;
    double estimate = 0.0;
    std::optional<double> stderr_;  // unset: exact
    std::size_t n = 0;
    Verdict verdict = Verdict::info;
};

struct Series {
    std::string name;
    std::vector<double> x, y;
};

struct Figure {
    std::string name;  // file suffix
    std::string title, xlabel, ylabel;
    bool log_y = false;
    std::vector<Series> series;
};

struct StudyReport {
    std::string study;
    std::vector<Metric> metrics;
    std::vector<Figure> figures;
    std::vector<std::string> notes;
    nlohmann::json provenance;
    nlohmann::json extra = nlohmann::json::object();
    double wall_seconds = 0.0;

    Metric& add(int level, std::string metric, double estimate, std::optional<double> se, std::size_t n,
                Verdict verdict = Verdict::info);
    bool pass() const;
    std::size_t failures() const;
};

std::string format_number(double v);
std::string report_csv(const StudyReport& report);
nlohmann::json report_json(const StudyReport& report);
std::string render_svg(const Figure& fig);

// Writes <study>.csv, <study>.json, <study>_<figure>.svg and the wall-clock
// record <study>_timing.json (kept apart so the other files stay byte-stable).
std::vector<std::filesystem::path> emit_outputs(const StudyReport& report, const std::filesystem::path& dir);

// Shared trajectory schema for field-valued solvers (kind "deterministic" or
// "langevin"): header line, then one {type:"frame", t, u, p} line per frame.
void write_field_trajectory_jsonl(std::ostream& os, const std::string& kind, const std::vector<LimitState>& frames,
                                  const nlohmann::json& header_extra);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace pdmpsim
