#include "pdmpsim/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "pdmpsim/errors.hpp"

namespace pdmpsim {

using nlohmann::json;

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        default: return "info";
    }
}

Metric& StudyReport::add(int level, std::string metric, double estimate, std::optional<double> se, std::size_t n,
                         Verdict verdict) {
    metrics.push_back({study, level, std::move(metric), estimate, se, n, verdict});
    return metrics.back();
}

bool StudyReport::pass() const { return failures() == 0; }

std::size_t StudyReport::failures() const {
    return static_cast<std::size_t>(
        std::count_if(metrics.begin(), metrics.end(), [](const Metric& m) { return m.verdict == Verdict::fail; }));
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string report_csv(const StudyReport& report) {
    std::ostringstream os;
    os << "study,level,metric,estimate,stderr,n,verdict\n";
    for (const auto& m : report.metrics) {
        os << m.study << ',' << (m.level < 0 ? std::string("all") : std::to_string(m.level)) << ',' << m.metric << ','
           << format_number(m.estimate) << ',' << (m.stderr_ ? format_number(*m.stderr_) : std::string("exact")) << ','
           << m.n << ',' << verdict_name(m.verdict) << '\n';
    }
    return os.str();
}

namespace {

json number_json(double v) {
    if (std::isfinite(v)) return v;
    return format_number(v);
}

}  // namespace

json report_json(const StudyReport& report) {
    json rows = json::array();
    for (const auto& m : report.metrics) {
        json r = {{"study", m.study},
                  {"level", m.level < 0 ? json("all") : json(m.level)},
                  {"metric", m.metric},
                  {"estimate", number_json(m.estimate)},
                  {"stderr", m.stderr_ ? number_json(*m.stderr_) : json("exact")},
                  {"n", m.n},
                  {"verdict", verdict_name(m.verdict)}};
        rows.push_back(std::move(r));
    }
    json figs = json::array();
    for (const auto& f : report.figures) {
        json series = json::array();
        for (const auto& s : f.series) series.push_back({{"name", s.name}, {"x", s.x}, {"y", s.y}});
        figs.push_back({{"name", f.name}, {"title", f.title}, {"series", series}});
    }
    return {{"study", report.study},
            {"verdict", report.pass() ? "pass" : "fail"},
            {"failures", report.failures()},
            {"metrics", rows},
            {"figures", figs},
            {"notes", report.notes},
            {"extra", report.extra},
            {"provenance", report.provenance}};
}

std::string render_svg(const Figure& fig) {
    const double W = 480, H = 320, ml = 64, mr = 16, mt = 32, mb = 48;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    auto ty = [&](double y) { return fig.log_y ? std::log10(std::max(y, 1e-300)) : y; };
    for (const auto& s : fig.series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    if (!(x1 >= x0)) x0 = 0, x1 = 1;
    if (!(y1 >= y0)) y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad, y1 += pad;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (ty(y) - y0) / (y1 - y0) * (H - mt - mb); };
    static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    std::ostringstream os;
    char buf[160];
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << fig.title << "</text>\n";
    std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", ml, H - mb,
                  W - mr, H - mb);
    os << buf;
    std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", ml, mt, ml,
                  H - mb);
    os << buf;
    for (int t = 0; t <= 4; ++t) {
        double yv = y0 + (y1 - y0) * t / 4.0;
        double yy = H - mb - (yv - y0) / (y1 - y0) * (H - mt - mb);
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"end\" font-size=\"10\">%.3g</text>\n",
                      ml - 4, yy + 3, fig.log_y ? std::pow(10.0, yv) : yv);
        os << buf;
        double xv = x0 + (x1 - x0) * t / 4.0;
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\" font-size=\"10\">%.3g</text>\n",
                      px(xv), H - mb + 14, xv);
        os << buf;
    }
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">" << fig.xlabel
       << "</text>\n";
    os << "<text x=\"14\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
       << H / 2 << ")\">" << fig.ylabel << "</text>\n";
    for (std::size_t s = 0; s < fig.series.size(); ++s) {
        const auto& ser = fig.series[s];
        const char* c = colours[s % 6];
        std::ostringstream pts;
        for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i) {
            if (!std::isfinite(ser.y[i])) continue;
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(ser.x[i]), py(ser.y[i]));
            pts << buf;
        }
        os << "<polyline fill=\"none\" stroke=\"" << c << "\" points=\"" << pts.str() << "\"/>\n";
        for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i) {
            if (!std::isfinite(ser.y[i])) continue;
            std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n", px(ser.x[i]),
                          py(ser.y[i]), c);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" font-size=\"11\" fill=\"%s\">", W - mr - 140,
                      mt + 14.0 * (s + 1), c);
        os << buf << ser.name << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw OutputError("cannot write " + path.string());
    out << text;
    if (!out) throw OutputError("write failed for " + path.string());
}

std::vector<std::filesystem::path> emit_outputs(const StudyReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw OutputError("cannot create output directory " + dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::string& name, const std::string& text) {
        auto p = dir / name;
        write_text_file(p, text);
        written.push_back(p);
    };
    put(report.study + ".csv", report_csv(report));
    put(report.study + ".json", report_json(report).dump(2) + "\n");
    for (const auto& f : report.figures) put(report.study + "_" + f.name + ".svg", render_svg(f));
    json timing = {{"study", report.study}, {"wall_seconds", report.wall_seconds}};
    put(report.study + "_timing.json", timing.dump(2) + "\n");
    return written;
}

void write_field_trajectory_jsonl(std::ostream& os, const std::string& kind, const std::vector<LimitState>& frames,
                                  const json& header_extra) {
    json header = {{"type", "header"}, {"kind", kind}, {"frames", frames.size()}};
    for (auto it = header_extra.begin(); it != header_extra.end(); ++it) header[it.key()] = it.value();
    os << header.dump() << '\n';
    for (const auto& f : frames) os << json({{"type", "frame"}, {"t", f.t}, {"u", f.u}, {"p", f.p}}).dump() << '\n';
}

}  // namespace pdmpsim
