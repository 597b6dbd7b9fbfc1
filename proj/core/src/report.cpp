#include "ntklab/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "ntklab/errors.hpp"

namespace ntklab {

namespace {

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string g4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// File-name-safe series key: anything outside [A-Za-z0-9_-] becomes '_'.
std::string sanitize(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  return out;
}

void write_text_file(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + file.string() + " for writing");
  out << text;
  if (!out) throw ConfigError("write to " + file.string() + " failed");
}

std::string series_csv(const std::vector<std::pair<double, double>>& pts) {
  std::string out = "x,y\n";
  for (auto [x, y] : pts) out += g17(x) + "," + g17(y) + "\n";
  return out;
}

// Minimal scatter SVG. Log-log axes when `loglog` (requires positive data);
// the fitted power law, when given, is drawn as a line in log space.
std::string series_svg(const std::string& title,
                       const std::vector<std::pair<double, double>>& pts, bool loglog,
                       const std::optional<PowerFit>& fit) {
  const double W = 640, H = 480, ML = 70, MR = 20, MT = 40, MB = 50;
  auto tx = [&](double v) { return loglog ? std::log(v) : v; };
  double xmin = tx(pts.front().first), xmax = xmin;
  double ymin = tx(pts.front().second), ymax = ymin;
  for (auto [x, y] : pts) {
    xmin = std::min(xmin, tx(x));
    xmax = std::max(xmax, tx(x));
    ymin = std::min(ymin, tx(y));
    ymax = std::max(ymax, tx(y));
  }
  if (xmax == xmin) { xmin -= 0.5; xmax += 0.5; }
  if (ymax == ymin) { ymin -= 0.5; ymax += 0.5; }
  auto px = [&](double v) { return ML + (tx(v) - xmin) / (xmax - xmin) * (W - ML - MR); };
  auto py = [&](double v) { return H - MB - (tx(v) - ymin) / (ymax - ymin) * (H - MT - MB); };
  auto inv = [&](double t) { return loglog ? std::exp(t) : t; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + g4(W) + "\" height=\"" +
       g4(H) + "\" viewBox=\"0 0 " + g4(W) + " " + g4(H) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + g4(W / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"14\">" +
       title + (loglog ? " (log-log)" : "") + "</text>\n";
  s += "<line x1=\"" + g4(ML) + "\" y1=\"" + g4(H - MB) + "\" x2=\"" + g4(W - MR) +
       "\" y2=\"" + g4(H - MB) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + g4(ML) + "\" y1=\"" + g4(MT) + "\" x2=\"" + g4(ML) + "\" y2=\"" +
       g4(H - MB) + "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + g4(ML) + "\" y=\"" + g4(H - MB + 20) +
       "\" font-family=\"monospace\" font-size=\"11\">" + g4(inv(xmin)) + "</text>\n";
  s += "<text x=\"" + g4(W - MR) + "\" y=\"" + g4(H - MB + 20) +
       "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" + g4(inv(xmax)) +
       "</text>\n";
  s += "<text x=\"" + g4(ML - 6) + "\" y=\"" + g4(H - MB) +
       "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" + g4(inv(ymin)) +
       "</text>\n";
  s += "<text x=\"" + g4(ML - 6) + "\" y=\"" + g4(MT + 4) +
       "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" + g4(inv(ymax)) +
       "</text>\n";
  if (fit && loglog) {
    double y0 = fit->exponent * xmin + fit->intercept;
    double y1 = fit->exponent * xmax + fit->intercept;
    auto clamp_py = [&](double ly) {
      double t = H - MB - (ly - ymin) / (ymax - ymin) * (H - MT - MB);
      return std::clamp(t, MT, H - MB);
    };
    s += "<line x1=\"" + g4(ML) + "\" y1=\"" + g4(clamp_py(y0)) + "\" x2=\"" + g4(W - MR) +
         "\" y2=\"" + g4(clamp_py(y1)) + "\" stroke=\"#c33\" stroke-dasharray=\"6 3\"/>\n";
    s += "<text x=\"" + g4(W - MR) + "\" y=\"" + g4(MT + 18) +
         "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"12\" fill=\"#c33\">slope " +
         g4(fit->exponent) + ", r2 " + g4(fit->r2) + "</text>\n";
  }
  for (auto [x, y] : pts)
    s += "<circle cx=\"" + g4(px(x)) + "\" cy=\"" + g4(py(y)) +
         "\" r=\"3.5\" fill=\"#246\"/>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace

std::string to_json_string(const ProbeReport& rep) {
  nlohmann::json j;
  j["name"] = rep.name;
  j["scalars"] = nlohmann::json::object();
  for (const auto& [k, v] : rep.scalars) j["scalars"][k] = v;
  j["series"] = nlohmann::json::object();
  for (const auto& [k, pts] : rep.series) {
    auto arr = nlohmann::json::array();
    for (auto [x, y] : pts) arr.push_back({x, y});
    j["series"][k] = std::move(arr);
  }
  if (rep.fit)
    j["fit"] = {{"exponent", rep.fit->exponent},
                {"intercept", rep.fit->intercept},
                {"r2", rep.fit->r2}};
  else
    j["fit"] = nullptr;
  j["meta"] = rep.meta;
  j["flags"] = rep.flags;
  return j.dump(2) + "\n";
}

ProbeReport report_from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("report is not valid JSON: ") + e.what());
  }
  ProbeReport rep;
  try {
    rep.name = j.at("name").get<std::string>();
    for (const auto& [k, v] : j.at("scalars").items()) rep.scalars[k] = v.get<double>();
    for (const auto& [k, arr] : j.at("series").items()) {
      auto& pts = rep.series[k];
      for (const auto& p : arr) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    }
    if (!j.at("fit").is_null()) {
      PowerFit f;
      f.exponent = j["fit"].at("exponent").get<double>();
      f.intercept = j["fit"].at("intercept").get<double>();
      f.r2 = j["fit"].at("r2").get<double>();
      rep.fit = f;
    }
    if (j.contains("meta"))
      for (const auto& [k, v] : j["meta"].items()) rep.meta[k] = v.get<std::string>();
    if (j.contains("flags"))
      for (const auto& v : j["flags"]) rep.flags.push_back(v.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report JSON has a bad field: ") + e.what());
  }
  return rep;
}

ReportFiles save_report(const ProbeReport& rep, const std::filesystem::path& dir, bool plots) {
  if (rep.name.empty()) throw ConfigError("report has no name");
  std::filesystem::create_directories(dir);
  ReportFiles files;
  files.json = dir / (sanitize(rep.name) + ".json");
  write_text_file(files.json, to_json_string(rep));
  for (const auto& [key, pts] : rep.series) {
    std::filesystem::path csv = dir / (sanitize(rep.name) + "." + sanitize(key) + ".csv");
    write_text_file(csv, series_csv(pts));
    files.csv.push_back(csv);
    if (plots && !pts.empty()) {
      bool positive = std::all_of(pts.begin(), pts.end(),
                                  [](auto p) { return p.first > 0.0 && p.second > 0.0; });
      bool loglog = rep.fit.has_value() && positive;
      std::filesystem::path svg = dir / (sanitize(rep.name) + "." + sanitize(key) + ".svg");
      write_text_file(svg, series_svg(rep.name + " / " + key, pts, loglog, rep.fit));
      files.svg.push_back(svg);
    }
  }
  return files;
}

}  // namespace ntklab
