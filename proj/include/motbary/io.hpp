#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "motbary/analysis.hpp"
#include "motbary/error.hpp"
#include "motbary/image.hpp"
#include "motbary/measures.hpp"

#ifdef MOTBARY_HAVE_PNG
#include "motbary/io_png.hpp"
#endif

namespace motbary {

using json = nlohmann::json;

enum class MeasureFormat { json, csv, image };

inline MeasureFormat parse_measure_format(std::string_view s) {
  if (s == "json") return MeasureFormat::json;
  if (s == "csv") return MeasureFormat::csv;
  if (s == "image") return MeasureFormat::image;
  throw InvalidArgument("unknown measure format '" + std::string(s) + "'");
}

/// Picks a format from the file extension; defaults to JSON.
inline MeasureFormat format_from_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".csv") return MeasureFormat::csv;
  if (ext == ".pgm" || ext == ".png") return MeasureFormat::image;
  return MeasureFormat::json;
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read error on '" + path.string() + "'");
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write error on '" + path.string() + "'");
}

/// Shortest-exact text for a double (17 significant digits).
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view s, std::size_t line) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError("malformed number '" + std::string(s) + "' on line " + std::to_string(line));
  }
  return v;
}

inline json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

inline double number_or_string(const json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::numeric_limits<double>::quiet_NaN();
}

inline bool has_magic(const std::string& bytes, std::string_view magic) {
  return bytes.size() >= magic.size() && std::string_view(bytes).substr(0, magic.size()) == magic;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Measures

inline json measure_to_json(const DiscreteMeasure& m) {
  json pts = json::array();
  for (std::size_t j = 0; j < m.size(); ++j) {
    const auto p = m.point(j);
    pts.push_back(std::vector<double>(p.begin(), p.end()));
  }
  return {{"dim", m.dim()},
          {"points", std::move(pts)},
          {"weights", std::vector<double>(m.weights().begin(), m.weights().end())}};
}

inline DiscreteMeasure measure_from_json(const json& j) {
  try {
    const auto dim = j.at("dim").get<std::size_t>();
    const auto& pts = j.at("points");
    auto w = j.at("weights").get<std::vector<double>>();
    if (pts.size() != w.size()) throw IoError("measure JSON: points and weights differ in length");
    std::vector<double> flat;
    flat.reserve(pts.size() * dim);
    for (const auto& p : pts) {
      auto v = p.get<std::vector<double>>();
      if (v.size() != dim) throw IoError("measure JSON: point of wrong dimension");
      flat.insert(flat.end(), v.begin(), v.end());
    }
    return DiscreteMeasure(dim, std::move(flat), std::move(w));
  } catch (const json::exception& e) {
    throw IoError(std::string("measure JSON: ") + e.what());
  }
}

/// CSV with a header row x0,...,x{d-1},weight and one atom per line.
inline std::string measure_to_csv(const DiscreteMeasure& m) {
  std::string out;
  for (std::size_t k = 0; k < m.dim(); ++k) out += "x" + std::to_string(k) + ",";
  out += "weight\n";
  for (std::size_t j = 0; j < m.size(); ++j) {
    for (double c : m.point(j)) out += detail::format_double(c) + ",";
    out += detail::format_double(m.weight(j)) + "\n";
  }
  return out;
}

/// Parses d coordinate columns plus a weight column. A first line that does
/// not parse as numbers is treated as a header; blank lines and '#' comments
/// are skipped.
inline DiscreteMeasure measure_from_csv(std::string_view text) {
  std::vector<double> pts, w;
  std::size_t cols = 0;
  std::size_t line_no = 0;
  bool first = true;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos || line.front() == '#') continue;
    std::vector<std::string_view> fields;
    for (std::size_t pos = 0;;) {
      const auto c = line.find(',', pos);
      fields.push_back(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
      if (c == std::string_view::npos) break;
      pos = c + 1;
    }
    if (first) {
      first = false;
      const auto& f0 = fields.front();
      double dummy;
      auto s = f0.substr(std::min(f0.find_first_not_of(" \t"), f0.size()));
      if (std::from_chars(s.data(), s.data() + s.size(), dummy).ec != std::errc()) continue;
    }
    if (fields.size() < 2) throw IoError("CSV line " + std::to_string(line_no) + " needs coordinates and a weight");
    if (cols == 0) cols = fields.size();
    if (fields.size() != cols) {
      throw IoError("CSV line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                    " fields, expected " + std::to_string(cols));
    }
    for (std::size_t k = 0; k + 1 < cols; ++k) pts.push_back(detail::parse_double(fields[k], line_no));
    w.push_back(detail::parse_double(fields.back(), line_no));
  }
  if (w.empty()) throw IoError("CSV contains no atoms");
  return DiscreteMeasure(cols - 1, std::move(pts), std::move(w));
}

// ---------------------------------------------------------------------------
// Images

/// Reads binary (P5) or ASCII (P2) PGM with maxval <= 255.
inline GrayImage parse_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  auto skip_ws = [&] {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        return;
      }
    }
  };
  auto read_uint = [&] {
    skip_ws();
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), v);
    if (ec != std::errc()) throw IoError("PGM: malformed header");
    pos = static_cast<std::size_t>(ptr - bytes.data());
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2')) {
    throw IoError("not a PGM file");
  }
  const bool binary = bytes[1] == '5';
  pos = 2;
  const auto w = read_uint();
  const auto h = read_uint();
  const auto maxval = read_uint();
  if (w == 0 || h == 0) throw IoError("PGM: empty image");
  if (maxval == 0 || maxval > 255) throw IoError("PGM: only 8-bit images are supported");
  GrayImage img(w, h);
  if (binary) {
    ++pos;  // single whitespace after maxval
    if (bytes.size() < pos + w * h) throw IoError("PGM: truncated pixel data");
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), w * h, img.pixels.begin());
  } else {
    for (auto& px : img.pixels) {
      const auto v = read_uint();
      if (v > maxval) throw IoError("PGM: pixel exceeds maxval");
      px = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

inline std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(img.pixels.begin(), img.pixels.end());
  return out;
}

inline GrayImage load_image(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  if (detail::has_magic(bytes, "\x89PNG")) {
#ifdef MOTBARY_HAVE_PNG
    return decode_png(bytes);
#else
    throw IoError("PNG support not compiled in; convert '" + path.string() + "' to PGM");
#endif
  }
  return parse_pgm(bytes);
}

inline void save_pgm(const std::filesystem::path& path, const GrayImage& img) {
  detail::write_file(path, encode_pgm(img));
}

// ---------------------------------------------------------------------------
// Measure files

inline DiscreteMeasure load_measure(const std::filesystem::path& path, MeasureFormat format) {
  switch (format) {
    case MeasureFormat::json: {
      json j;
      try {
        j = json::parse(detail::read_file(path));
      } catch (const json::parse_error& e) {
        throw IoError("'" + path.string() + "': " + e.what());
      }
      return measure_from_json(j);
    }
    case MeasureFormat::csv:
      return measure_from_csv(detail::read_file(path));
    case MeasureFormat::image:
      return measure_from_image(load_image(path));
  }
  throw InvalidArgument("unknown measure format");
}

inline DiscreteMeasure load_measure(const std::filesystem::path& path) {
  return load_measure(path, format_from_extension(path));
}

inline void save_measure(const std::filesystem::path& path, const DiscreteMeasure& m,
                         MeasureFormat format = MeasureFormat::json) {
  switch (format) {
    case MeasureFormat::json:
      detail::write_file(path, measure_to_json(m).dump(1) + "\n");
      return;
    case MeasureFormat::csv:
      detail::write_file(path, measure_to_csv(m));
      return;
    case MeasureFormat::image:
      throw InvalidArgument("measures are not written as images");
  }
}

// ---------------------------------------------------------------------------
// Plans

inline json plan_to_json(const MultiMarginalPlan& plan) {
  json atoms = json::array();
  for (std::size_t a = 0; a < plan.size(); ++a) {
    const auto t = plan.tuple(a);
    atoms.push_back({{"indices", std::vector<MultiMarginalPlan::Index>(t.begin(), t.end())},
                     {"mass", plan.mass(a)}});
  }
  return {{"num_marginals", plan.num_marginals()}, {"atoms", std::move(atoms)}};
}

/// Plan files store indices only; the marginals are supplied by the caller.
inline MultiMarginalPlan plan_from_json(const json& j, std::vector<DiscreteMeasure> measures) {
  try {
    const auto n = j.at("num_marginals").get<std::size_t>();
    if (n != measures.size()) {
      throw IoError("plan has " + std::to_string(n) + " marginals but " +
                    std::to_string(measures.size()) + " measures were given");
    }
    std::vector<MultiMarginalPlan::Index> tuples;
    std::vector<double> masses;
    for (const auto& atom : j.at("atoms")) {
      auto idx = atom.at("indices").get<std::vector<MultiMarginalPlan::Index>>();
      if (idx.size() != n) throw IoError("plan atom has the wrong number of indices");
      tuples.insert(tuples.end(), idx.begin(), idx.end());
      masses.push_back(atom.at("mass").get<double>());
    }
    return MultiMarginalPlan(std::move(measures), std::move(tuples), std::move(masses));
  } catch (const json::exception& e) {
    throw IoError(std::string("plan JSON: ") + e.what());
  }
}

inline void save_plan(const std::filesystem::path& path, const MultiMarginalPlan& plan) {
  detail::write_file(path, plan_to_json(plan).dump(1) + "\n");
}

inline MultiMarginalPlan load_plan(const std::filesystem::path& path, std::vector<DiscreteMeasure> measures) {
  json j;
  try {
    j = json::parse(detail::read_file(path));
  } catch (const json::parse_error& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
  return plan_from_json(j, std::move(measures));
}

// ---------------------------------------------------------------------------
// Reports

inline json bound_constants_to_json(const BoundConstants& b) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"inverse_first_weight", b.inverse_first_weight},
          {"inverse_max_weight", b.inverse_max_weight},
          {"num_measures", b.num_measures},
          {"randomized_reference", b.randomized_reference},
          {"mixture_baseline", b.mixture_baseline},
          {"greedy_sorted", opt(b.greedy_sorted)},
          {"randomized_greedy", opt(b.randomized_greedy)},
          {"greedy_lower", b.greedy_lower},
          {"greedy_lower_simple", b.greedy_lower_simple},
          {"harmonic_number", b.harmonic_number}};
}

inline json report_to_json(const CostReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? detail::finite_or_string(*v) : json(nullptr); };
  return {{"phi", r.phi},
          {"psi", r.psi},
          {"pairwise_lb", r.pairwise_lb},
          {"phi_exact", opt(r.phi_exact)},
          {"ratio_vs_exact", opt(r.ratio_vs_exact)},
          {"ratio_vs_lb", detail::finite_or_string(r.ratio_vs_lb)},
          {"bound_constants", bound_constants_to_json(r.bound_constants)}};
}

inline CostReport report_from_json(const json& j) {
  try {
    auto opt = [](const json& v) -> std::optional<double> {
      if (v.is_null()) return std::nullopt;
      return detail::number_or_string(v);
    };
    CostReport r;
    r.phi = j.at("phi").get<double>();
    r.psi = j.at("psi").get<double>();
    r.pairwise_lb = j.at("pairwise_lb").get<double>();
    r.phi_exact = opt(j.at("phi_exact"));
    r.ratio_vs_exact = opt(j.at("ratio_vs_exact"));
    r.ratio_vs_lb = detail::number_or_string(j.at("ratio_vs_lb"));
    const auto& b = j.at("bound_constants");
    r.bound_constants.inverse_first_weight = b.at("inverse_first_weight").get<double>();
    r.bound_constants.inverse_max_weight = b.at("inverse_max_weight").get<double>();
    r.bound_constants.num_measures = b.at("num_measures").get<double>();
    r.bound_constants.randomized_reference = b.at("randomized_reference").get<double>();
    r.bound_constants.mixture_baseline = b.at("mixture_baseline").get<double>();
    r.bound_constants.greedy_sorted = opt(b.at("greedy_sorted"));
    r.bound_constants.randomized_greedy = opt(b.at("randomized_greedy"));
    r.bound_constants.greedy_lower = b.at("greedy_lower").get<double>();
    r.bound_constants.greedy_lower_simple = b.at("greedy_lower_simple").get<double>();
    r.bound_constants.harmonic_number = b.at("harmonic_number").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw IoError(std::string("report JSON: ") + e.what());
  }
}

inline void save_report(const std::filesystem::path& path, const CostReport& r) {
  detail::write_file(path, report_to_json(r).dump(1) + "\n");
}

}  // namespace motbary
